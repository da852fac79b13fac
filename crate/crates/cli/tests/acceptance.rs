//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! with its measurements, then asserts. Run with
//! `cargo test -p nchull-cli --test acceptance -- --nocapture --test-threads=1`.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use nchull::exec::Exec;
use nchull::extreme::{escape_experiment, refute_absolute_extreme, verify_certificate, Verdict};
use nchull::hull::{converge_experiment, hull_point, lift_contraction_to_isometry};
use nchull::linalg::{
    commutant_with, gaussian_matrix, identity, kron, op_norm, random_isometry, real, rng, CommutantOptions,
    ComplexMatrix, SelfAdjointTuple, C64,
};
use nchull::model::{default_example, CompactTupleModel, ExampleOptions, ShiftedExample};
use nchull::pencil::{
    affine_experiment, eval_pencil, random_bounded, reconstruct_pencil_from_affine, sample_at_unit_points,
    ucp_experiment, AffineOptions, LinearPencil,
};
use nchull::tol::Tolerances;

fn report(n: u32, pass: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let within = elapsed <= budget;
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    println!(
        "criterion {n}: {verdict} ({detail}; {:.3} s of {} s budget)",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(within, "criterion {n} exceeded its runtime budget");
}

fn example() -> ShiftedExample {
    default_example(&ExampleOptions::default()).unwrap()
}

/// Complex dimension of `{B : B M_i = M_i B}` from the SVD of the stacked
/// maps `vec(B) -> vec(M_i B - B M_i) = (I (x) M_i - M_i^T (x) I) vec(B)`.
fn commutant_dim_oracle(t: &SelfAdjointTuple) -> usize {
    let n = t.dim();
    let id = identity(n);
    let blocks: Vec<ComplexMatrix> = t
        .matrices()
        .iter()
        .map(|m| kron(&id, m) - kron(&m.transpose(), &id))
        .collect();
    let mut stacked = ComplexMatrix::zeros(n * n * blocks.len(), n * n);
    for (k, b) in blocks.iter().enumerate() {
        stacked.view_mut((k * n * n, 0), (n * n, n * n)).copy_from(b);
    }
    let sv = stacked.singular_values();
    let cutoff = 1e-8 * sv.max();
    sv.iter().filter(|&&s| s <= cutoff).count()
}

#[test]
fn criterion_1_example_build() {
    let start = Instant::now();
    let ex = example();
    let elapsed = start.elapsed();

    // closed form at t = pi/6: v0 = (sqrt(3)/2, 1/2)
    let (c, s) = (3f64.sqrt() / 2.0, 0.5);
    let alpha1 = -(1.0 * c * c - 0.5 * s * s);
    let alpha2 = -(2.0 * 0.5 * c * s);
    let x = ex.model.truncate(2).unwrap();
    let v = &ex.witness.vector;
    let quad = |m: &ComplexMatrix| (v.adjoint() * m * v)[(0, 0)].norm();
    let residual = x.matrices().iter().map(quad).fold(0.0, f64::max);

    let pass = (ex.alpha1 + 0.625).abs() <= 1e-15
        && (alpha1 + 0.625).abs() <= 1e-15
        && (ex.alpha2 + 3f64.sqrt() / 4.0).abs() <= 1e-15
        && (ex.alpha2 - alpha2).abs() <= 1e-15
        && (ex.t - PI / 6.0).abs() <= 1e-15
        && ex.scan.iter().filter(|s| s.accepted).count() == 1
        && ex.witness.d == 1
        && ex.witness.residual <= 1e-12
        && residual <= 1e-12;
    let detail = format!(
        "alpha1 = {:.17}, alpha2 = {:.17}, t/pi = {:.6}, witness residual {:.2e}",
        ex.alpha1,
        ex.alpha2,
        ex.t / PI,
        residual
    );
    report(1, pass, elapsed, Duration::from_secs(1), &detail);
}

#[test]
fn criterion_2_irreducibility_ladder() {
    let model = example().model;
    let start = Instant::now();
    let mut dims = Vec::new();
    for l in 2..=12 {
        let x = model.truncate(l).unwrap();
        let lib = commutant_with(&x, &CommutantOptions::default()).unwrap().commutant_dim;
        dims.push((l, lib, commutant_dim_oracle(&x)));
    }
    let elapsed = start.elapsed();
    let pass = dims.iter().all(|&(_, a, b)| a == 1 && b == 1);
    let detail = format!("(level, library, oracle) = {dims:?}");
    report(2, pass, elapsed, Duration::from_secs(5), &detail);
}

#[test]
fn criterion_3_tensor_commutant_law() {
    let model = example().model;
    let tol = Tolerances::default();
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut cases = 0;
    for l in 2..=8 {
        let x = model.truncate(l).unwrap();
        for m in 1..=3 {
            cases += 1;
            let amp = x.amplify(m);
            let rep = commutant_with(
                &amp,
                &CommutantOptions {
                    rank_tol: tol.rank,
                    ..CommutantOptions::default()
                },
            )
            .unwrap();
            let oracle = commutant_dim_oracle(&amp);
            if rep.commutant_dim != m * m || oracle != m * m || rep.minimal_block_dims != vec![l; m] {
                failures.push((l, m, rep.commutant_dim, oracle, rep.minimal_block_dims));
            }
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("{cases} cases, failures {failures:?}");
    report(3, failures.is_empty(), elapsed, Duration::from_secs(30), &detail);
}

#[test]
fn criterion_4_isometry_lift() {
    let ex = example();
    let tol = Tolerances::default();
    let combos: Vec<(usize, usize, usize)> = (1..=3)
        .flat_map(|n| (1..=2).flat_map(move |m| (3..=6).map(move |l| (n, m, l))))
        .collect();
    let start = Instant::now();
    let mut worst_iso = 0.0f64;
    let mut worst_eq = 0.0f64;
    let mut errors = 0;
    for seed in 0..200u64 {
        let (n, m, l) = combos[seed as usize % combos.len()];
        let g = gaussian_matrix(m * l, n, &mut rng(seed));
        let shrink = (1 + seed % 100) as f64 / 100.0;
        let w = &g * real(shrink / op_norm(&g));
        match lift_contraction_to_isometry(&ex.model, l, &w, &ex.witness, &tol) {
            Ok(r) => {
                worst_iso = worst_iso.max(r.isometry_residual);
                worst_eq = worst_eq.max(r.equality_residual);
            }
            Err(_) => errors += 1,
        }
    }
    let elapsed = start.elapsed();
    let pass = errors == 0 && worst_iso <= 1e-10 && worst_eq <= 1e-9;
    let detail = format!(
        "200 lifts, {errors} errors, max isometry residual {worst_iso:.2e}, max equality residual {worst_eq:.2e}"
    );
    report(4, pass, elapsed, Duration::from_secs(10), &detail);
}

/// `max_i |V*(I_m (x) (X^L - P_l X^L P_l))V|` computed from scratch.
fn sweep_error_oracle(x_top: &SelfAdjointTuple, v: &ComplexMatrix, l: usize) -> f64 {
    let top = x_top.dim();
    let m = v.nrows() / top;
    x_top
        .matrices()
        .iter()
        .map(|xi| {
            let tail = ComplexMatrix::from_fn(
                top,
                top,
                |r, c| if r < l && c < l { C64::new(0.0, 0.0) } else { xi[(r, c)] },
            );
            op_norm(&(v.adjoint() * kron(&identity(m), &tail) * v))
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_5_truncation_convergence() {
    let model = example().model;
    let tol = Tolerances::default();
    let levels: Vec<usize> = (2..=12).collect();
    let seeds: Vec<u64> = (1..=20).collect();
    let (n, m) = (2, 2);
    let start = Instant::now();
    let rep = converge_experiment(&model, n, m, &levels, &seeds, &tol, Exec::Parallel).unwrap();
    let elapsed = start.elapsed();

    let x_top = model.truncate(12).unwrap();
    let mut oracle_gap = 0.0f64;
    let mut bound_gap = 0.0f64;
    for row in &rep.rows {
        let v = random_isometry(n, m * 12, row.seed).unwrap();
        for r in &row.sweep.rows {
            oracle_gap = oracle_gap.max((sweep_error_oracle(&x_top, &v, r.level) - r.error).abs());
            // tails of lambda_i = (-1/2)^(i-1) and w_i = 2^-i
            let closed = f64::max(0.5f64.powi(r.level as i32), 2.0 * 0.5f64.powi(r.level as i32));
            bound_gap = bound_gap.max((closed - r.bound).abs());
        }
    }
    let s = &rep.summary;
    let pass = s.within_bound == s.rows && s.monotone == s.rows && oracle_gap <= 1e-12 && bound_gap <= 1e-15;
    let detail = format!(
        "{} isometries (n={n}, m={m}, L=12): bound held in {}/{}, nonincreasing in {}/{}, oracle gap {oracle_gap:.1e}",
        s.rows, s.within_bound, s.rows, s.monotone, s.rows
    );
    report(5, pass, elapsed, Duration::from_secs(5), &detail);
}

#[test]
fn criterion_6_matrix_affine_identity() {
    let model = example().model;
    let tol = Tolerances::default();
    let seeds: Vec<u64> = (1..=100).collect();
    let start = Instant::now();
    let rep = affine_experiment(&model, &AffineOptions::default(), &seeds, &tol, Exec::Parallel).unwrap();
    let elapsed = start.elapsed();

    // direct check of one combination: sqrt(a) Y (+) sqrt(1-a) Z
    let y = hull_point(&model, 3, 1, random_isometry(3, 3, 5).unwrap(), &tol)
        .unwrap()
        .y;
    let z = model.truncate(3).unwrap().amplify(2);
    let zc = nchull::linalg::compress(&z, &random_isometry(3, 6, 6).unwrap()).unwrap();
    let a: f64 = 0.25;
    let combo = SelfAdjointTuple::symmetrized(
        y.matrices()
            .iter()
            .zip(zc.matrices())
            .map(|(p, q)| p * real(a) + q * real(1.0 - a))
            .collect(),
    )
    .unwrap();
    let p = LinearPencil::random_symmetric(2, 2, 1.0, false, 77);
    let direct = eval_pencil(&p, &combo).unwrap()
        - (eval_pencil(&p, &y).unwrap() * real(a) + eval_pencil(&p, &zc).unwrap() * real(1.0 - a));
    let direct = op_norm(&direct);

    let s = &rep.summary;
    let pass = s.rows == 100 && s.max_residual <= 1e-10 && s.control_detected >= 95 && direct <= 1e-12;
    let detail = format!(
        "100 pencils x 20 partitions: max residual {:.2e}; non-affine control above 0.1 in {}/100 seeds",
        s.max_residual, s.control_detected
    );
    report(6, pass, elapsed, Duration::from_secs(10), &detail);
}

#[test]
fn criterion_7_pencil_reconstruction() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut largest = 0.0f64;
    for seed in 0..100u64 {
        let g = 1 + (seed % 3) as usize;
        let d = 1 + (seed % 4) as usize;
        let p = random_bounded(g, d, 10.0, seed);
        largest = std::iter::once(p.a0())
            .chain(p.coefficients())
            .map(op_norm)
            .fold(largest, f64::max);
        let rebuilt = reconstruct_pencil_from_affine(&sample_at_unit_points(&p, g).unwrap()).unwrap();
        worst = worst.max(rebuilt.coefficient_distance(&p));
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-9 && largest <= 10.0 + 1e-12;
    let detail = format!("100 pencils, largest |A_i| {largest:.3}, max coefficient error {worst:.2e}");
    report(7, pass, elapsed, Duration::from_secs(5), &detail);
}

#[test]
fn criterion_8_ucp_decomposition() {
    let model = example().model;
    let tol = Tolerances::default();
    let levels: Vec<usize> = (4..=12).collect();
    let seeds: Vec<u64> = (1..=100).collect();
    let start = Instant::now();
    let rep = ucp_experiment(&model, &levels, 3, &seeds, &tol, Exec::Parallel).unwrap();
    let elapsed = start.elapsed();
    let distinct: std::collections::BTreeSet<_> = rep.rows.iter().map(|r| (r.d, r.n, r.top_level)).collect();
    let pass = rep.summary.rows == 100 && rep.summary.max_residual <= 1e-10;
    let detail = format!(
        "100 instances ({} distinct (d, n, L)), max residual {:.2e}",
        distinct.len(),
        rep.summary.max_residual
    );
    report(8, pass, elapsed, Duration::from_secs(5), &detail);
}

#[test]
fn criterion_9_escape_experiment() {
    let model: CompactTupleModel = example().model;
    let tol = Tolerances::default();
    let levels = [3, 5, 7, 9, 11];
    let seeds = [1, 2, 3, 4, 5];
    let start = Instant::now();
    let rep = escape_experiment(&model, 2, &levels, 2, &seeds, &tol, Exec::Parallel).unwrap();
    let mut self_refuted = Vec::new();
    for l in 2..=8 {
        let x = model.truncate(l).unwrap();
        let p = hull_point(&model, l, 1, identity(l), &tol).unwrap();
        let cert = refute_absolute_extreme(&p, &x, &tol).unwrap();
        if cert.verdict != Verdict::Inconclusive {
            self_refuted.push(l);
        }
    }
    let elapsed = start.elapsed();

    let verified = rep
        .rows
        .iter()
        .filter(|r| verify_certificate(&r.certificate, Some(&model), &tol).ok() == Some(r.verdict))
        .count();
    let refuted = rep
        .rows
        .iter()
        .filter(|r| r.verdict == Verdict::NotAbsoluteExtreme)
        .count();
    let dims_ok = rep.rows.iter().all(|r| r.min_reducing_dim == Some(r.level));
    let pass = rep.rows.len() == 25 && refuted == 25 && dims_ok && verified == 25 && self_refuted.is_empty();
    let dims: Vec<_> = rep
        .rows
        .iter()
        .step_by(5)
        .map(|r| r.min_reducing_dim.unwrap_or(0))
        .collect();
    let detail = format!(
        "{refuted}/25 refuted, min reducing dims {dims:?}, {verified}/25 certificates re-verified, self-point refuted at {self_refuted:?}"
    );
    report(9, pass, elapsed, Duration::from_secs(60), &detail);
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.jsonl");
    let status = Command::new(env!("CARGO_BIN_EXE_nchull"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    (status.code().unwrap_or(-1), std::fs::read(&out).unwrap_or_default())
}

#[test]
fn criterion_10_determinism() {
    let runs: [&[&str]; 6] = [
        &["build-example"],
        &["escape", "--no-timestamp", "--levels", "3..7:2", "--seeds", "1,2"],
        &["converge", "--no-timestamp", "--seeds", "1..4"],
        &["affine", "--no-timestamp", "--seeds", "1..10"],
        &["ucp", "--no-timestamp", "--seeds", "1..20"],
        &[
            "escape",
            "--no-timestamp",
            "--levels",
            "3..5",
            "--seeds",
            "4",
            "--sequential",
        ],
    ];
    let start = Instant::now();
    let mut mismatched = Vec::new();
    for args in runs {
        let (c1, a) = run_cli(args);
        let (c2, b) = run_cli(args);
        if a.is_empty() || a != b || c1 != c2 {
            mismatched.push(args.join(" "));
        }
    }
    // parallel and sequential execution agree byte for byte
    let (_, par) = run_cli(&["escape", "--no-timestamp", "--levels", "3..5", "--seeds", "4"]);
    let (_, seq) = run_cli(runs[5]);
    if par != seq {
        mismatched.push("escape parallel vs sequential".into());
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "{} command configurations run twice, mismatches {mismatched:?}",
        runs.len()
    );
    report(10, mismatched.is_empty(), elapsed, Duration::from_secs(60), &detail);
}
