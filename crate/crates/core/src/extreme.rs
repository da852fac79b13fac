//! Dilations of hull points and certificates that a sampled point is not
//! absolute extreme.
//!
//! A point `Y = V* (I_m (x) X^l) V` dilates to `U* (I_m (x) X^l) U` with
//! `U = [V | V_perp]`. When `X^l` is irreducible, every reducing subspace of
//! `I_m (x) X^l` has dimension a multiple of `l`, so a point whose dimension
//! is not a multiple of `l` cannot split off as a direct summand of the
//! dilation. The certificate records every fact used, together with the
//! data needed to recompute it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hull::{sample_hull_point, HullPoint};
use crate::json;
use crate::linalg::{
    commutant_with, complete_to_unitary, compress, equivalence_probe, identity, isometry_residual, max_abs, op_norm,
    CommutantOptions, CommutantReport, ComplexMatrix, SelfAdjointTuple, C64, DEFAULT_PROBE_TRIALS,
};
use crate::model::{check_distinct_magnitudes, CompactTupleModel};
use crate::tol::Tolerances;

fn commutant_options(tol: &Tolerances) -> CommutantOptions {
    CommutantOptions {
        rank_tol: tol.rank,
        cluster_gap: tol.cluster,
        ..CommutantOptions::default()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DilationCertificate {
    pub point: HullPoint,
    pub dilation: SelfAdjointTuple,
    #[serde(rename = "U", with = "json::matrix")]
    pub u: ComplexMatrix,
    /// Distance between the leading `n x n` corner of the dilation and `Y`.
    pub compression_residual: f64,
    /// `max_i |U D_i U* - (I_m (x) X^l)_i|`.
    pub equivalence_residual: f64,
    pub equivalence_to_ambient: bool,
}

pub fn canonical_dilation(
    point: &HullPoint,
    truncation: &SelfAdjointTuple,
    tol: &Tolerances,
) -> Result<DilationCertificate> {
    let ambient = truncation.amplify(point.multiplicity);
    if point.v.nrows() != ambient.dim() {
        return Err(Error::DimensionMismatch(format!(
            "V has {} rows but I_{} (x) X^{} has dimension {}",
            point.v.nrows(),
            point.multiplicity,
            point.level,
            ambient.dim()
        )));
    }
    let u = complete_to_unitary(&point.v, tol.iso)?;
    let dilation = compress(&ambient, &u)?;
    let compression_residual = dilation.corner(point.dim()).distance(&point.y);
    if compression_residual > tol.dilation {
        return Err(Error::AssertionFailed(format!(
            "dilation corner differs from the point by {compression_residual:e}"
        )));
    }
    let equivalence_residual = dilation_equivalence_residual(&u, &dilation, &ambient);
    Ok(DilationCertificate {
        point: point.clone(),
        dilation,
        u,
        compression_residual,
        equivalence_residual,
        equivalence_to_ambient: equivalence_residual <= tol.dilation,
    })
}

fn dilation_equivalence_residual(u: &ComplexMatrix, dilation: &SelfAdjointTuple, ambient: &SelfAdjointTuple) -> f64 {
    dilation
        .matrices()
        .iter()
        .zip(ambient.matrices())
        .map(|(d, a)| op_norm(&(u * d * u.adjoint() - a)))
        .fold(0.0, f64::max)
}

/// Dimensions of the minimal reducing subspaces of `t`, ascending.
pub fn reducing_dimensions(t: &SelfAdjointTuple, tol: &Tolerances) -> Result<Vec<usize>> {
    Ok(commutant_with(t, &commutant_options(tol))?.minimal_block_dims)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotAbsoluteExtreme,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::NotAbsoluteExtreme => "not_absolute_extreme",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// One fact used by the refutation, in pipeline order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reason {
    /// Commutant of `X^l`; trivial means irreducible.
    Irreducibility {
        commutant: CommutantReport,
    },
    /// `U` completes `V`; the dilation `U* (I_m (x) X^l) U` has `Y` as corner.
    Dilation {
        #[serde(rename = "U", with = "json::matrix")]
        u: ComplexMatrix,
        compression_residual: f64,
    },
    /// Commutant of `I_m (x) X^l` and whether every minimal block has size `l`.
    AmbientCommutant {
        commutant: CommutantReport,
        blocks_equal_level: bool,
    },
    Divisibility {
        n: usize,
        level: usize,
        remainder: usize,
    },
    /// `max_i |(I - V V*) T_i V|` for `T = I_m (x) X^l`; zero iff the range of
    /// `V` reduces `T`.
    EmbeddedSubspace {
        leakage: f64,
        reducing: bool,
    },
    /// One-sided probe of `Y ~ I_{n/l} (x) X^l`.
    EquivalenceProbe {
        copies: usize,
        trials: usize,
        tol: f64,
        equivalent: bool,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefutationCertificate {
    pub point: HullPoint,
    /// `X^l`, so the certificate can be checked without the model.
    pub truncation: SelfAdjointTuple,
    pub verdict: Verdict,
    pub reasons: Vec<Reason>,
    pub note: String,
}

impl RefutationCertificate {
    /// Smallest minimal reducing subspace of `I_m (x) X^l`, if computed.
    pub fn min_reducing_dim(&self) -> Option<usize> {
        self.reasons.iter().find_map(|r| match r {
            Reason::AmbientCommutant { commutant, .. } => commutant.minimal_block_dims.first().copied(),
            _ => None,
        })
    }
}

fn leakage(ambient: &SelfAdjointTuple, v: &ComplexMatrix) -> f64 {
    let proj = v * v.adjoint();
    let complement = identity(proj.nrows()) - proj;
    ambient
        .matrices()
        .iter()
        .map(|t| op_norm(&(&complement * t * v)))
        .fold(0.0, f64::max)
}

/// Decides the verdict from the recorded reasons alone.
fn decide(reasons: &[Reason], n: usize, level: usize) -> (Verdict, String) {
    let mut irreducible = false;
    let mut blocks_ok = false;
    let mut reducing = None;
    let mut probe = None;
    for r in reasons {
        match r {
            Reason::Irreducibility { commutant } => irreducible = commutant.is_trivial(),
            Reason::AmbientCommutant { blocks_equal_level, .. } => blocks_ok = *blocks_equal_level,
            Reason::EmbeddedSubspace { reducing: red, .. } => reducing = Some(*red),
            Reason::EquivalenceProbe { equivalent, .. } => probe = Some(*equivalent),
            Reason::Dilation { .. } | Reason::Divisibility { .. } => {}
        }
    }
    if !irreducible {
        return (Verdict::Inconclusive, format!("X^{level} is reducible"));
    }
    if !blocks_ok {
        return (
            Verdict::Inconclusive,
            format!("minimal reducing subspaces of the ambient tuple are not all of dimension {level}"),
        );
    }
    if !n.is_multiple_of(level) {
        if reducing == Some(true) {
            return (
                Verdict::Inconclusive,
                "range of V reduces the ambient tuple despite n mod l != 0".into(),
            );
        }
        return (
            Verdict::NotAbsoluteExtreme,
            format!("n = {n} is not a multiple of the minimal reducing dimension {level}"),
        );
    }
    match probe {
        Some(false) => (
            Verdict::NotAbsoluteExtreme,
            format!("Y is not unitarily equivalent to I_{} (x) X^{level}", n / level),
        ),
        Some(true) => (
            Verdict::Inconclusive,
            format!("Y is indistinguishable from I_{} (x) X^{level} by the probe", n / level),
        ),
        None => (Verdict::Inconclusive, "equivalence probe missing".into()),
    }
}

/// Runs the refutation pipeline on a hull point of `X^l` (the truncation
/// must be the one the point was sampled from).
pub fn refute_absolute_extreme(
    point: &HullPoint,
    truncation: &SelfAdjointTuple,
    tol: &Tolerances,
) -> Result<RefutationCertificate> {
    let n = point.dim();
    let level = point.level;
    let m = point.multiplicity;
    if truncation.dim() != level {
        return Err(Error::DimensionMismatch(format!(
            "truncation has dimension {} but the point lives at level {level}",
            truncation.dim()
        )));
    }
    if n > m * level {
        return Err(Error::DimensionMismatch(format!("n = {n} exceeds m*l = {}", m * level)));
    }
    let opts = commutant_options(tol);
    let mut reasons = Vec::new();

    let own = commutant_with(truncation, &opts)?;
    let irreducible = own.is_trivial();
    reasons.push(Reason::Irreducibility { commutant: own });
    if irreducible {
        let dilation = canonical_dilation(point, truncation, tol)?;
        reasons.push(Reason::Dilation {
            u: dilation.u,
            compression_residual: dilation.compression_residual,
        });
        let ambient = truncation.amplify(m);
        let commutant = commutant_with(&ambient, &opts)?;
        let blocks_equal_level = commutant.minimal_block_dims.iter().all(|&b| b == level);
        reasons.push(Reason::AmbientCommutant {
            commutant,
            blocks_equal_level,
        });
        reasons.push(Reason::Divisibility {
            n,
            level,
            remainder: n % level,
        });
        let leak = leakage(&ambient, &point.v);
        reasons.push(Reason::EmbeddedSubspace {
            leakage: leak,
            reducing: leak <= tol.support,
        });
        if n.is_multiple_of(level) {
            let copies = n / level;
            let equivalent = equivalence_probe(&point.y, &truncation.amplify(copies), DEFAULT_PROBE_TRIALS, tol.probe);
            reasons.push(Reason::EquivalenceProbe {
                copies,
                trials: DEFAULT_PROBE_TRIALS,
                tol: tol.probe,
                equivalent,
            });
        }
    }
    let (verdict, note) = decide(&reasons, n, level);
    Ok(RefutationCertificate {
        point: point.clone(),
        truncation: truncation.clone(),
        verdict,
        reasons,
        note,
    })
}

fn verify_commutant(t: &SelfAdjointTuple, recorded: &CommutantReport, tol: &Tolerances, what: &str) -> Result<()> {
    let fail = |msg: String| Err(Error::AssertionFailed(format!("{what}: {msg}")));
    if recorded.tuple_dim != t.dim() || recorded.basis.len() != recorded.commutant_dim {
        return fail("recorded shape is inconsistent".into());
    }
    for (a, x) in recorded.basis.iter().enumerate() {
        if x.shape() != (t.dim(), t.dim()) {
            return fail("basis element has the wrong shape".into());
        }
        for m in t.matrices() {
            let c = (x * m - m * x).norm();
            if c > 1e-6 * (1.0 + m.norm()) {
                return fail(format!("basis element {a} fails to commute ({c:e})"));
            }
        }
        for (b, y) in recorded.basis.iter().enumerate() {
            let ip = (x.adjoint() * y).trace();
            let target = if a == b { 1.0 } else { 0.0 };
            if (ip - C64::new(target, 0.0)).norm() > 1e-8 {
                return fail("basis is not orthonormal".into());
            }
        }
    }
    let fresh = commutant_with(t, &commutant_options(tol))?;
    if fresh.commutant_dim != recorded.commutant_dim {
        return fail(format!(
            "recomputed dimension {} differs from recorded {}",
            fresh.commutant_dim, recorded.commutant_dim
        ));
    }
    if fresh.minimal_block_dims != recorded.minimal_block_dims {
        return fail("recomputed minimal blocks differ".into());
    }
    if recorded.minimal_block_dims.iter().sum::<usize>() != t.dim() {
        return fail("minimal blocks do not add up to the dimension".into());
    }
    Ok(())
}

/// Re-derives every reason of a certificate from its own data.
///
/// Returns the verdict on success. Passing a model additionally checks that
/// the stored truncation is the model's.
pub fn verify_certificate(
    cert: &RefutationCertificate,
    model: Option<&CompactTupleModel>,
    tol: &Tolerances,
) -> Result<Verdict> {
    let fail = |msg: String| Err(Error::AssertionFailed(msg));
    let point = &cert.point;
    let x = &cert.truncation;
    if let Some(model) = model {
        let fresh = model.truncate(point.level)?;
        if fresh.distance(x) > tol.herm {
            return fail("stored truncation differs from the model".into());
        }
    }
    if x.dim() != point.level {
        return fail("truncation dimension does not match the level".into());
    }
    let iso = isometry_residual(&point.v);
    if iso > tol.iso {
        return Err(Error::NotIsometry { residual: iso });
    }
    let ambient = x.amplify(point.multiplicity);
    let residual = compress(&ambient, &point.v)?.distance(&point.y);
    if residual > tol.hull_witness {
        return fail(format!("hull witness residual {residual:e}"));
    }

    for reason in &cert.reasons {
        match reason {
            Reason::Irreducibility { commutant } => verify_commutant(x, commutant, tol, "irreducibility")?,
            Reason::Dilation {
                u,
                compression_residual,
            } => {
                let k = point.dim();
                if u.nrows() != ambient.dim() || isometry_residual(u) > tol.iso {
                    return fail("dilation unitary is not unitary".into());
                }
                if max_abs(&(u.columns(0, k) - &point.v)) != 0.0 {
                    return fail("dilation unitary does not extend V".into());
                }
                let r = compress(&ambient, u)?.corner(k).distance(&point.y);
                if r > tol.dilation || (r - compression_residual).abs() > tol.dilation {
                    return fail(format!("dilation corner residual {r:e}"));
                }
            }
            Reason::AmbientCommutant {
                commutant,
                blocks_equal_level,
            } => {
                verify_commutant(&ambient, commutant, tol, "ambient commutant")?;
                if *blocks_equal_level != commutant.minimal_block_dims.iter().all(|&b| b == point.level) {
                    return fail("block-size flag is inconsistent".into());
                }
            }
            Reason::Divisibility { n, level, remainder } => {
                if *n != point.dim() || *level != point.level || *remainder != n % level {
                    return fail("divisibility record is wrong".into());
                }
            }
            Reason::EmbeddedSubspace {
                leakage: leak,
                reducing,
            } => {
                let fresh = leakage(&ambient, &point.v);
                if (fresh - leak).abs() > 1e-9 || *reducing != (fresh <= tol.support) {
                    return fail(format!("leakage recomputes to {fresh:e}"));
                }
            }
            Reason::EquivalenceProbe {
                copies,
                trials,
                tol: probe_tol,
                equivalent,
            } => {
                if copies * point.level != point.dim() {
                    return fail("probe target has the wrong dimension".into());
                }
                let fresh = equivalence_probe(&point.y, &x.amplify(*copies), *trials, *probe_tol);
                if fresh != *equivalent {
                    return fail("equivalence probe recomputes differently".into());
                }
            }
        }
    }
    let (verdict, _) = decide(&cert.reasons, point.dim(), point.level);
    if verdict != cert.verdict {
        return fail(format!(
            "recorded verdict {} but the reasons give {}",
            cert.verdict.name(),
            verdict.name()
        ));
    }
    if verdict == Verdict::NotAbsoluteExtreme && !cert.reasons.iter().any(|r| matches!(r, Reason::Dilation { .. })) {
        return fail("refutation without a dilation".into());
    }
    Ok(verdict)
}

/// Coordinates `J` with `span(basis) = (+)_{j in J} E_j`, when the span is
/// invariant under the first coordinate of `d`.
///
/// The first coordinate must be diagonal with entries of pairwise distinct
/// absolute values. Indices are 0-based and ascending.
pub fn diag_invariant_support(d: &SelfAdjointTuple, basis: &[DVector<C64>], tol: &Tolerances) -> Result<Vec<usize>> {
    let x = d.coord(0);
    let n = x.nrows();
    let off_diag = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| x[(i, j)].norm())
        .fold(0.0, f64::max);
    if off_diag > tol.herm {
        return Err(Error::InvalidArgument(format!(
            "first coordinate is not diagonal (off-diagonal {off_diag:e})"
        )));
    }
    let diag: Vec<f64> = (0..n).map(|i| x[(i, i)].re).collect();
    check_distinct_magnitudes(&diag, tol.dist)?;
    if basis.is_empty() {
        return Err(Error::InvalidArgument("empty basis".into()));
    }
    if basis.iter().any(|b| b.len() != n) {
        return Err(Error::DimensionMismatch(format!("basis vectors must have length {n}")));
    }
    let b = ComplexMatrix::from_columns(basis);
    let iso = isometry_residual(&b);
    if iso > tol.iso {
        return Err(Error::NotIsometry { residual: iso });
    }
    let proj = &b * b.adjoint();
    let leak = op_norm(&((identity(n) - &proj) * x * &b));
    if leak > tol.support {
        return Err(Error::NotInvariant { residual: leak });
    }
    let support: Vec<usize> = (0..n)
        .filter(|&i| (0..b.ncols()).any(|k| b[(i, k)].norm() > tol.support))
        .collect();
    let mut coord = ComplexMatrix::zeros(n, n);
    for &i in &support {
        coord[(i, i)] = C64::new(1.0, 0.0);
    }
    let mismatch = op_norm(&(proj - coord));
    if mismatch > tol.support {
        return Err(Error::AssertionFailed(format!(
            "invariant span is not a coordinate subspace (mismatch {mismatch:e})"
        )));
    }
    Ok(support)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeRow {
    pub level: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub verdict: Verdict,
    pub min_reducing_dim: Option<usize>,
    pub certificate: RefutationCertificate,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EscapeSummary {
    pub rows: usize,
    pub refuted: usize,
    pub inconclusive: usize,
    /// Inconclusive rows with `n mod l != 0` and `X^l` irreducible.
    pub breaches: Vec<String>,
    pub contract_holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeReport {
    pub rows: Vec<EscapeRow>,
    pub summary: EscapeSummary,
}

/// Samples an `n`-dimensional hull point of `I_m (x) X^l` for every level and
/// seed and tries to refute it. Rows come back sorted by `(level, seed)`.
pub fn escape_experiment(
    model: &CompactTupleModel,
    n: usize,
    levels: &[usize],
    m: usize,
    seeds: &[u64],
    tol: &Tolerances,
    exec: Exec,
) -> Result<EscapeReport> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("n and m must be positive".into()));
    }
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    if let Some(&l) = levels.iter().find(|&&l| n > m * l) {
        return Err(Error::InvalidArgument(format!(
            "n = {n} exceeds m*l = {} at level {l}",
            m * l
        )));
    }
    let truncations = levels.iter().map(|&l| model.truncate(l)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..levels.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let mut rows = exec.try_map(jobs, |(i, seed)| -> Result<EscapeRow> {
        let level = levels[i];
        let point = sample_hull_point(model, level, m, n, seed, tol)?;
        let certificate = refute_absolute_extreme(&point, &truncations[i], tol)?;
        Ok(EscapeRow {
            level,
            seed,
            n,
            m,
            verdict: certificate.verdict,
            min_reducing_dim: certificate.min_reducing_dim(),
            certificate,
        })
    })?;
    rows.sort_by_key(|r| (r.level, r.seed));
    let summary = summarize(&rows);
    Ok(EscapeReport { rows, summary })
}

fn summarize(rows: &[EscapeRow]) -> EscapeSummary {
    let refuted = rows.iter().filter(|r| r.verdict == Verdict::NotAbsoluteExtreme).count();
    let mut breaches = Vec::new();
    for r in rows {
        let irreducible = r.certificate.reasons.iter().any(|x| match x {
            Reason::Irreducibility { commutant } => commutant.is_trivial(),
            _ => false,
        });
        if irreducible && r.n % r.level != 0 && r.verdict != Verdict::NotAbsoluteExtreme {
            breaches.push(format!("level {} seed {}: {}", r.level, r.seed, r.certificate.note));
        }
        if irreducible && r.min_reducing_dim != Some(r.level) {
            breaches.push(format!(
                "level {} seed {}: min reducing dimension {:?}",
                r.level, r.seed, r.min_reducing_dim
            ));
        }
    }
    let mut per_level: Vec<(usize, Option<usize>)> = rows.iter().map(|r| (r.level, r.min_reducing_dim)).collect();
    per_level.dedup();
    for pair in per_level.windows(2) {
        if pair[0].0 != pair[1].0 && !matches!((pair[0].1, pair[1].1), (Some(a), Some(b)) if a < b) {
            breaches.push(format!(
                "min reducing dimension not increasing from level {} to {}",
                pair[0].0, pair[1].0
            ));
        }
    }
    EscapeSummary {
        rows: rows.len(),
        refuted,
        inconclusive: rows.len() - refuted,
        contract_holds: breaches.is_empty(),
        breaches,
    }
}
