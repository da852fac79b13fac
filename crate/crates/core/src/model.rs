//! Finite stand-ins for compact self-adjoint tuples.
//!
//! A [`CompactTupleModel`] describes an operator tuple on l^2 by closed-form
//! data (diagonal sequences, weighted shifts, corner shifts) and produces its
//! leading l x l truncations together with an analytic bound on the norm of
//! everything it leaves out.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{gaussian_matrix, kron, real, ComplexMatrix, SelfAdjointTuple, C64};
use crate::tol::Tolerances;

/// Geometric sequence `a_i = first * ratio^(i-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometric {
    pub first: f64,
    pub ratio: f64,
}

/// A real sequence indexed from 1. Explicit sequences are treated as
/// finitely supported: entries past the end are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sequence {
    Explicit(Vec<f64>),
    Geometric(Geometric),
}

impl Sequence {
    pub fn geometric(first: f64, ratio: f64) -> Self {
        Sequence::Geometric(Geometric { first, ratio })
    }

    /// The i-th term, 1-based.
    pub fn term(&self, i: usize) -> f64 {
        assert!(i >= 1, "sequences are 1-based");
        match self {
            Sequence::Explicit(v) => v.get(i - 1).copied().unwrap_or(0.0),
            Sequence::Geometric(g) => g.first * g.ratio.powi(i as i32 - 1),
        }
    }

    /// `sup_{k >= i} |a_k|`.
    pub fn sup_from(&self, i: usize) -> f64 {
        match self {
            Sequence::Explicit(v) => v.iter().skip(i.saturating_sub(1)).map(|x| x.abs()).fold(0.0, f64::max),
            Sequence::Geometric(g) => {
                self.term(i.max(1))
                    .abs()
                    .max(if g.ratio.abs() > 1.0 { f64::INFINITY } else { 0.0 })
            }
        }
    }

    fn validate(&self, name: &str, needed: usize) -> Result<()> {
        match self {
            Sequence::Explicit(v) => {
                if v.len() < needed {
                    return Err(Error::InvalidArgument(format!(
                        "`{name}` has {} entries, at least {needed} are needed",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite);
                }
            }
            Sequence::Geometric(g) => {
                if !(g.first.is_finite() && g.ratio.is_finite()) {
                    return Err(Error::NonFinite);
                }
                if g.ratio.abs() >= 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "`{name}` ratio {} does not give a compact operator",
                        g.ratio
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// g = 1: `diag(lambda)`.
    Diagonal,
    /// g = 1: `S_w + S_w*` for the weighted forward shift `S_w e_i = w_i e_{i+1}`.
    WeightedShiftSym,
    /// g = 2: `(diag(lambda) + a_1 P_2, S_w + S_w* + a_2 P_2)` where `P_2`
    /// projects onto the first two coordinates.
    ShiftedSum,
    /// Explicit Hermitian matrices of size `max_level`; no tail bound.
    CustomSequence,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Diagonal => "diagonal",
            ModelKind::WeightedShiftSym => "weighted_shift_sym",
            ModelKind::ShiftedSum => "shifted_sum",
            ModelKind::CustomSequence => "custom_sequence",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Coordinate {
    Diagonal(Sequence),
    Shift(Sequence),
    Explicit(ComplexMatrix),
}

/// Certified finite description of a compact self-adjoint g-tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelJson", try_from = "ModelJson")]
pub struct CompactTupleModel {
    kind: ModelKind,
    lambda: Option<Sequence>,
    w: Option<Sequence>,
    alpha: Vec<f64>,
    max_level: usize,
    coords: Vec<Coordinate>,
    witness: Option<FiniteInteriorWitness>,
}

impl CompactTupleModel {
    pub fn diagonal(lambda: Sequence, max_level: usize) -> Result<Self> {
        Self::assemble(ModelKind::Diagonal, Some(lambda), None, vec![], max_level, None)
    }

    pub fn weighted_shift_sym(w: Sequence, max_level: usize) -> Result<Self> {
        Self::assemble(ModelKind::WeightedShiftSym, None, Some(w), vec![], max_level, None)
    }

    pub fn shifted_sum(lambda: Sequence, w: Sequence, alpha: [f64; 2], max_level: usize) -> Result<Self> {
        Self::assemble(
            ModelKind::ShiftedSum,
            Some(lambda),
            Some(w),
            alpha.to_vec(),
            max_level,
            None,
        )
    }

    /// Explicit matrices; `max_level` is their common dimension.
    pub fn custom(tuple: SelfAdjointTuple) -> Result<Self> {
        let max_level = tuple.dim();
        Self::assemble(ModelKind::CustomSequence, None, None, vec![], max_level, Some(tuple))
    }

    fn assemble(
        kind: ModelKind,
        lambda: Option<Sequence>,
        w: Option<Sequence>,
        alpha: Vec<f64>,
        max_level: usize,
        custom: Option<SelfAdjointTuple>,
    ) -> Result<Self> {
        if max_level == 0 {
            return Err(Error::InvalidArgument("max_level must be at least 1".into()));
        }
        let need = |s: &Option<Sequence>, name: &str| -> Result<Sequence> {
            let s = s
                .clone()
                .ok_or_else(|| Error::InvalidArgument(format!("model kind requires `{name}`")))?;
            s.validate(name, max_level)?;
            Ok(s)
        };
        let coords = match kind {
            ModelKind::Diagonal => vec![Coordinate::Diagonal(need(&lambda, "lambda")?)],
            ModelKind::WeightedShiftSym => vec![Coordinate::Shift(need(&w, "w")?)],
            ModelKind::ShiftedSum => vec![
                Coordinate::Diagonal(need(&lambda, "lambda")?),
                Coordinate::Shift(need(&w, "w")?),
            ],
            ModelKind::CustomSequence => {
                let t =
                    custom.ok_or_else(|| Error::InvalidArgument("custom_sequence models require `matrices`".into()))?;
                if t.dim() != max_level {
                    return Err(Error::DimensionMismatch(format!(
                        "custom matrices have dimension {}, max_level is {max_level}",
                        t.dim()
                    )));
                }
                t.into_matrices().into_iter().map(Coordinate::Explicit).collect()
            }
        };
        let alpha = if alpha.is_empty() {
            vec![0.0; coords.len()]
        } else {
            alpha
        };
        if alpha.len() != coords.len() {
            return Err(Error::DimensionMismatch(format!(
                "alpha has {} entries for a {}-tuple",
                alpha.len(),
                coords.len()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite);
        }
        if kind == ModelKind::CustomSequence && alpha.iter().any(|&a| a != 0.0) {
            return Err(Error::InvalidArgument(
                "custom_sequence models take no alpha shift".into(),
            ));
        }
        Ok(Self {
            kind,
            lambda,
            w,
            alpha,
            max_level,
            coords,
            witness: None,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn g(&self) -> usize {
        self.coords.len()
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn lambda(&self) -> Option<&Sequence> {
        self.lambda.as_ref()
    }

    pub fn w(&self) -> Option<&Sequence> {
        self.w.as_ref()
    }

    /// The witness stored with the model, if it was built with one.
    pub fn witness(&self) -> Option<&FiniteInteriorWitness> {
        self.witness.as_ref()
    }

    pub fn with_witness(mut self, witness: FiniteInteriorWitness) -> Self {
        self.witness = Some(witness);
        self
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.max_level {
            return Err(Error::LevelOutOfRange {
                level,
                max_level: self.max_level,
            });
        }
        Ok(())
    }

    /// Leading `level x level` corner of every coordinate.
    pub fn truncate(&self, level: usize) -> Result<SelfAdjointTuple> {
        self.check_level(level)?;
        let l = level;
        let mats = self
            .coords
            .iter()
            .zip(&self.alpha)
            .map(|(c, &a)| {
                let mut m = match c {
                    Coordinate::Diagonal(s) => {
                        ComplexMatrix::from_diagonal(&DVector::from_fn(l, |i, _| real(s.term(i + 1))))
                    }
                    Coordinate::Shift(s) => {
                        let mut m = ComplexMatrix::zeros(l, l);
                        for r in 0..l.saturating_sub(1) {
                            m[(r, r + 1)] = real(s.term(r + 1));
                            m[(r + 1, r)] = real(s.term(r + 1));
                        }
                        m
                    }
                    Coordinate::Explicit(m) => m.view((0, 0), (l, l)).into_owned(),
                };
                for r in 0..l.min(2) {
                    m[(r, r)] += real(a);
                }
                m
            })
            .collect();
        SelfAdjointTuple::new(mats, 0.0)
    }

    /// Upper bound on `max_i |X_i - P_l X_i P_l|` for the untruncated tuple.
    ///
    /// Diagonal coordinates: `sup_{i > l} |lambda_i|`. Symmetrized shifts:
    /// `2 sup_{i >= l} |w_i|`. A corner shift that reaches past `P_l`
    /// (only when `l = 1`) adds `|alpha|`.
    pub fn tail_bound(&self, level: usize) -> Result<f64> {
        self.check_level(level)?;
        let mut worst = 0.0_f64;
        for (c, &a) in self.coords.iter().zip(&self.alpha) {
            let corner = if level < 2 { a.abs() } else { 0.0 };
            let b = match c {
                Coordinate::Diagonal(s) => s.sup_from(level + 1),
                Coordinate::Shift(s) => 2.0 * s.sup_from(level),
                Coordinate::Explicit(_) => return Err(Error::UnsupportedKind(self.kind.name())),
            };
            worst = worst.max(b + corner);
        }
        Ok(worst)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    kind: ModelKind,
    g: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<Sequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<Sequence>,
    #[serde(default)]
    alpha: Vec<f64>,
    max_level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrices: Option<SelfAdjointTuple>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<FiniteInteriorWitness>,
}

impl From<CompactTupleModel> for ModelJson {
    fn from(m: CompactTupleModel) -> Self {
        let matrices =
            (m.kind == ModelKind::CustomSequence).then(|| m.truncate(m.max_level).expect("max_level is in range"));
        Self {
            kind: m.kind,
            g: m.g(),
            lambda: m.lambda,
            w: m.w,
            alpha: m.alpha,
            max_level: m.max_level,
            matrices,
            witness: m.witness,
        }
    }
}

impl TryFrom<ModelJson> for CompactTupleModel {
    type Error = Error;

    fn try_from(raw: ModelJson) -> Result<Self> {
        let model = Self::assemble(raw.kind, raw.lambda, raw.w, raw.alpha, raw.max_level, raw.matrices)?;
        if model.g() != raw.g {
            return Err(Error::DimensionMismatch(format!(
                "model declares g={} but kind `{}` has g={}",
                raw.g,
                raw.kind.name(),
                model.g()
            )));
        }
        if let Some(w) = &raw.witness {
            if w.level > model.max_level || w.vector.len() != w.d * w.level {
                return Err(Error::DimensionMismatch("stored witness does not fit the model".into()));
            }
        }
        Ok(match raw.witness {
            Some(w) => model.with_witness(w),
            None => model,
        })
    }
}

/// Unit vector `v` with `v* (I_d (x) X^level) v = 0` in R^g, up to `residual`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteInteriorWitness {
    pub d: usize,
    pub level: usize,
    #[serde(with = "json::vector")]
    pub vector: DVector<C64>,
    /// `max_i |v* (I_d (x) X_i^level) v|`.
    pub residual: f64,
}

impl FiniteInteriorWitness {
    /// Re-embeds the vector for a larger truncation level: each of the `d`
    /// blocks is zero-padded from `self.level` to `level` entries.
    pub fn embed(&self, level: usize) -> Result<DVector<C64>> {
        if level < self.level {
            return Err(Error::InvalidArgument(format!(
                "cannot embed a level-{} witness at level {level}",
                self.level
            )));
        }
        let mut out = DVector::zeros(self.d * level);
        for b in 0..self.d {
            out.rows_mut(b * level, self.level)
                .copy_from(&self.vector.rows(b * self.level, self.level));
        }
        Ok(out)
    }

    /// Residual recomputed from the model at the witness' own level.
    pub fn recompute_residual(&self, model: &CompactTupleModel) -> Result<f64> {
        let x = model.truncate(self.level)?;
        Ok(quadratic_form_residual(&x.amplify(self.d), &self.vector))
    }

    /// Checks unit norm (1e-12) and that the stored residual matches a fresh
    /// evaluation and is within `tol`.
    pub fn verify(&self, model: &CompactTupleModel, tol: f64) -> Result<f64> {
        let norm_err = (self.vector.norm() - 1.0).abs();
        if norm_err > 1e-12 {
            return Err(Error::AssertionFailed(format!(
                "witness vector norm off by {norm_err:e}"
            )));
        }
        let fresh = self.recompute_residual(model)?;
        if fresh > tol || (fresh - self.residual).abs() > 1e-12 {
            return Err(Error::WitnessTooWeak { residual: fresh, tol });
        }
        Ok(fresh)
    }
}

/// `max_i |v* A_i v|`.
pub fn quadratic_form_residual(a: &SelfAdjointTuple, v: &DVector<C64>) -> f64 {
    a.matrices()
        .iter()
        .map(|m| v.dotc(&(m * v)).re.abs())
        .fold(0.0, f64::max)
}

/// Candidate angles `t = (p/q) pi/2`, `0 < p < q`, gcd(p, q) = 1, ordered by
/// denominator and then numerator (1/2, 1/3, 2/3, 1/4, 3/4, 1/5, ...).
pub fn scan_angles(steps: usize) -> Vec<f64> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let mut out = Vec::with_capacity(steps);
    let mut q = 2;
    while out.len() < steps {
        for p in 1..q {
            if out.len() == steps {
                break;
            }
            if gcd(p, q) == 1 {
                out.push(p as f64 / q as f64 * FRAC_PI_2);
            }
        }
        q += 1;
    }
    out
}

/// Checks the first `count` entries are at least `dist_tol` away from zero
/// and pairwise at least `dist_tol` apart in absolute value. Errors carry
/// 1-based indices.
pub fn check_distinct_magnitudes(values: &[f64], dist_tol: f64) -> Result<()> {
    for (i, &x) in values.iter().enumerate() {
        if x.abs() < dist_tol {
            return Err(Error::VanishingEntry { index: i + 1, value: x });
        }
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    for pair in order.windows(2) {
        let (a, b) = (values[pair[0]], values[pair[1]]);
        if b.abs() - a.abs() < dist_tol {
            let (i, j) = (pair[0].min(pair[1]) + 1, pair[0].max(pair[1]) + 1);
            return Err(Error::CollidingMagnitudes {
                i,
                j,
                a: values[i - 1],
                b: values[j - 1],
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct ExampleOptions {
    pub max_level: usize,
    pub scan_steps: usize,
    pub dist_tol: f64,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        Self {
            max_level: 16,
            scan_steps: 64,
            dist_tol: 1e-6,
        }
    }
}

/// Outcome of one scan angle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanStep {
    pub t: f64,
    pub alpha1: f64,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ShiftedExample {
    pub model: CompactTupleModel,
    pub alpha1: f64,
    pub alpha2: f64,
    pub t: f64,
    pub witness: FiniteInteriorWitness,
    pub scan: Vec<ScanStep>,
}

/// Builds `(diag(lambda) + a_1 P_2, S_w + S_w* + a_2 P_2)` with `0` in the
/// finite interior of its hull.
///
/// Scans real unit vectors `v0 = (cos t, sin t)` in the order of
/// [`scan_angles`] and takes the first `t` for which
/// `a_1 = -<diag(lambda_1, lambda_2) v0, v0>` leaves the shifted diagonal
/// nonzero with pairwise distinct magnitudes (checked up to `max_level`).
/// Then `a_2 = -<(S_w + S_w*)_{2x2} v0, v0>` and `v0` is a level-2, `d = 1`
/// witness.
pub fn build_shifted_example(lambda: Sequence, w: Sequence, opts: &ExampleOptions) -> Result<ShiftedExample> {
    lambda.validate("lambda", opts.max_level)?;
    w.validate("w", opts.max_level)?;
    if opts.max_level < 2 {
        return Err(Error::InvalidArgument("the example needs max_level >= 2".into()));
    }
    let lam: Vec<f64> = (1..=opts.max_level).map(|i| lambda.term(i)).collect();
    check_distinct_magnitudes(&lam, opts.dist_tol)?;
    if let Some(i) = (1..=opts.max_level).find(|&i| w.term(i) == 0.0) {
        return Err(Error::VanishingEntry { index: i, value: 0.0 });
    }

    let mut scan = Vec::new();
    for t in scan_angles(opts.scan_steps) {
        let (c, s) = (t.cos(), t.sin());
        let alpha1 = -(lam[0] * c * c + lam[1] * s * s);
        let mut shifted = lam.clone();
        shifted[0] += alpha1;
        shifted[1] += alpha1;
        match check_distinct_magnitudes(&shifted, opts.dist_tol) {
            Err(e) => scan.push(ScanStep {
                t,
                alpha1,
                accepted: false,
                reason: Some(e.to_string()),
            }),
            Ok(()) => {
                scan.push(ScanStep {
                    t,
                    alpha1,
                    accepted: true,
                    reason: None,
                });
                let alpha2 = -(2.0 * w.term(1) * c * s);
                let model = CompactTupleModel::shifted_sum(lambda, w, [alpha1, alpha2], opts.max_level)?;
                let vector = DVector::from_vec(vec![real(c), real(s)]);
                let residual = quadratic_form_residual(&model.truncate(2)?, &vector);
                let witness = FiniteInteriorWitness {
                    d: 1,
                    level: 2,
                    vector,
                    residual,
                };
                return Ok(ShiftedExample {
                    model: model.with_witness(witness.clone()),
                    alpha1,
                    alpha2,
                    t,
                    witness,
                    scan,
                });
            }
        }
    }
    Err(Error::NoAdmissibleShift { tried: opts.scan_steps })
}

/// The default example: `lambda_i = (-1/2)^(i-1)`, `w_i = 2^-i`.
pub fn default_example(opts: &ExampleOptions) -> Result<ShiftedExample> {
    build_shifted_example(Sequence::geometric(1.0, -0.5), Sequence::geometric(0.5, 0.5), opts)
}

const WITNESS_STARTS: usize = 24;
const NEWTON_STEPS: usize = 80;

/// Searches for a unit `v` in `C^{d level}` with `v*(I_d (x) X^level)v = 0`,
/// trying `d = 1, ..., d_max` in order.
///
/// Each attempt runs a minimum-norm Gauss-Newton iteration on the sphere
/// from seeded random starts (plus the model's stored witness when it fits).
/// A coordinate that is definite at this level rules out witnesses for
/// every `d`, and is reported immediately.
pub fn finite_interior_witness(
    model: &CompactTupleModel,
    d_max: usize,
    level: usize,
    tol: &Tolerances,
) -> Result<FiniteInteriorWitness> {
    let x = model.truncate(level)?;
    for (i, m) in x.matrices().iter().enumerate() {
        let eig = crate::linalg::hermitian_eigenvalues(m);
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        if lo > tol.witness || hi < -tol.witness {
            return Err(Error::NoWitness {
                d_max,
                best: lo.abs().min(hi.abs()),
                note: format!(": coordinate {} is definite at level {level}", i + 1),
            });
        }
    }

    let mut best = f64::INFINITY;
    for d in 1..=d_max {
        let amplified = x.amplify(d);
        let n = d * level;
        let mut starts = Vec::new();
        if let Some(w) = model.witness().filter(|w| w.d == d && w.level <= level) {
            starts.push(w.embed(level)?);
        }
        let mut r = ChaCha8Rng::seed_from_u64(0x3173_0000 + d as u64);
        for _ in 0..WITNESS_STARTS {
            let g = gaussian_matrix(n, 1, &mut r);
            starts.push(DVector::from_column_slice(g.as_slice()).normalize());
        }
        for start in starts {
            let (v, res) = newton_on_sphere(&amplified, start, tol.witness * 1e-4);
            best = best.min(res);
            if res <= tol.witness {
                return Ok(FiniteInteriorWitness {
                    d,
                    level,
                    vector: v,
                    residual: res,
                });
            }
        }
    }
    Err(Error::NoWitness {
        d_max,
        best,
        note: String::new(),
    })
}

fn newton_on_sphere(a: &SelfAdjointTuple, start: DVector<C64>, target: f64) -> (DVector<C64>, f64) {
    let n = a.dim();
    let g = a.g();
    let mut v = start.normalize();
    let mut res = quadratic_form_residual(a, &v);
    for _ in 0..NEWTON_STEPS {
        if res <= target {
            break;
        }
        // Rows: gradients of Re(v* A_i v) and of |v|^2 in real coordinates.
        let mut jac = DMatrix::<f64>::zeros(g + 1, 2 * n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(g + 1);
        for (i, m) in a.matrices().iter().enumerate() {
            let av = m * &v;
            rhs[i] = -v.dotc(&av).re;
            for k in 0..n {
                jac[(i, k)] = 2.0 * av[k].re;
                jac[(i, n + k)] = 2.0 * av[k].im;
            }
        }
        for k in 0..n {
            jac[(g, k)] = 2.0 * v[k].re;
            jac[(g, n + k)] = 2.0 * v[k].im;
        }
        let Ok(step) = jac.clone().svd(true, true).solve(&rhs, 1e-13) else {
            break;
        };
        let delta = DVector::from_fn(n, |k, _| C64::new(step[k], step[n + k]));

        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let cand = (&v + &delta * real(scale)).normalize();
            let cand_res = quadratic_form_residual(a, &cand);
            if cand_res < res {
                v = cand;
                res = cand_res;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (v, res)
}

/// Builds `I_d (x) X` style amplification of a single vector: `e_j (x) z`
/// stacked for `j = 1..n`, i.e. `I_n (x) z` as an `(n len(z)) x n` matrix.
pub fn vector_amplification(z: &DVector<C64>, n: usize) -> ComplexMatrix {
    let col = ComplexMatrix::from_column_slice(z.len(), 1, z.as_slice());
    kron(&ComplexMatrix::identity(n, n), &col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geometric_diag(max_level: usize) -> CompactTupleModel {
        CompactTupleModel::diagonal(Sequence::geometric(1.0, -0.5), max_level).unwrap()
    }

    #[test]
    fn truncation_examples() {
        let d = geometric_diag(8).truncate(2).unwrap();
        assert_eq!(d.coord(0)[(0, 0)], real(1.0));
        assert_eq!(d.coord(0)[(1, 1)], real(-0.5));

        let s = CompactTupleModel::weighted_shift_sym(Sequence::geometric(0.5, 0.5), 8)
            .unwrap()
            .truncate(3)
            .unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, 0.5, 0.0, 0.25, 0.0, 0.25, 0.0]);
        assert_eq!(s.coord(0), &expected.map(real));
    }

    #[test]
    fn truncations_are_nested() {
        let m = default_example(&ExampleOptions::default()).unwrap().model;
        let big = m.truncate(5).unwrap();
        assert_eq!(big.corner(3), m.truncate(3).unwrap());
    }

    #[test]
    fn tail_bound_examples() {
        assert_eq!(geometric_diag(8).tail_bound(4).unwrap(), 0.0625);
        let shift = CompactTupleModel::weighted_shift_sym(Sequence::geometric(0.5, 0.5), 8).unwrap();
        assert_eq!(shift.tail_bound(3).unwrap(), 0.25);
        assert_eq!(geometric_diag(8).tail_bound(8).unwrap(), 2f64.powi(-8));
        assert!(matches!(
            geometric_diag(8).truncate(9),
            Err(Error::LevelOutOfRange { .. })
        ));
        assert!(matches!(
            geometric_diag(8).tail_bound(0),
            Err(Error::LevelOutOfRange { .. })
        ));

        let custom = CompactTupleModel::custom(geometric_diag(4).truncate(4).unwrap()).unwrap();
        assert!(matches!(
            custom.tail_bound(2),
            Err(Error::UnsupportedKind("custom_sequence"))
        ));
    }

    #[test]
    fn explicit_sequences_are_finitely_supported() {
        let s = Sequence::Explicit(vec![3.0, -1.0, 0.5]);
        assert_eq!(s.term(2), -1.0);
        assert_eq!(s.term(9), 0.0);
        assert_eq!(s.sup_from(2), 1.0);
        assert_eq!(s.sup_from(4), 0.0);
        assert!(CompactTupleModel::diagonal(s, 4).is_err());
    }

    #[test]
    fn scan_order_is_by_denominator() {
        let t = scan_angles(5);
        let frac: Vec<f64> = t.iter().map(|x| x / FRAC_PI_2).collect();
        let expected = [1.0 / 2.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 4.0, 3.0 / 4.0];
        for (a, b) in frac.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn default_example_rejects_quarter_turn_and_picks_pi_over_six() {
        let ex = default_example(&ExampleOptions::default()).unwrap();
        assert!(!ex.scan[0].accepted);
        assert_abs_diff_eq!(ex.scan[0].t, std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(ex.t, std::f64::consts::FRAC_PI_6, epsilon = 1e-15);
        assert_abs_diff_eq!(ex.alpha1, -0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(ex.alpha2, -(3f64.sqrt()) / 4.0, epsilon = 1e-15);
        assert!(ex.witness.residual <= 1e-15);
    }

    #[test]
    fn colliding_magnitudes_are_named() {
        let lam = Sequence::Explicit(
            (1..=10)
                .map(|i| if i == 4 { -0.25 } else { 0.5f64.powi(i - 1) })
                .collect(),
        );
        let err = build_shifted_example(
            lam,
            Sequence::geometric(0.5, 0.5),
            &ExampleOptions {
                max_level: 10,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::CollidingMagnitudes { i: 3, j: 4, .. }), "{err}");
    }

    #[test]
    fn witness_embedding_pads_each_block() {
        let w = FiniteInteriorWitness {
            d: 2,
            level: 2,
            vector: DVector::from_vec(vec![real(0.5), real(0.5), real(0.5), real(0.5)]),
            residual: 0.0,
        };
        let e = w.embed(3).unwrap();
        let expected: Vec<f64> = vec![0.5, 0.5, 0.0, 0.5, 0.5, 0.0];
        assert_eq!(e, DVector::from_vec(expected.into_iter().map(real).collect()));
        assert!(w.embed(1).is_err());
    }

    #[test]
    fn definite_models_have_no_witness() {
        let m = CompactTupleModel::diagonal(Sequence::Explicit(vec![2.0, 1.5, 1.25, 1.125]), 4).unwrap();
        let err = finite_interior_witness(&m, 4, 4, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::NoWitness { .. }));
    }
}
