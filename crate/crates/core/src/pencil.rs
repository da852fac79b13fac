//! Linear pencils `L_A(y) = A_0 - sum A_i y_i`, their evaluation on tuples,
//! free-spectrahedron membership, and the identities that make pencils the
//! matrix-affine maps on a hull.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hull::sample_hull_point;
use crate::json;
use crate::linalg::{
    block_diag, compress, gaussian_hermitian, hermitian_deviation, identity, is_psd, kron, max_abs, op_norm,
    permutation_matrix, random_isometry, real, rng, shuffle_permutation, symmetrize, ComplexMatrix, SelfAdjointTuple,
    C64,
};
use crate::model::CompactTupleModel;
use crate::tol::Tolerances;

const HERM_TOL: f64 = 1e-12;
const MAX_CONDITION: f64 = 1e10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PencilJson", try_from = "PencilJson")]
pub struct LinearPencil {
    a0: ComplexMatrix,
    a: Vec<ComplexMatrix>,
    symmetric: bool,
    monic: bool,
}

impl LinearPencil {
    pub fn new(a0: ComplexMatrix, a: Vec<ComplexMatrix>) -> Result<Self> {
        let d = a0.nrows();
        if d == 0 || a.is_empty() {
            return Err(Error::InvalidArgument("a pencil needs d >= 1 and g >= 1".into()));
        }
        if let Some(bad) = std::iter::once(&a0).chain(&a).find(|m| m.shape() != (d, d)) {
            return Err(Error::DimensionMismatch(format!(
                "pencil coefficient is {}x{}, expected {d}x{d}",
                bad.nrows(),
                bad.ncols()
            )));
        }
        if std::iter::once(&a0)
            .chain(&a)
            .flat_map(|m| m.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        let symmetric = std::iter::once(&a0)
            .chain(&a)
            .all(|m| hermitian_deviation(m) <= HERM_TOL);
        let monic = a0 == identity(d);
        Ok(Self {
            a0,
            a,
            symmetric,
            monic,
        })
    }

    pub fn monic(a: Vec<ComplexMatrix>) -> Result<Self> {
        let d = a.first().map_or(0, |m| m.nrows());
        Self::new(identity(d), a)
    }

    /// `L_{(1, 0, ..., 0)}`: the constant identity pencil.
    pub fn identity(g: usize, d: usize) -> Self {
        Self::new(identity(d), vec![ComplexMatrix::zeros(d, d); g]).expect("valid shapes")
    }

    /// Seeded symmetric pencil with GUE coefficients of the given scale.
    /// `A_0` is the identity when `monic`, otherwise a random Hermitian.
    pub fn random_symmetric(g: usize, d: usize, scale: f64, monic: bool, seed: u64) -> Self {
        let mut r = rng(seed);
        let a0 = if monic {
            identity(d)
        } else {
            gaussian_hermitian(d, scale, &mut r)
        };
        let a = (0..g).map(|_| gaussian_hermitian(d, scale, &mut r)).collect();
        Self::new(a0, a).expect("valid shapes")
    }

    pub fn g(&self) -> usize {
        self.a.len()
    }

    pub fn d(&self) -> usize {
        self.a0.nrows()
    }

    pub fn a0(&self) -> &ComplexMatrix {
        &self.a0
    }

    pub fn coefficients(&self) -> &[ComplexMatrix] {
        &self.a
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_monic(&self) -> bool {
        self.monic
    }

    /// Largest coefficient distance to another pencil of the same shape.
    pub fn coefficient_distance(&self, other: &Self) -> f64 {
        assert_eq!((self.g(), self.d()), (other.g(), other.d()));
        std::iter::once((&self.a0, &other.a0))
            .chain(self.a.iter().zip(&other.a))
            .map(|(x, y)| max_abs(&(x - y)))
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct PencilJson {
    g: usize,
    d: usize,
    #[serde(rename = "A0", with = "json::matrix")]
    a0: ComplexMatrix,
    #[serde(rename = "A", with = "json::matrix_list")]
    a: Vec<ComplexMatrix>,
    monic: bool,
    symmetric: bool,
}

impl From<LinearPencil> for PencilJson {
    fn from(p: LinearPencil) -> Self {
        Self {
            g: p.g(),
            d: p.d(),
            a0: p.a0,
            a: p.a,
            monic: p.monic,
            symmetric: p.symmetric,
        }
    }
}

impl TryFrom<PencilJson> for LinearPencil {
    type Error = Error;

    fn try_from(raw: PencilJson) -> Result<Self> {
        let p = LinearPencil::new(raw.a0, raw.a)?;
        if p.g() != raw.g || p.d() != raw.d {
            return Err(Error::DimensionMismatch(
                "pencil g/d do not match its coefficients".into(),
            ));
        }
        if (raw.monic && !p.monic) || (raw.symmetric && !p.symmetric) {
            return Err(Error::InvalidArgument(
                "pencil flags contradict its coefficients".into(),
            ));
        }
        Ok(p)
    }
}

/// `A_0 (x) I_n - sum A_i (x) Y_i`; re-symmetrized for symmetric pencils.
pub fn eval_pencil(p: &LinearPencil, y: &SelfAdjointTuple) -> Result<ComplexMatrix> {
    if p.g() != y.g() {
        return Err(Error::DimensionMismatch(format!(
            "pencil has g={} but tuple has g={}",
            p.g(),
            y.g()
        )));
    }
    let mut out = kron(&p.a0, &identity(y.dim()));
    for (a, m) in p.a.iter().zip(y.matrices()) {
        out -= kron(a, m);
    }
    Ok(if p.symmetric { symmetrize(&out) } else { out })
}

/// `phi_Z(L_A) = L_A(Z)`: pencil evaluation read as a map on pencils.
pub fn phi_eval(z: &SelfAdjointTuple, p: &LinearPencil) -> Result<ComplexMatrix> {
    eval_pencil(p, z)
}

/// `L_A(Y) >= 0` for a monic symmetric pencil.
pub fn in_spectrahedron(p: &LinearPencil, y: &SelfAdjointTuple, tol: f64) -> Result<bool> {
    if !(p.monic && p.symmetric) {
        return Err(Error::PencilShape("monic and symmetric"));
    }
    is_psd(&eval_pencil(p, y)?, tol)
}

/// A map from tuples to `d n x d n` matrices, for checking matrix affinity.
pub trait TupleMap: Sync {
    fn block_dim(&self) -> usize;
    fn apply(&self, y: &SelfAdjointTuple) -> Result<ComplexMatrix>;
}

impl TupleMap for LinearPencil {
    fn block_dim(&self) -> usize {
        self.d()
    }

    fn apply(&self, y: &SelfAdjointTuple) -> Result<ComplexMatrix> {
        eval_pencil(self, y)
    }
}

/// `Y -> Y_1^2`. Not matrix affine; used as a negative control.
#[derive(Clone, Copy, Debug, Default)]
pub struct SquareMap;

impl TupleMap for SquareMap {
    fn block_dim(&self) -> usize {
        1
    }

    fn apply(&self, y: &SelfAdjointTuple) -> Result<ComplexMatrix> {
        Ok(y.coord(0) * y.coord(0))
    }
}

/// `|theta(sum V_i* Y^i V_i) - sum (I_d (x) V_i)* theta(Y^i) (I_d (x) V_i)|`
/// in operator norm, for a partition of identity `sum V_i* V_i = I`.
pub fn matrix_affine_residual<M: TupleMap + ?Sized>(
    theta: &M,
    points: &[SelfAdjointTuple],
    vs: &[ComplexMatrix],
    iso_tol: f64,
) -> Result<f64> {
    if points.is_empty() || points.len() != vs.len() {
        return Err(Error::DimensionMismatch("need one coefficient per point".into()));
    }
    let n = vs[0].ncols();
    let partition = vs
        .iter()
        .fold(ComplexMatrix::zeros(n, n), |acc, v| acc + v.adjoint() * v);
    let residual = op_norm(&(partition - identity(n)));
    if residual > iso_tol {
        return Err(Error::PartitionOfIdentity { residual });
    }
    let g = points[0].g();
    let compressed = points
        .iter()
        .zip(vs)
        .map(|(y, v)| compress(y, v))
        .collect::<Result<Vec<_>>>()?;
    let combined = SelfAdjointTuple::symmetrized(
        (0..g)
            .map(|i| {
                compressed
                    .iter()
                    .fold(ComplexMatrix::zeros(n, n), |acc, t| acc + t.coord(i))
            })
            .collect(),
    )?;
    let lhs = theta.apply(&combined)?;
    let d = theta.block_dim();
    let mut rhs = ComplexMatrix::zeros(d * n, d * n);
    for (y, v) in points.iter().zip(vs) {
        let lift = kron(&identity(d), v);
        rhs += lift.adjoint() * theta.apply(y)? * lift;
    }
    Ok(op_norm(&(lhs - rhs)))
}

/// Recovers `theta(y) = A_0 - sum A_i y_i` from values at scalar points.
///
/// The samples must include the origin and affinely span R^g. More than
/// g + 1 samples are fitted by least squares and must agree to 1e-10
/// (relative to the largest sampled value).
pub fn reconstruct_pencil_from_affine(samples: &[(Vec<f64>, ComplexMatrix)]) -> Result<LinearPencil> {
    let (first_point, first_value) = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("no samples".into()))?;
    let g = first_point.len();
    let d = first_value.nrows();
    if g == 0 || d == 0 {
        return Err(Error::InvalidArgument("samples need g >= 1 and d >= 1".into()));
    }
    if samples.iter().any(|(y, v)| y.len() != g || v.shape() != (d, d)) {
        return Err(Error::DimensionMismatch("samples have inconsistent shapes".into()));
    }
    if !samples.iter().any(|(y, _)| y.iter().all(|&x| x == 0.0)) {
        return Err(Error::InvalidArgument("samples must include the origin".into()));
    }
    if samples.len() < g + 1 {
        return Err(Error::SingularSystem {
            condition: f64::INFINITY,
        });
    }

    let rows = samples.len();
    let design = DMatrix::<C64>::from_fn(
        rows,
        g + 1,
        |r, c| {
            if c == 0 {
                real(1.0)
            } else {
                real(-samples[r].0[c - 1])
            }
        },
    );
    let values = DMatrix::<C64>::from_fn(rows, d * d, |r, k| samples[r].1[(k / d, k % d)]);
    let svd = design.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::SingularSystem { condition });
    }
    let coef = svd
        .solve(&values, 0.0)
        .map_err(|e| Error::AssertionFailed(format!("least squares failed: {e}")))?;
    let block = |c: usize| ComplexMatrix::from_fn(d, d, |i, j| coef[(c, i * d + j)]);
    let pencil = LinearPencil::new(block(0), (1..=g).map(block).collect())?;

    let scale = samples.iter().map(|(_, v)| max_abs(v)).fold(0.0, f64::max);
    let misfit = samples
        .iter()
        .map(|(y, v)| -> Result<f64> {
            let fit = eval_pencil(&pencil, &SelfAdjointTuple::scalars(y)?)?;
            Ok(max_abs(&(fit - v)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if misfit > 1e-10 * (1.0 + scale) {
        return Err(Error::NotAffine { residual: misfit });
    }
    Ok(pencil)
}

/// Values of `theta` at `0, e_1, ..., e_g` (as 1x1 tuples).
pub fn sample_at_unit_points<M: TupleMap + ?Sized>(theta: &M, g: usize) -> Result<Vec<(Vec<f64>, ComplexMatrix)>> {
    (0..=g)
        .map(|k| {
            let mut y = vec![0.0; g];
            if k > 0 {
                y[k - 1] = 1.0;
            }
            let value = theta.apply(&SelfAdjointTuple::scalars(&y)?)?;
            Ok((y, value))
        })
        .collect()
}

/// Residual of the block identity
/// `L_A(C (+) 0_{L-n}) = Pi* [L_A(C) (+) (I_{L-n} (x) L_A(0))] Pi`,
/// where `C` is the leading `n x n` corner of `X^L` and `Pi` is the
/// canonical shuffle.
pub fn phi_decomposition_check(p: &LinearPencil, model: &CompactTupleModel, n: usize, top_level: usize) -> Result<f64> {
    if n == 0 || n >= top_level {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n < L, got n={n}, L={top_level}"
        )));
    }
    let x = model.truncate(top_level)?;
    let corner = x.corner(n);
    let lhs = eval_pencil(p, &corner.padded(top_level))?;

    let head = eval_pencil(p, &corner)?;
    let at_zero = eval_pencil(p, &SelfAdjointTuple::zeros(p.g(), 1))?;
    let mut blocks = vec![&head];
    blocks.extend(std::iter::repeat_n(&at_zero, top_level - n));
    let rhs = block_diag(&blocks);

    let mut dims = vec![n];
    dims.extend(std::iter::repeat_n(1, top_level - n));
    let shuffle = permutation_matrix(&shuffle_permutation(p.d(), &dims));
    Ok(max_abs(&(lhs - shuffle.transpose() * rhs * shuffle)))
}

const RECONSTRUCTION_SALT: u64 = 0x7ec0;

/// Seeded random pencil whose largest coefficient has operator norm
/// uniform in `[bound / 10, bound]`.
pub fn random_bounded(g: usize, d: usize, bound: f64, seed: u64) -> LinearPencil {
    let p = LinearPencil::random_symmetric(g, d, 1.0, false, seed);
    let largest = std::iter::once(&p.a0).chain(&p.a).map(op_norm).fold(0.0, f64::max);
    let target = bound * rng(seed ^ RECONSTRUCTION_SALT).random_range(0.1..=1.0);
    let c = real(target / largest);
    LinearPencil::new(&p.a0 * c, p.a.iter().map(|a| a * c).collect()).expect("valid shapes")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineRow {
    pub seed: u64,
    pub d: usize,
    pub partitions: usize,
    /// Which map was tested: `pencil`, or `square` when the non-affine map
    /// is injected in its place.
    pub map: String,
    /// Largest matrix-affine residual of the tested map over the partitions.
    pub residual: f64,
    /// Same for the non-affine control `Y -> Y_1^2`.
    pub control_residual: f64,
    /// Coefficient error of reconstructing a bounded random pencil from its
    /// values at `0, e_1, ..., e_g`.
    pub reconstruction_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineSummary {
    pub rows: usize,
    pub max_residual: f64,
    pub max_reconstruction_error: f64,
    pub control_detected: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffineReport {
    pub rows: Vec<AffineRow>,
    pub summary: AffineSummary,
}

#[derive(Clone, Copy, Debug)]
pub struct AffineOptions {
    pub level: usize,
    pub d: usize,
    pub partitions: usize,
    pub coefficient_bound: f64,
    /// Test `Y -> Y_1^2` instead of the pencil (negative control).
    pub inject_nonaffine: bool,
}

impl Default for AffineOptions {
    fn default() -> Self {
        Self {
            level: 4,
            d: 2,
            partitions: 20,
            coefficient_bound: 10.0,
            inject_nonaffine: false,
        }
    }
}

/// Random partition of identity `V_1, ..., V_k` (`n_i x n`) over hull
/// points of dimensions `n_i`.
fn random_partition(
    model: &CompactTupleModel,
    level: usize,
    r: &mut impl Rng,
    tol: &Tolerances,
) -> Result<(Vec<SelfAdjointTuple>, Vec<ComplexMatrix>)> {
    let k = r.random_range(2..=3);
    let dims: Vec<usize> = (0..k).map(|_| r.random_range(1..=level)).collect();
    let total: usize = dims.iter().sum();
    let n = r.random_range(1..=total.min(level));
    let points = dims
        .iter()
        .map(|&ni| Ok(sample_hull_point(model, level, 1, ni, r.random(), tol)?.y))
        .collect::<Result<Vec<_>>>()?;
    let stacked = random_isometry(n, total, r.random())?;
    let mut row = 0;
    let vs = dims
        .iter()
        .map(|&ni| {
            let v = stacked.rows(row, ni).into_owned();
            row += ni;
            v
        })
        .collect();
    Ok((points, vs))
}

pub fn affine_experiment(
    model: &CompactTupleModel,
    opts: &AffineOptions,
    seeds: &[u64],
    tol: &Tolerances,
    exec: Exec,
) -> Result<AffineReport> {
    if opts.level == 0 || opts.level > model.max_level() || opts.d == 0 || opts.partitions == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= level <= {}, d >= 1 and at least one partition",
            model.max_level()
        )));
    }
    let g = model.g();
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let rows = exec.try_map(seeds, |seed| -> Result<AffineRow> {
        let mut r = rng(seed);
        let pencil = LinearPencil::random_symmetric(g, opts.d, 1.0, false, seed);
        let tested: &dyn TupleMap = if opts.inject_nonaffine { &SquareMap } else { &pencil };
        let mut residual = 0.0f64;
        let mut control_residual = 0.0f64;
        for _ in 0..opts.partitions {
            let (points, vs) = random_partition(model, opts.level, &mut r, tol)?;
            residual = residual.max(matrix_affine_residual(tested, &points, &vs, tol.iso)?);
            control_residual = control_residual.max(matrix_affine_residual(&SquareMap, &points, &vs, tol.iso)?);
        }
        let bounded = random_bounded(g, opts.d, opts.coefficient_bound, seed);
        let rebuilt = reconstruct_pencil_from_affine(&sample_at_unit_points(&bounded, g)?)?;
        Ok(AffineRow {
            seed,
            d: opts.d,
            partitions: opts.partitions,
            map: if opts.inject_nonaffine { "square" } else { "pencil" }.into(),
            residual,
            control_residual,
            reconstruction_error: rebuilt.coefficient_distance(&bounded),
        })
    })?;
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let max_reconstruction_error = rows.iter().map(|r| r.reconstruction_error).fold(0.0, f64::max);
    let control_detected = rows.iter().filter(|r| r.control_residual > tol.nonaffine).count();
    let summary = AffineSummary {
        rows: rows.len(),
        max_residual,
        max_reconstruction_error,
        control_detected,
        passed: max_residual <= tol.affine
            && max_reconstruction_error <= 1e-9
            && control_detected * 100 >= 95 * rows.len(),
    };
    Ok(AffineReport { rows, summary })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UcpRow {
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    pub top_level: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UcpSummary {
    pub rows: usize,
    pub max_residual: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UcpReport {
    pub rows: Vec<UcpRow>,
    pub summary: UcpSummary,
}

/// [`phi_decomposition_check`] on one seeded `(P, n, L)` per seed, with
/// `L` drawn from `levels`, `1 <= n < L` and `1 <= d <= d_max`.
pub fn ucp_experiment(
    model: &CompactTupleModel,
    levels: &[usize],
    d_max: usize,
    seeds: &[u64],
    tol: &Tolerances,
    exec: Exec,
) -> Result<UcpReport> {
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    if levels.is_empty() || levels[0] < 2 || d_max == 0 {
        return Err(Error::InvalidArgument("need levels >= 2 and d_max >= 1".into()));
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let rows = exec.try_map(seeds, |seed| -> Result<UcpRow> {
        let mut r = rng(seed);
        let d = r.random_range(1..=d_max);
        let top_level = levels[r.random_range(0..levels.len())];
        let n = r.random_range(1..top_level);
        let monic = r.random_bool(0.5);
        let p = LinearPencil::random_symmetric(model.g(), d, 1.0, monic, r.random());
        Ok(UcpRow {
            seed,
            d,
            n,
            top_level,
            residual: phi_decomposition_check(&p, model, n, top_level)?,
        })
    })?;
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let summary = UcpSummary {
        rows: rows.len(),
        max_residual,
        passed: max_residual <= tol.ucp,
    };
    Ok(UcpReport { rows, summary })
}
