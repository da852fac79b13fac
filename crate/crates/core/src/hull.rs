//! Witnessed points of the truncated hull `K_{X^l}` and the operations that
//! keep witnesses valid: matrix convex combinations, contraction lifts and
//! truncation sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::json;
use crate::linalg::{
    compress, identity, isometry_residual, op_norm, random_isometry, sqrt_psd, ComplexMatrix, SelfAdjointTuple,
};
use crate::model::{vector_amplification, CompactTupleModel, FiniteInteriorWitness};
use crate::tol::Tolerances;

/// `Y = V* (I_m (x) X^level) V` together with the isometry `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullPoint {
    #[serde(flatten)]
    pub y: SelfAdjointTuple,
    pub level: usize,
    pub multiplicity: usize,
    #[serde(rename = "V", with = "json::matrix")]
    pub v: ComplexMatrix,
    pub witness_residual: f64,
}

impl HullPoint {
    pub fn dim(&self) -> usize {
        self.y.dim()
    }

    /// Recomputes `V* (I_m (x) X^level) V` and returns its distance to `Y`.
    pub fn recompute_residual(&self, model: &CompactTupleModel) -> Result<f64> {
        let ambient = model.truncate(self.level)?.amplify(self.multiplicity);
        if self.v.nrows() != ambient.dim() || self.v.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "witness V is {}x{}, expected {}x{}",
                self.v.nrows(),
                self.v.ncols(),
                ambient.dim(),
                self.dim()
            )));
        }
        Ok(compress(&ambient, &self.v)?.distance(&self.y))
    }

    pub fn verify(&self, model: &CompactTupleModel, tol: &Tolerances) -> Result<f64> {
        let iso = isometry_residual(&self.v);
        if iso > tol.iso {
            return Err(Error::NotIsometry { residual: iso });
        }
        let residual = self.recompute_residual(model)?;
        if residual > tol.hull_witness {
            return Err(Error::AssertionFailed(format!(
                "hull witness residual {residual:e} exceeds {:e}",
                tol.hull_witness
            )));
        }
        Ok(residual)
    }
}

pub fn hull_point(
    model: &CompactTupleModel,
    level: usize,
    multiplicity: usize,
    v: ComplexMatrix,
    tol: &Tolerances,
) -> Result<HullPoint> {
    if multiplicity == 0 {
        return Err(Error::InvalidArgument("multiplicity must be positive".into()));
    }
    let ambient = model.truncate(level)?.amplify(multiplicity);
    if v.nrows() != ambient.dim() || v.ncols() == 0 || v.ncols() > v.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "V must be ({multiplicity}*{level}) x n with n <= {}, got {}x{}",
            ambient.dim(),
            v.nrows(),
            v.ncols()
        )));
    }
    let iso = isometry_residual(&v);
    if iso > tol.iso {
        return Err(Error::NotIsometry { residual: iso });
    }
    // Y is the compression itself, so the stored residual is exact
    let y = compress(&ambient, &v)?;
    Ok(HullPoint {
        y,
        level,
        multiplicity,
        v,
        witness_residual: 0.0,
    })
}

/// Hull point of dimension `n` from a seeded random isometry.
pub fn sample_hull_point(
    model: &CompactTupleModel,
    level: usize,
    multiplicity: usize,
    n: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<HullPoint> {
    let v = random_isometry(n, multiplicity * level, seed)?;
    hull_point(model, level, multiplicity, v, tol)
}

#[derive(Clone, Debug)]
pub struct Combination {
    pub point: HullPoint,
    /// Every coefficient `V_i` is nonzero.
    pub weakly_proper: bool,
}

/// `sum V_i* Y^i V_i` with `sum V_i* V_i = I`.
///
/// The witness of the result stacks `W_i V_i` (where `W_i` witnesses `Y^i`)
/// against the direct sum of all constituent ambient spaces, so its
/// multiplicity is the sum of the constituent multiplicities.
pub fn matrix_convex_combine(
    model: &CompactTupleModel,
    points: &[HullPoint],
    vs: &[ComplexMatrix],
    tol: &Tolerances,
) -> Result<Combination> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty matrix convex combination".into()))?;
    if points.len() != vs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points but {} coefficients",
            points.len(),
            vs.len()
        )));
    }
    let level = first.level;
    if let Some(p) = points.iter().find(|p| p.level != level) {
        return Err(Error::InvalidArgument(format!(
            "points at levels {level} and {} cannot be combined",
            p.level
        )));
    }
    let n = vs[0].ncols();
    for (p, v) in points.iter().zip(vs) {
        if v.nrows() != p.dim() || v.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "coefficient is {}x{}, expected {}x{n}",
                v.nrows(),
                v.ncols(),
                p.dim()
            )));
        }
    }
    let partition = vs
        .iter()
        .fold(ComplexMatrix::zeros(n, n), |acc, v| acc + v.adjoint() * v);
    let residual = op_norm(&(partition - identity(n)));
    if residual > tol.iso {
        return Err(Error::PartitionOfIdentity { residual });
    }
    let weakly_proper = vs.iter().all(|v| v.iter().any(|z| z.norm() > 0.0));

    let multiplicity: usize = points.iter().map(|p| p.multiplicity).sum();
    let mut stacked = ComplexMatrix::zeros(multiplicity * level, n);
    let mut row = 0;
    for (p, v) in points.iter().zip(vs) {
        let block = &p.v * v;
        stacked.view_mut((row, 0), (block.nrows(), n)).copy_from(&block);
        row += block.nrows();
    }
    let combined = points
        .iter()
        .zip(vs)
        .map(|(p, v)| compress(&p.y, v))
        .collect::<Result<Vec<_>>>()?;
    let g = first.y.g();
    let y = SelfAdjointTuple::symmetrized(
        (0..g)
            .map(|i| {
                combined
                    .iter()
                    .fold(ComplexMatrix::zeros(n, n), |acc, t| acc + t.coord(i))
            })
            .collect(),
    )?;
    let ambient = model.truncate(level)?.amplify(multiplicity);
    let witness_residual = compress(&ambient, &stacked)?.distance(&y);
    Ok(Combination {
        point: HullPoint {
            y,
            level,
            multiplicity,
            v: stacked,
            witness_residual,
        },
        weakly_proper,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsometryLiftResult {
    #[serde(rename = "T", with = "json::matrix")]
    pub t: ComplexMatrix,
    /// Number of level-l copies in the zero block placed above `W`.
    pub zero_block_multiplicity: usize,
    /// Multiplicity of the contraction's ambient space.
    pub multiplicity: usize,
    pub isometry_residual: f64,
    /// `max_i |T*(I (x) X_i)T - W*(I (x) X_i)W|`.
    pub equality_residual: f64,
}

/// Lifts a contraction `W: C^n -> C^{m l}` to an isometry
/// `T = [Z_n (I - W*W)^{1/2}; W]` with the same compression of
/// `I (x) X^l`, where `Z_n = I_n (x) z` and `z` is a finite-interior
/// witness. The ambient of `T` has `n d + m` copies of `X^l`, the zero
/// block first.
pub fn lift_contraction_to_isometry(
    model: &CompactTupleModel,
    level: usize,
    w: &ComplexMatrix,
    witness: &FiniteInteriorWitness,
    tol: &Tolerances,
) -> Result<IsometryLiftResult> {
    let x = model.truncate(level)?;
    if !w.nrows().is_multiple_of(level) || w.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "contraction has {} rows, not a multiple of level {level}",
            w.nrows()
        )));
    }
    let m = w.nrows() / level;
    let n = w.ncols();
    let norm = op_norm(w);
    if norm > 1.0 + 1e-12 {
        return Err(Error::NotContraction { norm });
    }
    let z = witness.embed(level)?;
    let z_residual = crate::model::quadratic_form_residual(&x.amplify(witness.d), &z);
    if z_residual > tol.equality {
        return Err(Error::WitnessTooWeak {
            residual: z_residual,
            tol: tol.equality,
        });
    }

    let defect = sqrt_psd(&(identity(n) - w.adjoint() * w))?;
    let top = vector_amplification(&z, n) * defect;
    let zero_block_multiplicity = n * witness.d;
    let mut t = ComplexMatrix::zeros(top.nrows() + w.nrows(), n);
    t.view_mut((0, 0), top.shape()).copy_from(&top);
    t.view_mut((top.nrows(), 0), w.shape()).copy_from(w);

    let isometry_residual = isometry_residual(&t);
    let lhs = compress(&x.amplify(zero_block_multiplicity + m), &t)?;
    let rhs = compress(&x.amplify(m), w)?;
    let equality_residual = lhs.distance(&rhs);
    if isometry_residual > tol.iso {
        return Err(Error::NotIsometry {
            residual: isometry_residual,
        });
    }
    if equality_residual > tol.equality {
        return Err(Error::AssertionFailed(format!(
            "lift equality residual {equality_residual:e} exceeds {:e}",
            tol.equality
        )));
    }
    Ok(IsometryLiftResult {
        t,
        zero_block_multiplicity,
        multiplicity: m,
        isometry_residual,
        equality_residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: usize,
    pub error: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub top_level: usize,
    pub rows: Vec<SweepRow>,
    /// `error <= 2 * bound` on every row.
    pub within_bound: bool,
    /// Errors are nonincreasing in the level, up to the monotonicity slack.
    pub monotone: bool,
}

impl SweepReport {
    pub fn check(&self) -> Result<()> {
        if !self.within_bound {
            return Err(Error::AssertionFailed(
                "convergence error exceeds twice the tail bound".into(),
            ));
        }
        if !self.monotone {
            return Err(Error::AssertionFailed("convergence error is not nonincreasing".into()));
        }
        Ok(())
    }
}

/// Compares `Y^l = V* (I_m (x) P_l X^L P_l) V` against `Y^L` for the given
/// levels, where `V` is an isometry into `m` copies of level `top_level`.
pub fn convergence_sweep(
    model: &CompactTupleModel,
    v: &ComplexMatrix,
    top_level: usize,
    levels: &[usize],
    tol: &Tolerances,
    exec: Exec,
) -> Result<SweepReport> {
    let top = model.truncate(top_level)?;
    if !v.nrows().is_multiple_of(top_level) {
        return Err(Error::DimensionMismatch(format!(
            "isometry has {} rows, not a multiple of level {top_level}",
            v.nrows()
        )));
    }
    let m = v.nrows() / top_level;
    if let Some(&bad) = levels.iter().find(|&&l| l == 0 || l > top_level) {
        return Err(Error::LevelOutOfRange {
            level: bad,
            max_level: top_level,
        });
    }
    let iso = isometry_residual(v);
    if iso > tol.iso {
        return Err(Error::NotIsometry { residual: iso });
    }
    let y_top = compress(&top.amplify(m), v)?;

    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let rows = exec.try_map(levels, |l| -> Result<SweepRow> {
        let truncated = top.corner(l).padded(top_level).amplify(m);
        let error = compress(&truncated, v)?.distance(&y_top);
        Ok(SweepRow {
            level: l,
            error,
            bound: model.tail_bound(l)?,
        })
    })?;
    let within_bound = rows.iter().all(|r| r.error <= 2.0 * r.bound);
    let monotone = rows.windows(2).all(|p| p[1].error <= p[0].error + tol.monotone);
    Ok(SweepReport {
        top_level,
        rows,
        within_bound,
        monotone,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    #[serde(flatten)]
    pub sweep: SweepReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergeSummary {
    pub rows: usize,
    pub within_bound: usize,
    pub monotone: usize,
    pub max_error_over_bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergeReport {
    pub rows: Vec<ConvergeRow>,
    pub summary: ConvergeSummary,
}

/// One [`convergence_sweep`] per seed, each with a seeded isometry from
/// `C^n` into `m` copies of the top level (the largest of `levels`).
pub fn converge_experiment(
    model: &CompactTupleModel,
    n: usize,
    m: usize,
    levels: &[usize],
    seeds: &[u64],
    tol: &Tolerances,
    exec: Exec,
) -> Result<ConvergeReport> {
    let top_level = *levels
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidArgument("no levels given".into()))?;
    if n == 0 || m == 0 || n > m * top_level {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n <= m*L, got n={n}, m={m}, L={top_level}"
        )));
    }
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    // levels are swept sequentially inside each row; rows are independent
    let rows = exec.try_map(seeds, |seed| -> Result<ConvergeRow> {
        let v = random_isometry(n, m * top_level, seed)?;
        let sweep = convergence_sweep(model, &v, top_level, levels, tol, Exec::Sequential)?;
        Ok(ConvergeRow { seed, n, m, sweep })
    })?;
    let ratio = rows
        .iter()
        .flat_map(|r| &r.sweep.rows)
        .filter(|r| r.bound > 0.0)
        .map(|r| r.error / r.bound)
        .fold(0.0, f64::max);
    let within_bound = rows.iter().filter(|r| r.sweep.within_bound).count();
    let monotone = rows.iter().filter(|r| r.sweep.monotone).count();
    let summary = ConvergeSummary {
        rows: rows.len(),
        within_bound,
        monotone,
        max_error_over_bound: ratio,
        passed: within_bound == rows.len() && monotone == rows.len(),
    };
    Ok(ConvergeReport { rows, summary })
}
