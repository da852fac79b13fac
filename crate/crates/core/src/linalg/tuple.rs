use serde::{Deserialize, Serialize};

use super::{hermitian_deviation, kron, op_norm, symmetrize, ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::json;
use crate::tol::Tolerances;

/// A g-tuple of self-adjoint matrices sharing one dimension.
///
/// Coordinates are stored exactly as given once they pass the
/// self-adjointness check; constructors that produce matrices by arithmetic
/// re-symmetrize them as `(M + M*)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TupleJson", try_from = "TupleJson")]
pub struct SelfAdjointTuple {
    matrices: Vec<ComplexMatrix>,
}

impl SelfAdjointTuple {
    /// Validates shape, finiteness and `|M_i - M_i*|_max <= herm_tol`.
    pub fn new(matrices: Vec<ComplexMatrix>, herm_tol: f64) -> Result<Self> {
        Self::check_shapes(&matrices)?;
        for m in &matrices {
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
            let deviation = hermitian_deviation(m);
            if deviation > herm_tol {
                return Err(Error::NotSelfAdjoint { deviation });
            }
        }
        Ok(Self { matrices })
    }

    /// Replaces every coordinate by its Hermitian part. Only shapes are checked.
    pub fn symmetrized(matrices: Vec<ComplexMatrix>) -> Result<Self> {
        Self::check_shapes(&matrices)?;
        Ok(Self {
            matrices: matrices.iter().map(symmetrize).collect(),
        })
    }

    pub fn from_real(matrices: &[nalgebra::DMatrix<f64>]) -> Result<Self> {
        let complex = matrices.iter().map(|m| m.map(|x| C64::new(x, 0.0))).collect();
        Self::new(complex, Tolerances::default().herm)
    }

    /// A tuple of 1x1 matrices, i.e. a point of R^g.
    pub fn scalars(values: &[f64]) -> Result<Self> {
        let ms = values
            .iter()
            .map(|&x| ComplexMatrix::from_element(1, 1, C64::new(x, 0.0)))
            .collect();
        Self::new(ms, 0.0)
    }

    pub fn zeros(g: usize, dim: usize) -> Self {
        assert!(g > 0 && dim > 0, "tuples need g >= 1 and dim >= 1");
        Self {
            matrices: vec![ComplexMatrix::zeros(dim, dim); g],
        }
    }

    fn check_shapes(matrices: &[ComplexMatrix]) -> Result<()> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidArgument("a tuple needs at least one coordinate".into()))?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::InvalidArgument("tuple dimension must be positive".into()));
        }
        if let Some((i, m)) = matrices
            .iter()
            .enumerate()
            .find(|(_, m)| m.nrows() != dim || m.ncols() != dim)
        {
            return Err(Error::DimensionMismatch(format!(
                "coordinate {i} is {}x{}, expected {dim}x{dim}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }

    pub fn g(&self) -> usize {
        self.matrices.len()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    pub fn coord(&self, i: usize) -> &ComplexMatrix {
        &self.matrices[i]
    }

    pub fn into_matrices(self) -> Vec<ComplexMatrix> {
        self.matrices
    }

    /// `I_m (x) T`, i.e. m diagonal copies.
    pub fn amplify(&self, m: usize) -> Self {
        let id = ComplexMatrix::identity(m, m);
        Self {
            matrices: self.matrices.iter().map(|x| kron(&id, x)).collect(),
        }
    }

    /// Leading k x k corner of every coordinate.
    pub fn corner(&self, k: usize) -> Self {
        assert!(k >= 1 && k <= self.dim(), "corner size out of range");
        Self {
            matrices: self
                .matrices
                .iter()
                .map(|m| m.view((0, 0), (k, k)).into_owned())
                .collect(),
        }
    }

    /// Pads with zero rows and columns up to `dim` (i.e. `T (+) 0`).
    pub fn padded(&self, dim: usize) -> Self {
        assert!(dim >= self.dim(), "cannot pad to a smaller dimension");
        let n = self.dim();
        Self {
            matrices: self
                .matrices
                .iter()
                .map(|m| {
                    let mut out = ComplexMatrix::zeros(dim, dim);
                    out.view_mut((0, 0), (n, n)).copy_from(m);
                    out
                })
                .collect(),
        }
    }

    /// Real linear combination `sum c_i T_i`.
    pub fn combination(&self, coeffs: &[f64]) -> ComplexMatrix {
        assert_eq!(coeffs.len(), self.g());
        let n = self.dim();
        self.matrices
            .iter()
            .zip(coeffs)
            .fold(ComplexMatrix::zeros(n, n), |acc, (m, &c)| acc + m * C64::new(c, 0.0))
    }

    /// `max_i |T_i - S_i|` in operator norm.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.g(), other.g());
        assert_eq!(self.dim(), other.dim());
        self.matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| op_norm(&(a - b)))
            .fold(0.0, f64::max)
    }

    /// Operator norm of each coordinate.
    pub fn norms(&self) -> Vec<f64> {
        self.matrices.iter().map(op_norm).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct TupleJson {
    g: usize,
    dim: usize,
    #[serde(with = "json::matrix_list")]
    matrices: Vec<ComplexMatrix>,
}

impl From<SelfAdjointTuple> for TupleJson {
    fn from(t: SelfAdjointTuple) -> Self {
        Self {
            g: t.g(),
            dim: t.dim(),
            matrices: t.matrices,
        }
    }
}

impl TryFrom<TupleJson> for SelfAdjointTuple {
    type Error = Error;

    fn try_from(raw: TupleJson) -> Result<Self> {
        let t = SelfAdjointTuple::new(raw.matrices, Tolerances::default().herm)?;
        if t.g() != raw.g || t.dim() != raw.dim {
            return Err(Error::DimensionMismatch(format!(
                "declared g={} dim={} but matrices give g={} dim={}",
                raw.g,
                raw.dim,
                t.g(),
                t.dim()
            )));
        }
        Ok(t)
    }
}
