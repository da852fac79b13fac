//! Joint commutants of self-adjoint tuples.
//!
//! The commutant of a self-adjoint tuple is a *-algebra, so it is spanned by
//! its Hermitian elements. We parametrize Hermitian n x n matrices by n^2
//! real coordinates in the trace-orthonormal basis
//!
//!   E_jj,  (E_jk + E_kj)/sqrt2,  i(E_jk - E_kj)/sqrt2   (j < k),
//!
//! under which `H -> i[M, H]` is a real linear map on the same space. The
//! real nullspace of the stacked maps (one per coordinate) is the Hermitian
//! part of the commutant, and its real dimension equals the complex
//! dimension of the whole commutant.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{hermitian_eigen, real, rng, ComplexMatrix, SelfAdjointTuple, C64};
use crate::error::{Error, Result};
use crate::json;

const SPLIT_ATTEMPTS: usize = 5;
const SPLIT_SEED: u64 = 0xc0_33u64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutantReport {
    pub tuple_dim: usize,
    pub commutant_dim: usize,
    /// Hermitian, orthonormal under the trace inner product.
    #[serde(with = "json::matrix_list")]
    pub basis: Vec<ComplexMatrix>,
    /// Dimensions of the minimal reducing subspaces, ascending.
    pub minimal_block_dims: Vec<usize>,
    /// `max |B M_i - M_i B|_F` over basis elements and coordinates.
    pub residual: f64,
}

impl CommutantReport {
    pub fn is_trivial(&self) -> bool {
        self.commutant_dim == 1
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CommutantOptions {
    /// Singular values below `rank_tol * sigma_max` span the nullspace.
    pub rank_tol: f64,
    pub max_dim: usize,
    /// Eigenvalues of the splitting element closer than this are merged.
    pub cluster_gap: f64,
}

impl Default for CommutantOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-8,
            max_dim: 64,
            cluster_gap: 1e-6,
        }
    }
}

pub fn commutant(t: &SelfAdjointTuple, rank_tol: f64) -> Result<CommutantReport> {
    commutant_with(
        t,
        &CommutantOptions {
            rank_tol,
            ..CommutantOptions::default()
        },
    )
}

pub fn commutant_with(t: &SelfAdjointTuple, opts: &CommutantOptions) -> Result<CommutantReport> {
    let n = t.dim();
    if n > opts.max_dim {
        return Err(Error::CommutantTooLarge {
            dim: n,
            max_dim: opts.max_dim,
        });
    }
    let basis = hermitian_nullspace(t, opts.rank_tol);
    let residual = basis
        .iter()
        .flat_map(|b| t.matrices().iter().map(move |m| (b * m - m * b).norm()))
        .fold(0.0, f64::max);
    let minimal_block_dims = minimal_blocks(n, &basis, opts.cluster_gap)?;
    Ok(CommutantReport {
        tuple_dim: n,
        commutant_dim: basis.len(),
        basis,
        minimal_block_dims,
        residual,
    })
}

/// Nonzero entries `(row, col, value)` of the b-th Hermitian basis element.
fn basis_entries(n: usize, b: usize) -> Vec<(usize, usize, C64)> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if b < n {
        return vec![(b, b, real(1.0))];
    }
    let (pair, imaginary) = ((b - n) / 2, (b - n) % 2 == 1);
    let (j, k) = upper_pair(n, pair);
    if imaginary {
        vec![(j, k, C64::new(0.0, s)), (k, j, C64::new(0.0, -s))]
    } else {
        vec![(j, k, real(s)), (k, j, real(s))]
    }
}

/// The p-th pair (j, k), j < k, in row-major order.
fn upper_pair(n: usize, mut p: usize) -> (usize, usize) {
    for j in 0..n {
        let row = n - 1 - j;
        if p < row {
            return (j, j + 1 + p);
        }
        p -= row;
    }
    unreachable!("pair index out of range")
}

/// Coordinates of a Hermitian matrix in the basis of [`basis_entries`].
fn hermitian_coords(c: &ComplexMatrix, out: &mut [f64]) {
    let n = c.nrows();
    let r2 = std::f64::consts::SQRT_2;
    for j in 0..n {
        out[j] = c[(j, j)].re;
    }
    let mut b = n;
    for j in 0..n {
        for k in (j + 1)..n {
            out[b] = r2 * c[(j, k)].re;
            out[b + 1] = r2 * c[(j, k)].im;
            b += 2;
        }
    }
}

fn hermitian_from_coords(n: usize, x: &[f64]) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(n, n);
    for (b, &xb) in x.iter().enumerate() {
        for (r, c, v) in basis_entries(n, b) {
            h[(r, c)] += v * xb;
        }
    }
    h
}

fn hermitian_nullspace(t: &SelfAdjointTuple, rank_tol: f64) -> Vec<ComplexMatrix> {
    let n = t.dim();
    let vars = n * n;
    let g = t.g();
    let mut stacked = DMatrix::<f64>::zeros(g * vars, vars);
    let mut c = ComplexMatrix::zeros(n, n);
    let mut coords = vec![0.0; vars];
    for b in 0..vars {
        let entries = basis_entries(n, b);
        for (i, m) in t.matrices().iter().enumerate() {
            // c = i (M H - H M), using the sparsity of H
            c.fill(C64::new(0.0, 0.0));
            for &(p, q, h) in &entries {
                for r in 0..n {
                    c[(r, q)] += m[(r, p)] * h;
                    c[(p, r)] -= h * m[(q, r)];
                }
            }
            c *= C64::new(0.0, 1.0);
            hermitian_coords(&c, &mut coords);
            stacked.view_mut((i * vars, b), (vars, 1)).copy_from_slice(&coords);
        }
    }

    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = rank_tol * sigma_max;
    let mut null: Vec<usize> = (0..vars).filter(|&k| svd.singular_values[k] <= cutoff).collect();
    // deterministic basis order: smallest singular value first
    null.sort_by(|&a, &b| {
        svd.singular_values[a]
            .total_cmp(&svd.singular_values[b])
            .then(a.cmp(&b))
    });
    null.into_iter()
        .map(|k| {
            let x: Vec<f64> = v_t.row(k).iter().copied().collect();
            hermitian_from_coords(n, &x)
        })
        .collect()
}

/// Splits C^n by the spectral projections of a random Hermitian commutant
/// element and checks each piece is minimal (the commutant compresses to
/// scalars on it).
fn minimal_blocks(n: usize, basis: &[ComplexMatrix], gap: f64) -> Result<Vec<usize>> {
    for attempt in 0..SPLIT_ATTEMPTS {
        let mut r = rng(SPLIT_SEED + attempt as u64);
        let mut h = ComplexMatrix::zeros(n, n);
        for b in basis {
            let c: f64 = r.sample(StandardNormal);
            h += b * real(c);
        }
        let (values, vectors) = hermitian_eigen(&h);

        let mut clusters: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for k in 1..=n {
            if k == n || values[k] - values[k - 1] >= gap {
                clusters.push((start, k - start));
                start = k;
            }
        }

        let minimal = clusters.iter().all(|&(s, len)| {
            let q = vectors.columns(s, len);
            basis.iter().all(|b| {
                let c = q.adjoint() * b * q;
                let mean = c.trace() / real(len as f64);
                (c - ComplexMatrix::identity(len, len) * mean).norm() <= gap
            })
        });
        if minimal {
            let mut dims: Vec<usize> = clusters.into_iter().map(|(_, len)| len).collect();
            dims.sort_unstable();
            return Ok(dims);
        }
    }
    Err(Error::DegenerateSplitting {
        attempts: SPLIT_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_hermitian, identity};

    #[test]
    fn basis_is_trace_orthonormal() {
        let n = 4;
        let mats: Vec<ComplexMatrix> = (0..n * n)
            .map(|b| {
                let mut x = vec![0.0; n * n];
                x[b] = 1.0;
                hermitian_from_coords(n, &x)
            })
            .collect();
        for (a, ma) in mats.iter().enumerate() {
            let mut coords = vec![0.0; n * n];
            hermitian_coords(ma, &mut coords);
            for (b, mb) in mats.iter().enumerate() {
                let ip = (ma.adjoint() * mb).trace();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ip - real(expected)).norm() < 1e-15);
                assert!((coords[b] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_commutes_with_everything() {
        let t = SelfAdjointTuple::new(vec![identity(3)], 0.0).unwrap();
        let r = commutant(&t, 1e-8).unwrap();
        assert_eq!(r.commutant_dim, 9);
        assert_eq!(r.minimal_block_dims, vec![1, 1, 1]);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn generic_pair_is_irreducible() {
        let mut g = rng(3);
        let t = SelfAdjointTuple::new(
            vec![gaussian_hermitian(5, 1.0, &mut g), gaussian_hermitian(5, 1.0, &mut g)],
            1e-12,
        )
        .unwrap();
        let r = commutant(&t, 1e-8).unwrap();
        assert_eq!(r.commutant_dim, 1);
        assert_eq!(r.minimal_block_dims, vec![5]);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn repeated_eigenvalue_gives_matrix_block() {
        // diag(1, 1, 2): commutant M_2 (+) C, minimal blocks all 1-dimensional
        let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![real(1.0), real(1.0), real(2.0)]));
        let r = commutant(&SelfAdjointTuple::new(vec![d], 0.0).unwrap(), 1e-8).unwrap();
        assert_eq!(r.commutant_dim, 5);
        assert_eq!(r.minimal_block_dims, vec![1, 1, 1]);
    }

    #[test]
    fn size_limit_is_enforced() {
        let t = SelfAdjointTuple::zeros(1, 65);
        assert!(matches!(
            commutant(&t, 1e-8),
            Err(Error::CommutantTooLarge { dim: 65, max_dim: 64 })
        ));
    }
}
