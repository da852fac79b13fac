//! Dense complex-matrix kernel: Kronecker and direct-sum algebra,
//! compressions, PSD tests, isometries and commutants.

mod commutant;
mod tuple;

pub use commutant::{commutant, commutant_with, CommutantOptions, CommutantReport};
pub use tuple::SelfAdjointTuple;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

pub const DEFAULT_PROBE_TRIALS: usize = 8;

/// Seeded generator used for every random draw in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Standard basis column e_k of C^n (0-based k).
pub fn basis_vector(n: usize, k: usize) -> ComplexMatrix {
    let mut e = ComplexMatrix::zeros(n, 1);
    e[(k, 0)] = real(1.0);
    e
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn symmetrize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * real(0.5)
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn op_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `|V*V - I|` in operator norm.
pub fn isometry_residual(v: &ComplexMatrix) -> f64 {
    op_norm(&(v.adjoint() * v - identity(v.ncols())))
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
/// Only the Hermitian part of `m` is used.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(m.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn require_hermitian(h: &ComplexMatrix, herm_tol: f64) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let deviation = hermitian_deviation(h);
    if deviation > herm_tol * (1.0 + max_abs(h)) {
        return Err(Error::NotSelfAdjoint { deviation });
    }
    Ok(())
}

/// `lambda_min(H) >= -tol`. The self-adjointness check is relative to the
/// largest entry of `H`.
pub fn is_psd(h: &ComplexMatrix, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(h)? >= -tol)
}

pub fn min_eigenvalue(h: &ComplexMatrix) -> Result<f64> {
    require_hermitian(h, 1e-12)?;
    Ok(hermitian_eigenvalues(h).first().copied().unwrap_or(0.0))
}

/// Principal square root of a PSD matrix. Eigenvalues in
/// `[-1e-10 (1 + |H|), 64 eps |H|]` are treated as zero; anything more
/// negative is an error.
pub fn sqrt_psd(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_hermitian(h, 1e-12)?;
    let (values, q) = hermitian_eigen(h);
    let scale = values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let floor = -1e-10 * (1.0 + scale);
    if let Some(&worst) = values.first() {
        if worst < floor {
            return Err(Error::NotPsd { min_eigenvalue: worst });
        }
    }
    // eigenvalues at roundoff level are zeros; their square roots would not be
    let noise = 64.0 * f64::EPSILON * scale;
    let mut scaled = q.clone();
    for (j, &lam) in values.iter().enumerate() {
        let s = real(if lam <= noise { 0.0 } else { lam.sqrt() });
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    Ok(symmetrize(&(scaled * q.adjoint())))
}

/// Block-diagonal matrix with the given blocks.
pub fn block_diag(blocks: &[&ComplexMatrix]) -> ComplexMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Coordinate-wise direct sum.
pub fn direct_sum(tuples: &[&SelfAdjointTuple]) -> Result<SelfAdjointTuple> {
    let first = tuples
        .first()
        .ok_or_else(|| Error::InvalidArgument("direct sum of an empty list".into()))?;
    let g = first.g();
    if let Some(bad) = tuples.iter().find(|t| t.g() != g) {
        return Err(Error::DimensionMismatch(format!(
            "direct sum of tuples with g={g} and g={}",
            bad.g()
        )));
    }
    let coords = (0..g)
        .map(|i| block_diag(&tuples.iter().map(|t| t.coord(i)).collect::<Vec<_>>()))
        .collect();
    SelfAdjointTuple::new(coords, 0.0)
}

/// `(V* Y_1 V, ..., V* Y_g V)`, re-symmetrized.
pub fn compress(y: &SelfAdjointTuple, v: &ComplexMatrix) -> Result<SelfAdjointTuple> {
    if v.nrows() != y.dim() {
        return Err(Error::DimensionMismatch(format!(
            "compression by a {}x{} matrix of a tuple of dimension {}",
            v.nrows(),
            v.ncols(),
            y.dim()
        )));
    }
    let vh = v.adjoint();
    SelfAdjointTuple::symmetrized(y.matrices().iter().map(|m| &vh * m * v).collect())
}

/// Permutation `p` with `kron(A, B_1 (+) ... (+) B_k)` row/column `i` equal to
/// row/column `p[i]` of `kron(A, B_1) (+) ... (+) kron(A, B_k)`, for `A`
/// of size `d` and blocks of sizes `dims`.
pub fn shuffle_permutation(d: usize, dims: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().sum();
    let mut perm = vec![0; d * total];
    let mut inner_offset = 0;
    let mut outer_offset = 0;
    for &k in dims {
        for a in 0..d {
            for y in 0..k {
                perm[a * total + inner_offset + y] = outer_offset + a * k + y;
            }
        }
        inner_offset += k;
        outer_offset += d * k;
    }
    perm
}

/// Matrix `P` with `P[perm[i], i] = 1`, so `P M P^T` relabels index `i` as `perm[i]`.
pub fn permutation_matrix(perm: &[usize]) -> ComplexMatrix {
    let n = perm.len();
    let mut p = ComplexMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        p[(j, i)] = real(1.0);
    }
    p
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Random Hermitian matrix with GUE-like entries scaled by `scale`.
pub fn gaussian_hermitian<R: Rng>(n: usize, scale: f64, rng: &mut R) -> ComplexMatrix {
    symmetrize(&gaussian_matrix(n, n, rng)) * real(scale)
}

/// Seeded `n_to x n_from` isometry: Gaussian columns orthonormalized by QR.
pub fn random_isometry(n_from: usize, n_to: usize, seed: u64) -> Result<ComplexMatrix> {
    if n_from == 0 || n_from > n_to {
        return Err(Error::InvalidArgument(format!(
            "isometry from C^{n_from} into C^{n_to} does not exist"
        )));
    }
    let g = gaussian_matrix(n_to, n_from, &mut rng(seed));
    Ok(g.qr().q())
}

/// Seeded unitary of size n.
pub fn random_unitary(n: usize, seed: u64) -> ComplexMatrix {
    random_isometry(n, n, seed).expect("square isometry always exists")
}

/// Extends an isometry `V` (n x k) to a unitary `[V | V_perp]`.
///
/// The first k columns of the result are copied from `V` bit for bit. The
/// complement spans the kernel of `V V*`, taken from its eigenvectors and
/// re-orthonormalized against `V`.
pub fn complete_to_unitary(v: &ComplexMatrix, iso_tol: f64) -> Result<ComplexMatrix> {
    let (n, k) = v.shape();
    let residual = isometry_residual(v);
    if k > n || residual > iso_tol {
        return Err(Error::NotIsometry { residual });
    }
    if k == n {
        return Ok(v.clone());
    }
    let (_, eigvecs) = hermitian_eigen(&(v * v.adjoint()));
    let mut comp = eigvecs.columns(0, n - k).into_owned();
    comp -= v * (v.adjoint() * &comp);
    let comp = comp.qr().q();

    let mut u = ComplexMatrix::zeros(n, n);
    u.columns_mut(0, k).copy_from(v);
    u.columns_mut(k, n - k).copy_from(&comp);
    let residual = isometry_residual(&u);
    if residual > 1e-10 {
        return Err(Error::NotIsometry { residual });
    }
    Ok(u)
}

/// One-sided unitary-equivalence test.
///
/// Returns `false` when the tuples are provably inequivalent: dimensions or
/// g differ, or the spectra of `sum c_i Y_i` and `sum c_i Z_i` disagree by
/// more than `tol` for some seeded real coefficient vector `c`. A `true`
/// answer only means no trial told them apart.
pub fn equivalence_probe(y: &SelfAdjointTuple, z: &SelfAdjointTuple, trials: usize, tol: f64) -> bool {
    if y.g() != z.g() || y.dim() != z.dim() {
        return false;
    }
    let mut r = rng(0x00e9_u64 ^ (y.g() as u64) << 16);
    (0..trials).all(|_| {
        let c: Vec<f64> = (0..y.g()).map(|_| r.sample(StandardNormal)).collect();
        let a = hermitian_eigenvalues(&y.combination(&c));
        let b = hermitian_eigenvalues(&z.combination(&c));
        a.iter().zip(&b).all(|(p, q)| (p - q).abs() <= tol)
    })
}
