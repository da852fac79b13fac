use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not self-adjoint (max deviation {deviation:e})")]
    NotSelfAdjoint { deviation: f64 },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("not an isometry: |V*V - I| = {residual:e}")]
    NotIsometry { residual: f64 },

    #[error("not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("not a contraction: |W| = {norm}")]
    NotContraction { norm: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("level {level} outside 1..={max_level}")]
    LevelOutOfRange { level: usize, max_level: usize },

    #[error("tail bounds are not available for model kind `{0}`")]
    UnsupportedKind(&'static str),

    #[error("commutant requested for dimension {dim}, limit is {max_dim}")]
    CommutantTooLarge { dim: usize, max_dim: usize },

    #[error("random commutant element failed to split into minimal blocks after {attempts} attempts")]
    DegenerateSplitting { attempts: usize },

    #[error("sequence entries {i} and {j} have colliding absolute values ({a} vs {b})")]
    CollidingMagnitudes { i: usize, j: usize, a: f64, b: f64 },

    #[error("sequence entry {index} is zero or below the distinctness tolerance ({value})")]
    VanishingEntry { index: usize, value: f64 },

    #[error("no admissible angle found among {tried} scan points")]
    NoAdmissibleShift { tried: usize },

    #[error("no finite-interior witness found for d <= {d_max} (best residual {best:e}){note}")]
    NoWitness { d_max: usize, best: f64, note: String },

    #[error("witness residual {residual:e} exceeds the requested tolerance {tol:e}")]
    WitnessTooWeak { residual: f64, tol: f64 },

    #[error("coefficients do not form a partition of identity: |sum V*V - I| = {residual:e}")]
    PartitionOfIdentity { residual: f64 },

    #[error("sample system is singular or ill-conditioned (condition number {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("samples are not consistent with an affine map (misfit {residual:e})")]
    NotAffine { residual: f64 },

    #[error("pencil must be {0}")]
    PencilShape(&'static str),

    #[error("subspace is not invariant (leakage {residual:e})")]
    NotInvariant { residual: f64 },

    #[error("assertion failed: {0}")]
    AssertionFailed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
