use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid too coarse: packet width {width:.4e} spans fewer than 4 grid spacings ({spacing:.4e})")]
    GridTooCoarse { width: f64, spacing: f64 },

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("state is not normalized (norm {norm:.12})")]
    NotNormalized { norm: f64 },

    #[error("potential for spin projection m = {m} is flat; no bound ground state")]
    UnboundPotential { m: f64 },

    #[error("kick count must be an integer for Floquet evolution, got {0}")]
    NonIntegerKick(f64),

    #[error("time step {dt:.3e} too large: {reason}")]
    StepTooLarge { dt: f64, reason: String },

    #[error("coefficient table of {entries} entries exceeds budget of {budget}")]
    BudgetExceeded { entries: usize, budget: usize },

    #[error("fit window holds {points} usable points; at least 5 are required")]
    DegenerateWindow { points: usize },

    #[error("time samples are not uniformly spaced")]
    NonUniformSampling,

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("failed to converge: {0}")]
    Convergence(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures of an iterative or numerical procedure, as opposed to
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Eigensolver(_) | Error::Convergence(_))
    }
}
