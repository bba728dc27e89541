use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Task coordinate `index` left the model's declared workspace.
    #[error("workspace violation: coordinate {index} = {value} outside [{lo}, {hi}]")]
    WorkspaceViolation { index: usize, value: f64, lo: f64, hi: f64 },

    /// A kinematic denominator or a Jacobian condition number crossed its threshold.
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    /// The closure equation has no real solution at the requested pose.
    #[error("unreachable pose: {0}")]
    Unreachable(String),

    #[error("branch jump on leg {leg}: |dq| = {jump} rad")]
    BranchJump { leg: usize, jump: f64 },

    #[error("insufficient samples: {rows} regressor rows for {params} parameters")]
    InsufficientSamples { rows: usize, params: usize },

    #[error("rank-deficient observation matrix: {0}")]
    RankDeficientObservation(String),

    #[error("rank-deficient least-squares problem: condition number {0:e}")]
    RankDeficient(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn singular(msg: impl Into<String>) -> Self {
        Error::SingularConfiguration(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
