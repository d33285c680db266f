use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("all singular values are below the cutoff")]
    RankZero,
    #[error("evaluation point {0} lies in the spectrum")]
    SpectrumHit(String),
    #[error("output feedback is not admissible: I + DK is singular")]
    FeedbackNotAdmissible,
    #[error("inner matrix of the Woodbury formula is singular")]
    InnerSingular,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("controller gain matrix is singular")]
    SingularGain,
    #[error("evaluation point is a pole")]
    PoleHit,
    #[error("frequency {0} is not retained by the controller")]
    ModeNotRetained(f64),
    #[error("feedthrough loop I + D D_c is singular")]
    FeedthroughLoopSingular,
    #[error("fewer than {needed} usable local maxima (found {found})")]
    InsufficientPeaks { needed: usize, found: usize },
    #[error("frequency {0} lies outside the tabulated range")]
    OutOfTable(f64),
    #[error("value {0} lies outside the invertible range")]
    OutOfRange(f64),
    #[error("sliding window is longer than the trajectory")]
    WindowExceedsTrajectory,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("plant has a transmission zero at frequency {0}")]
    TransmissionZero(f64),
    #[error("linear system is inconsistent (residual {0:e})")]
    InconsistentSystem(f64),
    #[error("implicit step matrix is singular")]
    StepMatrixSingular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
