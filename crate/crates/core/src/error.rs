use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular or numerically singular ({0})")]
    SingularMatrix(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("adjugate is not rank one (relative deviation {0:.3e})")]
    RankTestFailure(f64),

    #[error("B is identically zero; rank classification is undefined")]
    DegenerateB,

    #[error("model is not rank one (neither P nor B factors)")]
    NotRankOne,

    #[error("operation requires Case (P): all columns of P equal")]
    NotCaseP,

    #[error("state vector required for Case (B) dwell times")]
    MissingState,

    #[error("basic reproduction number {0} is not above threshold")]
    BelowThreshold(f64),

    #[error("could not bracket a root of H(k) = 1: {0}")]
    NoBracket(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("A_S must be a negative diagonal matrix")]
    NonDiagonalAS,

    #[error("state must be strictly positive ({0})")]
    NonPositiveState(String),

    #[error("V is not an M-matrix with nonnegative inverse (entry {0:.3e})")]
    NotRegularSplitting(f64),

    #[error("positivity violated at t = {t}: component {index} = {value:.3e}")]
    PositivityViolation { t: f64, index: usize, value: f64 },

    #[error("adaptive step underflow at t = {0}")]
    StepUnderflow(f64),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("rate on line {0} must be a positive number")]
    NegativeRate(usize),

    #[error("unknown species '{name}' on line {line}")]
    UnknownSpecies { line: usize, name: String },

    #[error("too many species for exact siphon enumeration ({0} > {1})")]
    TooManySpecies(usize, usize),

    #[error("face is not forward invariant (max |f_sigma| = {0:.3e})")]
    NotInvariantFace(f64),

    #[error("state is not an equilibrium (residual {0:.3e})")]
    NotEquilibrium(f64),

    #[error("right-hand side is not balanced bilinear (residual {0:.3e})")]
    NotBalancedBilinear(f64),

    #[error("invalid model: {0}")]
    InvalidModel(String),
}
