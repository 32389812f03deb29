use thiserror::Error;

/// Errors raised by chain construction and the spectral analyses built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelaxError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("kernel entry ({row},{col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, not 1")]
    RowSumError { row: usize, sum: f64 },

    #[error("detailed balance fails at ({x},{y}): pi(x)P(x,y) = {forward}, pi(y)P(y,x) = {backward}")]
    NotReversible {
        x: usize,
        y: usize,
        forward: f64,
        backward: f64,
    },

    #[error("kernel is reducible: state {unreachable} is not mutually reachable from state 0")]
    Reducible { unreachable: usize },

    #[error("stationary mass at state {state} is degenerate ({value})")]
    DegeneratePi { state: usize, value: f64 },

    #[error("symmetric eigensolver failed: {0}")]
    EigensolveFailure(String),

    #[error("invalid size {0}")]
    InvalidSize(usize),

    #[error("laziness {0} outside (0, 1]")]
    InvalidLaziness(f64),

    #[error("no nonnegative kernel found for the requested spectrum after {attempts} attempts")]
    NonRealizable { attempts: usize },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("initial vector has no component outside the stationary mode")]
    ZeroProjection,

    #[error("invalid spectral profile: {0}")]
    InvalidProfile(String),

    #[error("trajectory energy vanished at step {k}")]
    DeadTrajectory { k: u64 },

    #[error("mode {index} is dead at step {k}")]
    DeadMode { index: usize, k: u64 },

    #[error("the slowest nontrivial mode (lambda = {lambda}) carries no weight")]
    NoSlowMode { lambda: f64 },

    #[error("invalid arguments: {0}")]
    InvalidArguments(String),

    #[error("energy sequence too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("precondition unmet: {0}")]
    PreconditionUnmet(String),

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    #[error("series did not converge: {0}")]
    NonConvergent(String),

    #[error("value {value} outside {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("invalid rho pair ({rho_k}, {rho_k1})")]
    InvalidRho { rho_k: f64, rho_k1: f64 },

    #[error("rho stream ended after {steps} steps without stopping")]
    StreamEnded { steps: usize },

    #[error("online separation estimate collapsed to {tau_hat} at step {k}")]
    TauCollapse { k: usize, tau_hat: f64 },

    #[error("invalid acceleration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    #[error("plan cannot purify: |Q(lambda2)| = {slow} <= fast contraction {fast}")]
    SlowModeSuppressed { slow: f64, fast: f64 },

    #[error("plan amplifies mode lambda = {lambda}: |Q| = {q} >= 1")]
    ModeAmplified { lambda: f64, q: f64 },

    #[error("invalid state {state} for a chain with {n} states")]
    InvalidState { state: usize, n: usize },

    #[error("bad start distribution: {0}")]
    BadStart(String),
}

pub type Result<T> = std::result::Result<T, RelaxError>;
