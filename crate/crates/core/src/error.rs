use thiserror::Error;

/// Errors raised by scenario validation and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("kernel row not stochastic: type {ty}, state {state}, action {action}: sum {sum} (t={t})")]
    KernelNotStochastic {
        ty: usize,
        state: usize,
        action: usize,
        t: f64,
        sum: f64,
    },
    #[error("generator row does not sum to zero: type {ty}, state {state}, action {action}: sum {sum} (t={t})")]
    GeneratorRowSum {
        ty: usize,
        state: usize,
        action: usize,
        t: f64,
        sum: f64,
    },
    #[error("negative transition entry {value} at type {ty}, state {state}, action {action}, target {target}")]
    NegativeEntry {
        ty: usize,
        state: usize,
        action: usize,
        target: usize,
        value: f64,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty action set for type {ty}, state {state}")]
    EmptyActionSet { ty: usize, state: usize },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("negative mass {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("masses sum to {sum}, outside tolerance {tolerance}")]
    NotNormalized { sum: f64, tolerance: f64 },
    #[error("kernel mode mismatch: expected {expected}, found {found}")]
    ModeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("negative switching rate {value} from {from} to {to}")]
    NegativeRate { from: usize, to: usize, value: f64 },
    #[error("unknown revision protocol `{0}`")]
    UnknownProtocol(String),
    #[error("integration unstable at t={t}: |m| reached {value}")]
    StepUnstable { t: f64, value: f64 },
    #[error("non-finite value at stage {stage}, type {ty}, state {state}")]
    NonFiniteValue { stage: usize, ty: usize, state: usize },
    #[error("exponent {exponent} overflows raw-space risk-sensitive recursion")]
    Overflow { exponent: f64 },
    #[error("enumeration too large: {paths} paths exceed the limit {limit}")]
    TooLarge { paths: f64, limit: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("explicit mean-field drift disagrees with the generator by {gap}")]
    DriftGeneratorMismatch { gap: f64 },
    #[error("simplex grid supports at most 4 states, got {0}")]
    StateTooLarge(usize),
    #[error("Euler step leaves the simplex by {excess} at t={t}")]
    OffSimplexStep { t: f64, excess: f64 },
    #[error("rest-point search did not converge from seed {seed}: residual {residual}")]
    NoConvergence { seed: usize, residual: f64 },
    #[error("fixed point not converged after {iterations} iterations: residual {residual}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid probability {value} for {what}")]
    InvalidProbability { what: String, value: f64 },
    #[error("scenario file: {}field `{field}`: {message}", line.map(|l| format!("line {l}, ")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        field: String,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
