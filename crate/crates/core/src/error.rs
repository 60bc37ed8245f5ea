use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("Aubry set is empty (tolerance too tight for this cost)")]
    EmptyAubrySet,

    #[error("state {state} is not in the Aubry set")]
    NotInAubrySet { state: usize },

    #[error("potential is not a weak KAM solution (residual {residual:e})")]
    NotWeakKam { residual: f64 },

    #[error("potential is not a subsolution (worst violation {violation:e})")]
    NotSubsolution { violation: f64 },

    #[error("comparison principle violated at state {state} (u - v = {gap:e})")]
    ComparisonViolated { state: usize, gap: f64 },

    #[error("Peierls barrier disagrees with the liminf oracle by {gap:e}")]
    BarrierOracleMismatch { gap: f64 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex exceeded {0} pivots")]
    LpIterationLimit(usize),

    #[error("cycle enumeration capped at {cap} states, model has {n}")]
    CycleCapExceeded { n: usize, cap: usize },

    #[error("empty Mather vertex list")]
    EmptyVertexList,

    #[error("lambda {lambda} outside (0, {lambda_max})")]
    InvalidLambda { lambda: f64, lambda_max: f64 },

    #[error("v-Lipschitz constant {kappa_v} must be < 1")]
    InvalidKappa { kappa_v: f64 },

    #[error("inner solve at state {state} did not converge after {iterations} steps (residual {residual:e})")]
    InnerNonConvergence {
        state: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("fixed-point iteration at lambda={lambda} did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence {
        lambda: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("monotone iteration broke order at step {step} by {amount:e}")]
    MonotonicityViolation { step: usize, amount: f64 },

    #[error("base cost is not critically normalized (c0 = {c0:e})")]
    NotNormalized { c0: f64 },

    #[error(
        "(l4) fails at Mather vertex {vertex} [{description}]: integral of Lambda = {value:e}"
    )]
    L4Violated {
        vertex: usize,
        description: String,
        value: f64,
    },

    #[error("vanishing-discount formulas disagree by {gap:e}")]
    FormulaMismatch { gap: f64 },

    #[error("result is not a fixed point of T0 (residual {residual:e})")]
    NotFixedPoint { residual: f64 },

    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),

    #[error("at lambda={lambda}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of a mathematical hypothesis ((l4), convergence),
    /// as opposed to malformed input.
    pub fn is_hypothesis_failure(&self) -> bool {
        match self {
            Error::L4Violated { .. }
            | Error::Unbounded
            | Error::NonConvergence { .. }
            | Error::InnerNonConvergence { .. }
            | Error::MonotonicityViolation { .. }
            | Error::FormulaMismatch { .. }
            | Error::NotFixedPoint { .. } => true,
            Error::AtLambda { source, .. } => source.is_hypothesis_failure(),
            _ => false,
        }
    }
}
