use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter is outside its admissible range.
    #[error("invalid parameter {name}: {value} violates {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// A parameter sits exactly on an excluded value (e.g. `H = 1/2`).
    #[error("singular parameter {name} = {value}: {detail}")]
    SingularParameter {
        name: &'static str,
        value: f64,
        detail: &'static str,
    },

    /// Mismatched array dimensions or an index outside a table.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Inconsistent configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// A quadrature did not reach the requested accuracy.
    #[error("quadrature did not converge: requested {requested}, achieved {achieved} (estimate {estimate})")]
    QuadratureAccuracy {
        requested: f64,
        achieved: f64,
        estimate: f64,
    },

    /// Root bracketing failed for the saddle-point equation.
    #[error("failed to bracket the saddle-point root: psi_n' stayed below {target} on (0, {scanned_to}]")]
    BracketFailure { target: f64, scanned_to: f64 },

    /// The root solver exhausted its iteration budget.
    #[error("root solver did not converge within {iterations} iterations (residual {residual})")]
    SolverConvergence { iterations: usize, residual: f64 },

    /// The symmetric mixture family cannot satisfy the requested moment set.
    #[error("moment matching infeasible for kappa={kappa}: achieved moments {achieved:?}")]
    MomentMatchInfeasible { kappa: u32, achieved: Vec<f64> },

    /// Too few samples for an estimator.
    #[error("estimator needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// No in-event sample is available for a conditional estimator.
    #[error("no in-event samples: {0}")]
    NoInEventSamples(String),

    /// Rejection sampling exhausted its budget without an acceptance.
    #[error("rejection sampling exhausted budget {budget} with zero acceptances (rate < {rate_bound:.3e} at 95% confidence)")]
    RejectionExhausted { budget: usize, rate_bound: f64 },

    /// An empirical law was empty or otherwise unusable.
    #[error("empirical law error: {0}")]
    EmptyLaw(String),

    /// A law contains values outside the domain required by a statistic.
    #[error("law support error: {0}")]
    LawSupport(String),

    /// Circulant embedding produced genuinely negative eigenvalues and the
    /// dense fallback is too large.
    #[error("fBM sampling failed: {0}")]
    FbmResource(String),

    /// The hitting-time scan exceeded the hard horizon cap.
    #[error("no barrier hit within {cap_units} limiting-time units (T0 = {t0})")]
    HorizonCap { cap_units: f64, t0: f64 },

    /// I/O failure while writing reports or plot data.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Config file parse failure.
    #[error("config parse error: {0}")]
    ConfigParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
