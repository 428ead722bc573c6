use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty measure")]
    EmptyMeasure,

    #[error("ellipticity violated at node {node}: min eigenvalue {min_eig:.3e} < {threshold:.3e}")]
    Ellipticity {
        node: usize,
        min_eig: f64,
        threshold: f64,
    },

    #[error("centering condition fails: |<f, pi>| = {residual:.3e} exceeds {tolerance:.3e}")]
    Centering { residual: f64, tolerance: f64 },

    #[error("{what} failed to converge (residual {residual:.3e})")]
    SolverFailure { what: &'static str, residual: f64 },

    #[error("ill-conditioned system in {what}: condition estimate {condition:.3e}")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("invariant density has negative value {value:.3e} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    Asymmetric { asymmetry: f64 },

    #[error("matrix is indefinite (eigenvalue {eigenvalue:.3e})")]
    Indefinite { eigenvalue: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("x-dependent coefficients require parameter derivatives of the cell solution")]
    MissingXDerivatives,

    #[error("time step {dt:.3e} violates dt <= {c_stiff}*eps^2 for eps = {epsilon}; use dt <= {suggested:.3e}")]
    Stiffness {
        dt: f64,
        epsilon: f64,
        c_stiff: f64,
        suggested: f64,
    },

    #[error("particle {particle} left the finite range at step {step} (t = {time:.4})")]
    Blowup {
        particle: u64,
        step: u64,
        time: f64,
    },

    #[error("fourth empirical moment {moment:.3e} exceeded cap {cap:.3e} at t = {time:.4}")]
    MomentCap { moment: f64, cap: f64, time: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Validation errors map to exit code 2, numerical failures to 3.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::Stiffness { .. }
            | Error::Config { .. }
            | Error::UnknownScenario(_)
            | Error::GridMismatch(_)
            | Error::MissingXDerivatives => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
