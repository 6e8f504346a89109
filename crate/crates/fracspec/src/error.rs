use thiserror::Error;

/// Every failure the library can surface.
///
/// The CLI maps [`Error::exit_code`] onto process status: configuration and
/// precondition problems exit with 2, numerical trouble with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level-1 cells {0} and {1} overlap; the open set condition fails")]
    OverlapDetected(usize, usize),

    #[error("similarity dimension d = {d} is outside (0, {n})")]
    DimensionOutOfRange { d: f64, n: usize },

    #[error("{atoms} atoms at level {level} exceed the atom budget of {budget}")]
    BudgetExceeded { level: usize, atoms: u128, budget: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("level-{level} cell diameter {cell} is too coarse for radius {radius}")]
    Resolution { level: usize, cell: f64, radius: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("energy fraction {fraction:e} lies beyond the last dyadic shell (limit 1e-8)")]
    BandOverflow { fraction: f64 },

    #[error("spectral mass fraction {fraction:e} lies beyond the frequency cutoff {cutoff}")]
    CutoffTooSmall { fraction: f64, cutoff: f64 },

    #[error("kernel singularity: radius {radius:e} is below the tabulation floor {floor:e}")]
    Singularity { radius: f64, floor: f64 },

    #[error("window violation: {0}")]
    WindowViolation(String),

    #[error("symbol order {declared} does not match the required order {required}")]
    SymbolOrderMismatch { declared: f64, required: f64 },

    #[error("symbol estimate unstable: {0}")]
    Instability(String),

    #[error("need at least {needed} nonzero eigenvalues, found {found}")]
    InsufficientSpectrum { needed: usize, found: usize },

    #[error("dimension {dim} is too large for brute-force covering (limit {limit})")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("eigensolver failed for {context}: {detail}")]
    Convergence { context: String, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status for this error: 2 for configuration or
    /// precondition failures, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Convergence { .. }
            | Error::Instability(_)
            | Error::Singularity { .. }
            | Error::BandOverflow { .. }
            | Error::CutoffTooSmall { .. }
            | Error::InsufficientSpectrum { .. } => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    /// Tags an error with the pipeline stage that raised it.
    pub fn at(stage: &str) -> impl FnOnce(Error) -> Error + '_ {
        move |e| Error::Stage { stage: stage.to_string(), source: Box::new(e) }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
