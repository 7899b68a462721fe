use thiserror::Error;

/// Errors raised by the estimation pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a numerical primitive.
    #[error("domain error in {function}: {detail}")]
    Domain {
        function: &'static str,
        detail: String,
    },

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed or out-of-range input file contents.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Every grid point of the deviance path had an empty null subset.
    #[error("pi0 estimation failed: {0}")]
    Estimation(String),

    /// The nonnull density is undefined when the estimated null proportion is one.
    #[error("no signal: estimated pi0 is 1, nonnull density is undefined")]
    NoSignal,

    #[error("simulation harness: {0}")]
    Harness(String),

    /// Wraps a failure with the pipeline step that produced it.
    #[error("step {step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            function,
            detail: detail.into(),
        }
    }

    pub(crate) fn at_step(self, step: &'static str) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }

    /// The pipeline step label, if the error was raised inside `fit_cdfdr`.
    pub fn step(&self) -> Option<&'static str> {
        match self {
            Error::Step { step, .. } => Some(step),
            _ => None,
        }
    }

    /// Process exit status: 2 for bad input or configuration, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Step { source, .. } => source.exit_code(),
            Error::Config(_) | Error::Input(_) | Error::Io { .. } | Error::InsufficientData { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
