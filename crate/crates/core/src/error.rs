use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integration failed: non-finite derivative at state {state:?} (t = {t})")]
    Integration { state: Vec<f64>, t: f64 },

    #[error("system {system} diverged at step {step}")]
    Divergence { system: String, step: usize },

    #[error("dimension {dim} is constant ({value}); cannot min-max normalize")]
    DegenerateNormalization { dim: usize, value: f64 },

    #[error("shape mismatch in {op}: {a:?} vs {b:?}")]
    Shape {
        op: &'static str,
        a: Vec<usize>,
        b: Vec<usize>,
    },

    #[error("sequence length {len} exceeds the model maximum {max}")]
    SequenceLength { len: usize, max: usize },

    #[error("non-finite gradient for parameter {param}")]
    Optimizer { param: String },

    #[error("non-finite training loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("ridge system is singular; use a positive regularization coefficient (beta > 0)")]
    Regularization,

    #[error("reservoir recurrence matrix has no nonzero entries (size {size}, link probability {link_prob})")]
    DegenerateReservoir { size: usize, link_prob: f64 },

    #[error("insufficient training data: {0}")]
    InsufficientData(String),

    #[error("metric undefined on empty input")]
    EmptyMetric,

    #[error("window mismatch: {0} vs {1} rows")]
    WindowMismatch(usize, usize),

    #[error("all {trials} search trials failed")]
    SearchExhausted { trials: usize },

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures map to exit code 3, everything else to 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. }
                | Error::Divergence { .. }
                | Error::DegenerateNormalization { .. }
                | Error::Optimizer { .. }
                | Error::NonFiniteLoss { .. }
                | Error::Regularization
                | Error::DegenerateReservoir { .. }
        )
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }
}
