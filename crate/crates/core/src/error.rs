use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("spectral measure is degenerate: {0}")]
    DegenerateMeasure(String),
    #[error("spectral measure is not symmetric: {0}")]
    AsymmetricMeasure(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {0} is not supported here")]
    UnsupportedDimension(usize),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("frequency cutoff cannot meet the tail bound: {0}")]
    CutoffTooSmall(String),
    #[error("quadrature budget exceeded: {0}")]
    QuadratureBudgetExceeded(String),
    #[error("radial integral diverges: {0}")]
    DivergentIntegral(String),
    #[error("generator integral not integrable at the origin: {0}")]
    NonIntegrableAtOrigin(String),
    #[error("diagnostic not applicable: {0}")]
    NotApplicable(String),
    #[error("fixed-point iteration is not contracting: {0}")]
    NoContraction(String),
    #[error("gradient threshold not reached: {0}")]
    ThresholdNotReached(String),
    #[error("contraction violated: {0}")]
    ContractionViolated(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("state left the lattice box: {0}")]
    BoxExceeded(String),
    #[error("transform is not invertible: {0}")]
    NotInvertible(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

/// Names the pipeline stage in a propagated error.
pub trait StageContext<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| Error::Stage { stage: stage.to_string(), source: Box::new(e) })
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
