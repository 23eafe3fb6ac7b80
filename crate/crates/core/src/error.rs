use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("negative rainfall at location {location}, day {day}: {value}")]
    NegativeRainfall { location: usize, day: usize, value: f64 },
    #[error("non-finite rainfall at location {location}, day {day}")]
    NonFiniteRainfall { location: usize, day: usize },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid calendar: {0}")]
    Calendar(String),
    #[error("at least two years are required to classify years, got {0}")]
    TooFewYears(usize),
    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),
    #[error("no labels to estimate transitions over")]
    NoLabels,
    #[error("missing region masks for family assignment of label {0}")]
    MissingMasks(usize),
    #[error("spell sets have different scales")]
    ScaleMismatch,
    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),
}
