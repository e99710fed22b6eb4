use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} samples, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("radius {r} exceeds the admissible limit {limit}")]
    RadiusTooLarge { r: f64, limit: f64 },

    #[error("negative exponent {s} applied to a field with nonzero mean {mean}")]
    NonzeroMean { s: f64, mean: f64 },

    #[error("unknown generator kind `{0}`")]
    UnknownGenerator(String),

    #[error("CFL violation at t = {t}: dt = {dt} exceeds limit {limit}")]
    Cfl { t: f64, dt: f64, limit: f64 },

    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { t: f64, what: &'static str },

    #[error("invalid exponent pair: {0}")]
    InvalidExponents(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("snapshot format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unsupported snapshot version {found} in {path} (supported: {supported})")]
    UnsupportedVersion {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Cfl { .. } | Error::NonFinite { .. })
    }
}
