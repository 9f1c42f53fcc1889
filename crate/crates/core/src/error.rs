use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation angle {angle} is too close to pi for a stable logarithm")]
    AngleNearPi { angle: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("no point pairs within the kernel support radius ({radius} m)")]
    EmptyPairSet { radius: f64 },

    #[error("registration failed: {0}")]
    RegistrationFailed(String),

    #[error("tolerance {tolerance} is not achievable for order {order} with s in (0, {s_max}]")]
    NotAchievable { order: u32, tolerance: f64, s_max: f64 },

    #[error("only {found} usable points selected (need at least {required})")]
    InsufficientPoints { found: usize, required: usize },

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("fewer than two matched intervals ({intervals}) for relative pose error")]
    NoOverlap { intervals: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[cfg(feature = "imaging")]
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
