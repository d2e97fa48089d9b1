use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dual box too small: need half-widths at least ({need_x:.6}, {need_y:.6})")]
    DualBoxTooSmall { need_x: f64, need_y: f64 },

    #[error("lagrangian is not convex on the working box (worst midpoint defect {defect:.3e}); pass its convexification instead")]
    NotConvex { defect: f64 },

    #[error("lower bounded slope condition fails at boundary sample {index} (minimal slope {minimal:?})")]
    LbscFailed { index: usize, minimal: Option<f64> },

    #[error("energy increased at an accepted step ({before:.17e} -> {after:.17e})")]
    EnergyIncrease { before: f64, after: f64 },

    #[error("relaxed-energy inequality violated on {} triangles (excess {excess:.3e})", triangles.len())]
    EnergyIncreased { triangles: Vec<usize>, excess: f64 },

    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
