pub mod barriers;
pub mod certify;
pub mod error;
pub mod geom;
pub mod lagrangian;
pub mod mesh;
pub mod nonconvex;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod smoothing;
pub mod solver;

pub use error::{Error, Result};
