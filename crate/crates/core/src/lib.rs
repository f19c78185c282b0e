//! Continuous-time point cloud interpolation with a per-sequence neural
//! motion field, fitted at runtime on each window of input frames.

pub mod autodiff;
pub mod baselines;
pub mod cloud;
pub mod data;
mod error;
pub mod evaluation;
pub mod field;
pub mod geometry;
pub mod losses;
pub mod optimize;

pub use cloud::{InputWindow, Normalization, Point3, PointCloud, TimeAxis};
pub use error::{Error, Result};
pub use field::{FieldConfig, NeuralField};
pub use losses::{LossBreakdown, LossConfig};
