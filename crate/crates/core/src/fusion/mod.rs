//! TSDF fusion, surface extraction and evaluation.

mod kdtree;
pub mod marching_cubes;
pub mod metrics;
mod tsdf;

pub use kdtree::KdTree;
pub use marching_cubes::extract_mesh;
pub use metrics::{chamfer_distance, evaluate, fscore, EvalReport, MetricError};
pub use tsdf::TsdfVolume;
