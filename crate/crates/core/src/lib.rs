//! Sparse-anchor depth correction and dense geometry initialization.
//!
//! Per-view depth predictions from two modalities are aligned to sparse SfM
//! anchors, refined by a pixel-wise affine correction field, filtered by
//! view-to-view reprojection cycles, and fused into a TSDF mesh.

pub mod align;
pub mod config;
pub mod dense;
pub mod depth_map;
pub mod field;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use depth_map::DepthMap;
pub use geometry::{CameraIntrinsics, CameraPose, PixelCoord, Vec3, View};
