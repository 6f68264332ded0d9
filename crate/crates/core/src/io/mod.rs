//! Interchange formats: PFM depth maps, PLY clouds and meshes, and the
//! COLMAP text model.

pub mod colmap;
pub mod pfm;
pub mod ply;

pub use colmap::{parse_colmap_model, read_colmap_model, write_colmap_model, SparseModel, SparsePoint};
pub use pfm::{read_pfm, write_pfm};
pub use ply::{read_ply_mesh, read_ply_points, write_ply_mesh, write_ply_points, TriangleMesh};

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed PFM header: {0}")]
    PfmHeader(String),
    #[error("PFM payload truncated: expected {expected} bytes, found {actual}")]
    PfmTruncated { expected: usize, actual: usize },
    #[error("color PFM (\"PF\") is not supported")]
    PfmColor,
    #[error("PLY parse error: {0}")]
    Ply(String),
    #[error("{file}:{line}: {msg}")]
    Colmap { file: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|source| IoError::File { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(path, bytes).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn load_pfm(path: &Path) -> Result<crate::depth_map::DepthMap, IoError> {
    read_pfm(&read_file(path)?)
}

pub fn save_pfm(path: &Path, map: &crate::depth_map::DepthMap) -> Result<(), IoError> {
    write_file(path, &write_pfm(map))
}
