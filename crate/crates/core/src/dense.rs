//! Dense point cloud from corrected depths, filtered by view-to-view
//! reprojection cycles and voxel-downsampled.

use crate::depth_map::DepthMap;
use crate::geometry::{PixelCoord, Vec3, View};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenseError {
    #[error("reprojection filtering needs at least 2 views, got {0}")]
    TooFewViews(usize),
    #[error("neighbor count must be >= 1")]
    ZeroNeighbors,
    #[error("voxel size must be positive, got {0}")]
    VoxelSize(f64),
    #[error("{0} views but {1} depth maps")]
    ViewCount(usize, usize),
}

/// Which corrected head feeds the cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CloudSource {
    Vggt,
    Mono,
    #[default]
    Average,
}

impl CloudSource {
    pub fn select(self, vggt: &DepthMap, mono: &DepthMap) -> DepthMap {
        match self {
            CloudSource::Vggt => vggt.clone(),
            CloudSource::Mono => mono.clone(),
            CloudSource::Average => {
                let v = vggt
                    .values()
                    .iter()
                    .zip(mono.values())
                    .map(|(&a, &b)| crate::field::HeadMode::Both.combine(a, b))
                    .collect();
                DepthMap::new(vggt.width(), vggt.height(), v).expect("same size")
            }
        }
    }
}

impl fmt::Display for CloudSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CloudSource::Vggt => "vggt",
            CloudSource::Mono => "mono",
            CloudSource::Average => "average",
        })
    }
}

impl FromStr for CloudSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vggt" => Ok(CloudSource::Vggt),
            "mono" => Ok(CloudSource::Mono),
            "average" => Ok(CloudSource::Average),
            _ => Err(format!("unknown cloud source {s:?} (vggt, mono or average)")),
        }
    }
}

/// `neighbors[i]` lists the views compared against view `i`, nearest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    pub neighbors: Vec<Vec<usize>>,
}

/// The `k` nearest other cameras of every view by center distance; ties go
/// to the lower index. `k` is capped at `N - 1`.
pub fn select_neighbors(views: &[View], k: usize) -> Result<NeighborGraph, DenseError> {
    let n = views.len();
    if n < 2 {
        return Err(DenseError::TooFewViews(n));
    }
    if k == 0 {
        return Err(DenseError::ZeroNeighbors);
    }
    let k = k.min(n - 1);
    let centers: Vec<Vec3> = views.iter().map(View::center).collect();
    let neighbors = (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> =
                (0..n).filter(|&j| j != i).map(|j| ((centers[i] - centers[j]).norm(), j)).collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();
    Ok(NeighborGraph { neighbors })
}

/// Pixel distance after the cycle `p → x_i → p_j → x_j → p̂` between views
/// `i` and `j`. `None` when any step leaves the image, hits an invalid depth,
/// or lands behind a camera.
pub fn cycle_reprojection_error(
    view_i: &View,
    pixel: &PixelCoord,
    depth_i: &DepthMap,
    depth_j: &DepthMap,
    view_j: &View,
) -> Option<f64> {
    let d_i = depth_i.sample_bilinear(pixel)?;
    let x_i = view_i.backproject_unchecked(pixel, d_i);
    let (p_j, _) = view_j.project(&x_i)?;
    if !view_j.contains(&p_j) {
        return None;
    }
    let d_j = depth_j.sample_bilinear(&p_j)?;
    let x_j = view_j.backproject_unchecked(&p_j, d_j);
    let (back, _) = view_i.project(&x_j)?;
    Some(back.distance(pixel))
}

/// Mean of the available errors; `None` if there are none.
pub fn mean_valid(errors: &[Option<f64>]) -> Option<f64> {
    let (sum, n) = errors.iter().flatten().fold((0.0, 0usize), |(s, n), e| (s + e, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensePoint {
    pub position: Vec3,
    pub source_view: usize,
    pub source_pixel: PixelCoord,
    /// Mean cycle error over the neighbors that could verify the point.
    pub mean_cycle_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DensePointCloud {
    pub points: Vec<DensePoint>,
}

impl DensePointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.position).collect()
    }
}

/// Back-projects every valid pixel of every view and scores it against the
/// view's neighbors. `depths[i]` belongs to `views[i]`.
pub fn build_dense_cloud(
    views: &[View],
    depths: &[DepthMap],
    graph: &NeighborGraph,
) -> Result<DensePointCloud, DenseError> {
    if views.len() != depths.len() {
        return Err(DenseError::ViewCount(views.len(), depths.len()));
    }
    let per_view: Vec<Vec<DensePoint>> = views
        .par_iter()
        .enumerate()
        .map(|(i, view)| {
            let d = &depths[i];
            let mut pts = Vec::new();
            for y in 0..d.height() {
                for x in 0..d.width() {
                    let Some(depth) = d.depth_at(x, y) else { continue };
                    let p = PixelCoord::new(x as f64, y as f64);
                    let errors: Vec<Option<f64>> = graph.neighbors[i]
                        .iter()
                        .map(|&j| cycle_reprojection_error(view, &p, d, &depths[j], &views[j]))
                        .collect();
                    pts.push(DensePoint {
                        position: view.backproject_unchecked(&p, depth),
                        source_view: view.view_id,
                        source_pixel: p,
                        mean_cycle_error: mean_valid(&errors),
                    });
                }
            }
            pts
        })
        .collect();
    Ok(DensePointCloud { points: per_view.into_iter().flatten().collect() })
}

/// Keeps points whose mean cycle error is below `threshold_px`; points no
/// neighbor could verify are dropped.
pub fn filter_reliable(cloud: &DensePointCloud, threshold_px: f64) -> DensePointCloud {
    DensePointCloud {
        points: cloud
            .points
            .iter()
            .filter(|p| p.mean_cycle_error.is_some_and(|e| e < threshold_px))
            .copied()
            .collect(),
    }
}

/// Per-pixel mean cycle error of one view's points; unverified and
/// missing pixels hold `-1`.
pub fn error_map(cloud: &DensePointCloud, view: &View) -> DepthMap {
    let mut m = DepthMap::filled(view.width(), view.height(), -1.0);
    for p in cloud.points.iter().filter(|p| p.source_view == view.view_id) {
        if let Some(e) = p.mean_cycle_error {
            m.set(p.source_pixel.x as usize, p.source_pixel.y as usize, e);
        }
    }
    m
}

/// One point per occupied voxel at the centroid of its members, carrying the
/// metadata of the member nearest that centroid. Output is ordered by voxel
/// key, z first.
pub fn voxel_downsample(cloud: &DensePointCloud, voxel_size: f64) -> Result<DensePointCloud, DenseError> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(DenseError::VoxelSize(voxel_size));
    }
    let mut buckets: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let q = p.position / voxel_size;
        buckets.entry((q.z.floor() as i64, q.y.floor() as i64, q.x.floor() as i64)).or_default().push(i);
    }
    let points = buckets
        .into_values()
        .map(|members| {
            let sum = members.iter().fold(Vec3::zeros(), |s, &i| s + cloud.points[i].position);
            let centroid = sum / members.len() as f64;
            let mut best = members[0];
            let mut best_d = f64::INFINITY;
            for &i in &members {
                let d = (cloud.points[i].position - centroid).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            DensePoint { position: centroid, ..cloud.points[best] }
        })
        .collect();
    Ok(DensePointCloud { points })
}

/// Axis-aligned bounding-box diagonal of a point set (0 when empty).
pub fn bounding_diagonal(points: &[Vec3]) -> f64 {
    let Some(first) = points.first() else { return 0.0 };
    let (lo, hi) = points.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    (hi - lo).norm()
}
