use crate::depth_map::DepthMap;
use crate::geometry::{PixelCoord, Vec3, View};
use rayon::prelude::*;

/// Truncated signed distance volume. Grid point `(i, j, k)` sits at
/// `origin + voxel_size · (i, j, k)`; stored distances are in units of the
/// truncation distance, positive in front of the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfVolume {
    origin: Vec3,
    voxel_size: f64,
    dims: [usize; 3],
    truncation: f64,
    sdf: Vec<f64>,
    weight: Vec<f64>,
}

impl TsdfVolume {
    pub fn new(origin: Vec3, voxel_size: f64, dims: [usize; 3], truncation: f64) -> Self {
        assert!(voxel_size > 0.0 && truncation > 0.0, "voxel size and truncation must be positive");
        assert!(dims.iter().all(|&d| d >= 2), "volume needs at least 2 samples per axis");
        let n = dims[0] * dims[1] * dims[2];
        Self { origin, voxel_size, dims, truncation, sdf: vec![1.0; n], weight: vec![0.0; n] }
    }

    /// Volume covering `[lo, hi]` padded by the truncation distance.
    pub fn from_bounds(lo: &Vec3, hi: &Vec3, voxel_size: f64, truncation: f64) -> Self {
        let pad = Vec3::repeat(truncation);
        let origin = lo - pad;
        let extent = hi + pad - origin;
        let dims = [0, 1, 2].map(|a| ((extent[a] / voxel_size).ceil() as usize + 1).max(2));
        Self::new(origin, voxel_size, dims, truncation)
    }

    pub fn origin(&self) -> &Vec3 {
        &self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.voxel_size
    }

    pub fn sdf(&self) -> &[f64] {
        &self.sdf
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn sdf_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.sdf[self.index(i, j, k)]
    }

    pub fn weight_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.weight[self.index(i, j, k)]
    }

    /// Overwrites every grid value from a signed distance function in scene
    /// units, with unit weight.
    pub fn fill_from_fn(&mut self, f: impl Fn(&Vec3) -> f64 + Sync) {
        let [nx, ny, _] = self.dims;
        let (origin, vs, trunc) = (self.origin, self.voxel_size, self.truncation);
        self.sdf.par_chunks_mut(nx * ny).zip(self.weight.par_chunks_mut(nx * ny)).enumerate().for_each(
            |(k, (sdf, w))| {
                for j in 0..ny {
                    for i in 0..nx {
                        let p = origin + Vec3::new(i as f64, j as f64, k as f64) * vs;
                        sdf[j * nx + i] = (f(&p) / trunc).clamp(-1.0, 1.0);
                        w[j * nx + i] = 1.0;
                    }
                }
            },
        );
    }

    /// Fuses one depth map with weight 1 per observation.
    pub fn integrate(&mut self, view: &View, depth: &DepthMap) {
        let [nx, ny, _] = self.dims;
        let (origin, vs, trunc) = (self.origin, self.voxel_size, self.truncation);
        let r = *view.pose.rotation();
        let t = *view.pose.translation();
        let k = view.intrinsics;
        self.sdf.par_chunks_mut(nx * ny).zip(self.weight.par_chunks_mut(nx * ny)).enumerate().for_each(
            |(kz, (sdf, w))| {
                for j in 0..ny {
                    for i in 0..nx {
                        let p = origin + Vec3::new(i as f64, j as f64, kz as f64) * vs;
                        let pc = r * p + t;
                        if !(pc.z > 0.0) {
                            continue;
                        }
                        let px = PixelCoord::new(k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy);
                        let Some(d) = depth.sample_bilinear(&px) else { continue };
                        let obs = (d - pc.z) / trunc;
                        if obs < -1.0 {
                            continue;
                        }
                        let obs = obs.min(1.0);
                        let idx = j * nx + i;
                        let wn = w[idx] + 1.0;
                        sdf[idx] = (sdf[idx] * w[idx] + obs) / wn;
                        w[idx] = wn;
                    }
                }
            },
        );
    }
}
