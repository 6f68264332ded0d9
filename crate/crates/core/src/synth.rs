//! Synthetic scenes with analytic ground truth and controlled depth
//! corruption.

use crate::depth_map::{is_valid_depth, median_in_place, DepthMap};
use crate::geometry::{normalize_pixel, CameraIntrinsics, CameraPose, GeometryError, PixelCoord, Vec3, View};
use crate::io::{save_pfm, write_colmap_model, write_file, write_ply_points, IoError, SparseModel, SparsePoint};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

/// Relative tolerance of the analytic visibility test.
const VISIBILITY_RTOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("depth maps differ in size: {0}")]
    SizeMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    /// Infinite plane through `point` with unit `normal`.
    Plane { point: Vec3, normal: Vec3 },
    Sphere { center: Vec3, radius: f64 },
    Union(Vec<Surface>),
}

impl Surface {
    /// Smallest ray parameter `t > 0` with `origin + t·dir` on the surface.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match self {
            Surface::Plane { point, normal } => {
                let denom = normal.dot(dir);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = normal.dot(&(point - origin)) / denom;
                (t > 0.0).then_some(t)
            }
            Surface::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.dot(dir);
                let half_b = dir.dot(&oc);
                let c = oc.dot(&oc) - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                // stable root pair
                let q = -(half_b + half_b.signum() * disc.sqrt());
                let (t0, t1) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
                let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
                if lo > 0.0 {
                    Some(lo)
                } else if hi > 0.0 {
                    Some(hi)
                } else {
                    None
                }
            }
            Surface::Union(parts) => parts.iter().filter_map(|s| s.intersect(origin, dir)).min_by(f64::total_cmp),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfacePreset {
    Plane,
    Sphere,
    SpherePlane,
    TwoSpheres,
}

impl SurfacePreset {
    pub fn surface(self) -> Surface {
        let sphere = Surface::Sphere { center: Vec3::zeros(), radius: 1.0 };
        let wall = Surface::Plane { point: Vec3::new(0.0, 0.0, 1.5), normal: Vec3::new(0.0, 0.0, -1.0) };
        match self {
            SurfacePreset::Plane => Surface::Plane { point: Vec3::zeros(), normal: Vec3::new(0.0, 0.0, -1.0) },
            SurfacePreset::Sphere => sphere,
            SurfacePreset::SpherePlane => Surface::Union(vec![sphere, wall]),
            SurfacePreset::TwoSpheres => Surface::Union(vec![
                Surface::Sphere { center: Vec3::new(-0.7, 0.0, 0.0), radius: 0.6 },
                Surface::Sphere { center: Vec3::new(0.8, 0.2, 0.5), radius: 0.7 },
            ]),
        }
    }
}

impl fmt::Display for SurfacePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurfacePreset::Plane => "plane",
            SurfacePreset::Sphere => "sphere",
            SurfacePreset::SpherePlane => "sphere_plane",
            SurfacePreset::TwoSpheres => "two_spheres",
        })
    }
}

impl FromStr for SurfacePreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plane" => Ok(SurfacePreset::Plane),
            "sphere" => Ok(SurfacePreset::Sphere),
            "sphere_plane" => Ok(SurfacePreset::SpherePlane),
            "two_spheres" => Ok(SurfacePreset::TwoSpheres),
            _ => Err(format!("unknown surface {s:?} (plane, sphere, sphere_plane, two_spheres)")),
        }
    }
}

/// Camera rig and sampling parameters. Cameras sit on a horizontal arc of
/// `arc_deg` degrees around the origin at distance `distance`, raised by
/// `elevation`, all looking at the origin with +y up.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub surface: SurfacePreset,
    pub num_views: usize,
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub distance: f64,
    pub arc_deg: f64,
    pub elevation: f64,
    pub anchors_per_view: usize,
    /// Pixel stride of the ground-truth surface samples.
    pub sample_stride: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            surface: SurfacePreset::SpherePlane,
            num_views: 8,
            width: 128,
            height: 128,
            hfov_deg: 60.0,
            distance: 4.0,
            arc_deg: 60.0,
            elevation: 0.5,
            anchors_per_view: 1500,
            sample_stride: 2,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_views < 2 {
            return Err(SynthError::Spec(format!("need at least 2 views, got {}", self.num_views)));
        }
        if self.width < 32 || self.height < 32 {
            return Err(SynthError::Spec(format!("resolution must be at least 32x32, got {}x{}", self.width, self.height)));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(SynthError::Spec("field of view must lie in (0, 180) degrees".into()));
        }
        if !(self.distance > 0.0) {
            return Err(SynthError::Spec("camera distance must be positive".into()));
        }
        if self.sample_stride == 0 {
            return Err(SynthError::Spec("sample stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn rig(&self) -> Result<Vec<View>, SynthError> {
        self.validate()?;
        let k = CameraIntrinsics::from_fov(self.hfov_deg.to_radians(), self.width, self.height)?;
        let n = self.num_views;
        let views: Vec<View> = (0..n)
            .map(|i| {
                let a = (-0.5 + i as f64 / (n - 1) as f64) * self.arc_deg.to_radians();
                let eye = Vec3::new(self.distance * a.sin(), self.elevation, -self.distance * a.cos());
                CameraPose::look_at(&eye, &Vec3::zeros(), &Vec3::new(0.0, 1.0, 0.0)).map(|p| View::new(i, k, p))
            })
            .collect::<Result<_, _>>()?;
        let c0 = views[0].center();
        if views.iter().all(|v| (v.center() - c0).norm() < 1e-9) {
            return Err(SynthError::Spec("all cameras coincide".into()));
        }
        Ok(views)
    }
}

/// Exact depth raster of `surface` seen from `view`; misses are invalid.
pub fn render_depth(view: &View, surface: &Surface) -> DepthMap {
    let (w, h) = (view.width(), view.height());
    let origin = view.center();
    let rt = view.pose.rotation().transpose();
    let values: Vec<f64> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let p = PixelCoord::new((i % w) as f64, (i / w) as f64);
            let dir = rt * view.camera_ray(&p);
            surface.intersect(&origin, &dir).unwrap_or(0.0)
        })
        .collect();
    DepthMap::new(w, h, values).expect("size matches")
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SynthSpec,
    pub surface: Surface,
    pub gt_depths: Vec<DepthMap>,
    /// Cameras and anchor points; every track re-projects exactly.
    pub model: SparseModel,
    pub surface_samples: Vec<Vec3>,
}

impl SyntheticScene {
    pub fn views(&self) -> &[View] {
        &self.model.views
    }

    /// Whether `x` is the first surface hit along the ray of `view`.
    pub fn is_visible(&self, view: &View, x: &Vec3) -> Option<PixelCoord> {
        visible_in(view, &self.surface, x)
    }
}

fn visible_in(view: &View, surface: &Surface, x: &Vec3) -> Option<PixelCoord> {
    let (p, depth) = view.project(x)?;
    if !view.contains(&p) {
        return None;
    }
    let dir = view.pose.rotation().transpose() * view.camera_ray(&p);
    let hit = surface.intersect(&view.center(), &dir)?;
    ((hit - depth).abs() <= VISIBILITY_RTOL * depth).then_some(p)
}

pub fn generate_scene(spec: &SynthSpec) -> Result<SyntheticScene, SynthError> {
    let views = spec.rig()?;
    let surface = spec.surface.surface();
    let gt_depths: Vec<DepthMap> = views.iter().map(|v| render_depth(v, &surface)).collect();

    let mut candidates: Vec<(usize, Vec3)> = Vec::new();
    for (i, (view, gt)) in views.iter().zip(&gt_depths).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let valid: Vec<usize> = (0..gt.len()).filter(|&k| is_valid_depth(gt.values()[k])).collect();
        let take = spec.anchors_per_view.min(valid.len());
        let mut picked: Vec<usize> = sample(&mut rng, valid.len(), take).into_iter().map(|k| valid[k]).collect();
        picked.sort_unstable();
        for k in picked {
            let p = PixelCoord::new((k % gt.width()) as f64, (k / gt.width()) as f64);
            candidates.push((i, view.backproject_unchecked(&p, gt.values()[k])));
        }
    }
    let tracks: Vec<Vec<(usize, PixelCoord)>> = candidates
        .par_iter()
        .map(|(_, x)| {
            views.iter().filter_map(|v| visible_in(v, &surface, x).map(|p| (v.view_id, p)))
                .collect()
        })
        .collect();
    let points: Vec<SparsePoint> = candidates
        .into_iter()
        .zip(tracks)
        .filter(|(_, t)| t.len() >= 2)
        .enumerate()
        .map(|(k, ((_, position), track))| SparsePoint { point_id: k as u64 + 1, position, track })
        .collect();

    let mut surface_samples = Vec::new();
    for (view, gt) in views.iter().zip(&gt_depths) {
        for y in (0..gt.height()).step_by(spec.sample_stride) {
            for x in (0..gt.width()).step_by(spec.sample_stride) {
                if let Some(d) = gt.depth_at(x, y) {
                    surface_samples.push(view.backproject_unchecked(&PixelCoord::new(x as f64, y as f64), d));
                }
            }
        }
    }
    let image_names = (0..views.len()).map(|i| format!("view_{i:04}.png")).collect();
    Ok(SyntheticScene {
        spec: spec.clone(),
        surface,
        gt_depths,
        model: SparseModel { views, image_names, points },
        surface_samples,
    })
}

/// Corruption parameters of one depth channel. Shifts and noise are relative
/// to the scene's median depth, the polynomial amplitude to its depth range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub scale_range: (f64, f64),
    pub shift_range: (f64, f64),
    pub poly_amplitude: f64,
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    /// Relative depth error of an outlier, drawn from this range with a
    /// random sign.
    pub outlier_magnitude: (f64, f64),
}

impl ChannelSpec {
    pub const EXACT: ChannelSpec = ChannelSpec {
        scale_range: (1.0, 1.0),
        shift_range: (0.0, 0.0),
        poly_amplitude: 0.0,
        noise_sigma: 0.0,
        outlier_fraction: 0.0,
        outlier_magnitude: (0.2, 0.5),
    };

    pub fn affine_only(scale: (f64, f64), shift: (f64, f64)) -> Self {
        Self { scale_range: scale, shift_range: shift, ..Self::EXACT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub vggt: ChannelSpec,
    pub mono: ChannelSpec,
    /// Edge length of the world-space cells that share an outlier label.
    pub outlier_cell: f64,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            vggt: ChannelSpec {
                scale_range: (0.95, 1.05),
                shift_range: (-0.02, 0.02),
                poly_amplitude: 0.02,
                noise_sigma: 5e-4,
                outlier_fraction: 0.0,
                outlier_magnitude: (0.2, 0.5),
            },
            mono: ChannelSpec {
                scale_range: (0.85, 1.15),
                shift_range: (-0.05, 0.05),
                poly_amplitude: 0.01,
                noise_sigma: 5e-4,
                outlier_fraction: 0.0,
                outlier_magnitude: (0.2, 0.5),
            },
            outlier_cell: 0.1,
            seed: 1,
        }
    }
}

impl CorruptionSpec {
    pub fn exact(seed: u64) -> Self {
        Self { vggt: ChannelSpec::EXACT, mono: ChannelSpec::EXACT, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, c) in [("vggt", &self.vggt), ("mono", &self.mono)] {
            let bad = |m: &str| Err(SynthError::Spec(format!("{name} channel: {m}")));
            if !(c.scale_range.0 > 0.0 && c.scale_range.0 <= c.scale_range.1) {
                return bad("scale range must be positive and ordered");
            }
            if c.shift_range.0 > c.shift_range.1 {
                return bad("shift range must be ordered");
            }
            if c.poly_amplitude < 0.0 || c.noise_sigma < 0.0 {
                return bad("amplitudes must be non-negative");
            }
            if !(0.0..=1.0).contains(&c.outlier_fraction) {
                return bad("outlier fraction must lie in [0, 1]");
            }
            if !(0.0 <= c.outlier_magnitude.0 && c.outlier_magnitude.0 <= c.outlier_magnitude.1 && c.outlier_magnitude.1 < 1.0) {
                return bad("outlier magnitude must satisfy 0 <= lo <= hi < 1");
            }
        }
        if !(self.outlier_cell > 0.0) {
            return Err(SynthError::Spec("outlier cell size must be positive".into()));
        }
        Ok(())
    }
}

/// Drawn corruption of one view and channel, in scene units:
/// `d = scale · (d_gt + poly(u, v)) + shift + noise`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewCorruption {
    pub scale: f64,
    pub shift: f64,
    /// Coefficients of `1, u, v, u², uv, v²`.
    pub poly: [f64; 6],
}

impl ViewCorruption {
    pub const IDENTITY: ViewCorruption = ViewCorruption { scale: 1.0, shift: 0.0, poly: [0.0; 6] };

    pub fn bias(&self, u: f64, v: f64) -> f64 {
        let p = &self.poly;
        p[0] + p[1] * u + p[2] * v + p[3] * u * u + p[4] * u * v + p[5] * v * v
    }

    pub fn apply(&self, d_gt: f64, u: f64, v: f64) -> f64 {
        self.scale * (d_gt + self.bias(u, v)) + self.shift
    }

    pub fn invert(&self, d: f64, u: f64, v: f64) -> f64 {
        (d - self.shift) / self.scale - self.bias(u, v)
    }
}

#[derive(Debug, Clone)]
pub struct CorruptedChannel {
    pub maps: Vec<DepthMap>,
    pub params: Vec<ViewCorruption>,
    /// Per-view outlier masks, row-major.
    pub outliers: Vec<Vec<bool>>,
}

#[derive(Debug, Clone)]
pub struct CorruptedScene {
    pub vggt: CorruptedChannel,
    pub mono: CorruptedChannel,
}

/// Median and range (max − min) of all valid ground-truth depths.
pub fn depth_statistics(maps: &[DepthMap]) -> (f64, f64) {
    let mut all: Vec<f64> = maps.iter().flat_map(|m| m.values().iter().copied().filter(|&d| is_valid_depth(d))).collect();
    if all.is_empty() {
        return (1.0, 0.0);
    }
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (median_in_place(&mut all).unwrap(), hi - lo)
}

fn cell_hash(cell: [i64; 3], salt: u64) -> u64 {
    // splitmix64 over the packed cell coordinates
    let mut h = salt ^ 0x9E37_79B9_7F4A_7C15;
    for c in cell {
        h ^= c as u64;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Outlier label of the world cell containing `x`; consistent across views.
pub fn is_outlier_cell(x: &Vec3, cell: f64, fraction: f64, salt: u64) -> bool {
    if fraction <= 0.0 {
        return false;
    }
    let key = [(x.x / cell).floor() as i64, (x.y / cell).floor() as i64, (x.z / cell).floor() as i64];
    ((cell_hash(key, salt) >> 11) as f64 / (1u64 << 53) as f64) < fraction
}

fn corrupt_channel(scene: &SyntheticScene, c: &ChannelSpec, spec: &CorruptionSpec, channel: u64) -> CorruptedChannel {
    let (median, range) = depth_statistics(&scene.gt_depths);
    let results: Vec<(DepthMap, ViewCorruption, Vec<bool>)> = scene
        .views()
        .par_iter()
        .zip(&scene.gt_depths)
        .map(|(view, gt)| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream((view.view_id as u64) << 1 | channel);
            let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..hi) };
            let scale = draw(&mut rng, c.scale_range);
            let shift = draw(&mut rng, c.shift_range) * median;
            let mut poly = [0.0f64; 6];
            if c.poly_amplitude > 0.0 {
                for p in poly.iter_mut() {
                    *p = rng.random_range(-1.0..1.0);
                }
                let norm: f64 = poly.iter().map(|p| p.abs()).sum();
                for p in poly.iter_mut() {
                    *p *= c.poly_amplitude * range / norm;
                }
            }
            let params = ViewCorruption { scale, shift, poly };
            let noise = Normal::new(0.0, c.noise_sigma * median).expect("non-negative sigma");
            let (w, h) = (gt.width(), gt.height());
            let mut out = gt.clone();
            let mut mask = vec![false; w * h];
            for y in 0..h {
                for x in 0..w {
                    let Some(d) = gt.depth_at(x, y) else { continue };
                    let p = PixelCoord::new(x as f64, y as f64);
                    let (u, v) = normalize_pixel(w, h, &p);
                    let mut value = params.apply(d, u, v);
                    if c.noise_sigma > 0.0 {
                        value += noise.sample(&mut rng);
                    }
                    if c.outlier_fraction > 0.0 {
                        let world = view.backproject_unchecked(&p, d);
                        if is_outlier_cell(&world, spec.outlier_cell, c.outlier_fraction, spec.seed ^ channel) {
                            let m = draw(&mut rng, c.outlier_magnitude);
                            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                            value *= 1.0 + sign * m;
                            mask[y * w + x] = true;
                        }
                    }
                    out.set(x, y, if is_valid_depth(value) { value } else { 0.0 });
                }
            }
            (out, params, mask)
        })
        .collect();
    let mut ch = CorruptedChannel { maps: Vec::new(), params: Vec::new(), outliers: Vec::new() };
    for (m, p, o) in results {
        ch.maps.push(m);
        ch.params.push(p);
        ch.outliers.push(o);
    }
    ch
}

/// Applies the per-view corruption families to the ground-truth depths.
pub fn corrupt_depths(scene: &SyntheticScene, spec: &CorruptionSpec) -> Result<CorruptedScene, SynthError> {
    spec.validate()?;
    Ok(CorruptedScene { vggt: corrupt_channel(scene, &spec.vggt, spec, 0), mono: corrupt_channel(scene, &spec.mono, spec, 1) })
}

/// Undoes the affine and polynomial parts of a recorded corruption.
pub fn invert_corruption(map: &DepthMap, params: &ViewCorruption) -> DepthMap {
    let (w, h) = (map.width(), map.height());
    DepthMap::from_fn(w, h, |x, y| match map.depth_at(x, y) {
        Some(d) => {
            let (u, v) = normalize_pixel(w, h, &PixelCoord::new(x as f64, y as f64));
            params.invert(d, u, v)
        }
        None => 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    /// Pixels compared.
    pub count: usize,
    /// Pixels valid in the reference but invalid in the prediction.
    pub invalid: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DepthErrorReport {
    pub overall: ErrorStats,
    pub per_view: Vec<ErrorStats>,
}

fn stats(mut errs: Vec<f64>, invalid: usize) -> ErrorStats {
    let count = errs.len();
    if count == 0 {
        return ErrorStats { invalid, ..ErrorStats::default() };
    }
    let mean = errs.iter().sum::<f64>() / count as f64;
    let max = errs.iter().copied().fold(0.0, f64::max);
    ErrorStats { mean, median: median_in_place(&mut errs).unwrap(), max, count, invalid }
}

/// Absolute depth error over pixels valid in both maps.
pub fn depth_error_report(pred: &[DepthMap], gt: &[DepthMap]) -> Result<DepthErrorReport, SynthError> {
    if pred.len() != gt.len() {
        return Err(SynthError::SizeMismatch(format!("{} predicted vs {} reference maps", pred.len(), gt.len())));
    }
    let mut all = Vec::new();
    let mut invalid_total = 0;
    let mut per_view = Vec::with_capacity(pred.len());
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        if p.width() != g.width() || p.height() != g.height() {
            return Err(SynthError::SizeMismatch(format!(
                "view {i}: {}x{} vs {}x{}",
                p.width(),
                p.height(),
                g.width(),
                g.height()
            )));
        }
        let mut errs = Vec::new();
        let mut invalid = 0;
        for (&a, &b) in p.values().iter().zip(g.values()) {
            if !is_valid_depth(b) {
                continue;
            }
            if is_valid_depth(a) {
                errs.push((a - b).abs());
            } else {
                invalid += 1;
            }
        }
        all.extend_from_slice(&errs);
        invalid_total += invalid;
        per_view.push(stats(errs, invalid));
    }
    Ok(DepthErrorReport { overall: stats(all, invalid_total), per_view })
}

pub fn vggt_depth_file(view_id: usize) -> String {
    format!("depth/view_{view_id:04}.vggt.pfm")
}

pub fn mono_depth_file(view_id: usize) -> String {
    format!("depth/view_{view_id:04}.mono.pfm")
}

pub fn gt_depth_file(view_id: usize) -> String {
    format!("gt/view_{view_id:04}.depth.pfm")
}

pub const GT_SURFACE_FILE: &str = "gt/surface.ply";

/// Writes the scene directory: COLMAP text model, corrupted depths of both
/// channels, ground-truth depths and surface samples.
pub fn write_scene(dir: &Path, scene: &SyntheticScene, corrupted: &CorruptedScene) -> Result<(), SynthError> {
    write_colmap_model(dir, &scene.model)?;
    for (i, view) in scene.views().iter().enumerate() {
        save_pfm(&dir.join(vggt_depth_file(view.view_id)), &corrupted.vggt.maps[i])?;
        save_pfm(&dir.join(mono_depth_file(view.view_id)), &corrupted.mono.maps[i])?;
        save_pfm(&dir.join(gt_depth_file(view.view_id)), &scene.gt_depths[i])?;
    }
    write_file(&dir.join(GT_SURFACE_FILE), &write_ply_points(&scene.surface_samples, None))?;
    Ok(())
}
