//! Scene loading and the end-to-end stages: align, train, correct, dense
//! initialization, fusion and evaluation.
//!
//! Output layout under the output directory:
//!
//! ```text
//! config.txt
//! depth_aligned/view_XXXX.{vggt,mono}.pfm
//! depth_corrected/view_XXXX.{vggt,mono}.pfm
//! field/                      correction field checkpoint
//! cloud/reliable.ply          filtered cloud
//! cloud/dense.ply             filtered and downsampled cloud
//! cloud/errors/view_XXXX.pfm  mean cycle error per pixel, -1 if unverified
//! mesh/mesh.ply
//! report/{alignment,depth,eval,timing}.txt, report/eval.json
//! ```

use crate::align::{apply_affine, extract_triplets, fit_view, AffineParams, AnchorTriplet};
use crate::config::PipelineConfig;
use crate::dense::{
    bounding_diagonal, build_dense_cloud, error_map, filter_reliable, select_neighbors, voxel_downsample, CloudSource,
    DensePointCloud,
};
use crate::depth_map::DepthMap;
use crate::field::{
    build_training_set, finetune_all, save_field, train_global, CorrectionField, FieldError, HeadMode, TrainingSet,
};
use crate::fusion::{evaluate, extract_mesh, EvalReport, TsdfVolume};
use crate::geometry::{PixelCoord, Vec3, View};
use crate::io::{self, load_pfm, parse_colmap_model, read_ply_mesh, read_ply_points, save_pfm, SparseModel, TriangleMesh};
use crate::synth::{depth_error_report, gt_depth_file, mono_depth_file, vggt_depth_file, GT_SURFACE_FILE};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Pipeline stages in execution order with their report labels.
pub const STAGES: [(&str, &str); 7] = [
    ("align", "Per-view affine alignment"),
    ("train_global", "Correction field global training"),
    ("finetune", "Correction field per-view fine-tuning"),
    ("correct", "Per-pixel correction"),
    ("dense_init", "Back-projection + reprojection filter"),
    ("fuse", "TSDF fusion + Marching Cubes"),
    ("eval", "Evaluation"),
];

/// Upper bound on TSDF grid points; the voxel grows to stay below it.
pub const MAX_TSDF_VOXELS: usize = 1 << 24;

/// Default voxel edge as a fraction of the scene diagonal.
pub const VOXEL_FRACTION: f64 = 0.004;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numeric => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: String,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: &str, kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { stage: stage.to_string(), kind, message: message.into() }
    }

    pub fn usage(stage: &str, message: impl Into<String>) -> Self {
        Self::new(stage, ErrorKind::Usage, message)
    }

    pub fn data(stage: &str, message: impl Into<String>) -> Self {
        Self::new(stage, ErrorKind::Data, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    fn field(stage: &str, e: FieldError) -> Self {
        let kind = match e {
            FieldError::NonFiniteLoss { .. } => ErrorKind::Numeric,
            FieldError::Config(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        };
        Self::new(stage, kind, e.to_string())
    }
}

fn io_err(stage: &str) -> impl Fn(io::IoError) -> PipelineError + '_ {
    move |e| PipelineError::data(stage, e.to_string())
}

/// A scene directory: COLMAP text model plus both depth predictions per view,
/// resampled to the camera resolution.
#[derive(Debug, Clone)]
pub struct Scene {
    pub dir: PathBuf,
    pub model: SparseModel,
    pub vggt: Vec<DepthMap>,
    pub mono: Vec<DepthMap>,
}

impl Scene {
    pub fn views(&self) -> &[View] {
        &self.model.views
    }

    /// Bounding-box diagonal of the sparse points.
    pub fn diagonal(&self) -> f64 {
        let pts: Vec<Vec3> = self.model.points.iter().map(|p| p.position).collect();
        bounding_diagonal(&pts)
    }

    /// Ground-truth depth maps, if every view has one.
    pub fn gt_depths(&self) -> Option<Vec<DepthMap>> {
        self.views()
            .iter()
            .map(|v| {
                let p = self.dir.join(gt_depth_file(v.view_id));
                if p.exists() {
                    load_depth(&p, v).ok()
                } else {
                    None
                }
            })
            .collect()
    }
}

fn require(path: &Path) -> Result<(), PipelineError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PipelineError::data("load", format!("scene incomplete: missing {}", path.display())))
    }
}

/// Reads a depth map and resamples it to the view's resolution if needed.
pub fn load_depth(path: &Path, view: &View) -> Result<DepthMap, io::IoError> {
    let d = load_pfm(path)?;
    if d.width() == view.width() && d.height() == view.height() {
        Ok(d)
    } else {
        log::info!(
            "{}: resampling {}x{} to {}x{}",
            path.display(),
            d.width(),
            d.height(),
            view.width(),
            view.height()
        );
        Ok(d.resample(view.width(), view.height()))
    }
}

pub fn load_scene(dir: &Path) -> Result<Scene, PipelineError> {
    for f in ["cameras.txt", "images.txt", "points3D.txt"] {
        require(&dir.join(f))?;
    }
    let model = parse_colmap_model(dir).map_err(io_err("load"))?;
    if model.views.is_empty() {
        return Err(PipelineError::data("load", "scene has no images"));
    }
    for v in &model.views {
        require(&dir.join(vggt_depth_file(v.view_id)))?;
        require(&dir.join(mono_depth_file(v.view_id)))?;
    }
    let (vggt, mono) = model
        .views
        .iter()
        .map(|v| {
            let a = load_depth(&dir.join(vggt_depth_file(v.view_id)), v)?;
            let b = load_depth(&dir.join(mono_depth_file(v.view_id)), v)?;
            Ok((a, b))
        })
        .collect::<Result<Vec<_>, io::IoError>>()
        .map_err(io_err("load"))?
        .into_iter()
        .unzip();
    Ok(Scene { dir: dir.to_path_buf(), model, vggt, mono })
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub vggt: Vec<DepthMap>,
    pub mono: Vec<DepthMap>,
    /// `(vggt, mono)` affine parameters per view.
    pub params: Vec<(AffineParams, AffineParams)>,
    /// Anchor triplets sampled from the aligned maps.
    pub triplets: Vec<Vec<AnchorTriplet>>,
}

pub fn align_scene(scene: &Scene) -> Alignment {
    let per_view: Vec<_> = scene
        .views()
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let raw = extract_triplets(v, &scene.model, &scene.vggt[i], &scene.mono[i]);
            let (pv, pm) = fit_view(&raw);
            let a = apply_affine(&scene.vggt[i], &pv);
            let b = apply_affine(&scene.mono[i], &pm);
            let t = extract_triplets(v, &scene.model, &a, &b);
            (a, b, (pv, pm), t)
        })
        .collect();
    let mut out = Alignment { vggt: vec![], mono: vec![], params: vec![], triplets: vec![] };
    for (a, b, p, t) in per_view {
        out.vggt.push(a);
        out.mono.push(b);
        out.params.push(p);
        out.triplets.push(t);
    }
    out
}

pub fn training_set(scene: &Scene, aligned: &Alignment) -> Result<TrainingSet, PipelineError> {
    build_training_set(scene.views(), &aligned.triplets).map_err(|e| PipelineError::field("train_global", e))
}

/// Applies the field to both aligned channels of every view.
pub fn correct_scene(field: &CorrectionField, views: &[View], vggt: &[DepthMap], mono: &[DepthMap]) -> (Vec<DepthMap>, Vec<DepthMap>) {
    views.iter().enumerate().map(|(i, v)| field.correct_depth_maps(v, &vggt[i], &mono[i])).unzip()
}

/// Rounds to the f32 precision of the PFM files.
fn round_to_stored(d: &mut DepthMap) {
    d.values_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
}

/// The source actually used: a single-head run always uses its own head.
pub fn effective_source(config: &PipelineConfig) -> CloudSource {
    match config.train.head_mode {
        HeadMode::Both => config.cloud_source,
        HeadMode::VggtOnly => CloudSource::Vggt,
        HeadMode::MonoOnly => CloudSource::Mono,
    }
}

pub fn surface_depths(source: CloudSource, vggt: &[DepthMap], mono: &[DepthMap]) -> Vec<DepthMap> {
    vggt.iter().zip(mono).map(|(a, b)| source.select(a, b)).collect()
}

#[derive(Debug, Clone)]
pub struct DenseResult {
    /// Points that passed the reliability filter.
    pub reliable: DensePointCloud,
    pub downsampled: DensePointCloud,
    pub error_maps: Vec<DepthMap>,
    /// Back-projected points before filtering.
    pub total: usize,
}

pub fn dense_init(
    views: &[View],
    depths: &[DepthMap],
    neighbors: usize,
    threshold_px: f64,
    voxel: f64,
) -> Result<DenseResult, PipelineError> {
    let stage = "dense_init";
    let graph = select_neighbors(views, neighbors).map_err(|e| PipelineError::data(stage, e.to_string()))?;
    let cloud = build_dense_cloud(views, depths, &graph).map_err(|e| PipelineError::data(stage, e.to_string()))?;
    let error_maps = views.iter().map(|v| error_map(&cloud, v)).collect();
    let reliable = filter_reliable(&cloud, threshold_px);
    let downsampled = voxel_downsample(&reliable, voxel).map_err(|e| PipelineError::usage(stage, e.to_string()))?;
    Ok(DenseResult { total: cloud.len(), reliable, downsampled, error_maps })
}

/// Depth maps with every pixel that failed the reliability filter removed.
pub fn reliable_depths(depths: &[DepthMap], error_maps: &[DepthMap], threshold_px: f64) -> Vec<DepthMap> {
    depths
        .iter()
        .zip(error_maps)
        .map(|(d, e)| {
            let mut out = d.clone();
            for (v, &err) in out.values_mut().iter_mut().zip(e.values()) {
                if !(err >= 0.0 && err < threshold_px) {
                    *v = 0.0;
                }
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FusionResult {
    pub mesh: TriangleMesh,
    /// Voxel edge actually used, after the grid-size cap.
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

/// Integrates the depth maps into a TSDF spanning their back-projected valid
/// pixels and extracts the zero level set.
pub fn fuse_depths(
    views: &[View],
    depths: &[DepthMap],
    voxel: f64,
    truncation_voxels: f64,
) -> Result<FusionResult, PipelineError> {
    let stage = "fuse";
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(PipelineError::usage(stage, format!("voxel size must be positive, got {voxel}")));
    }
    let mut bounds: Option<(Vec3, Vec3)> = None;
    for (view, d) in views.iter().zip(depths) {
        for y in 0..d.height() {
            for x in 0..d.width() {
                if let Some(z) = d.depth_at(x, y) {
                    let p = view.backproject_unchecked(&PixelCoord::new(x as f64, y as f64), z);
                    bounds = Some(match bounds {
                        None => (p, p),
                        Some((lo, hi)) => (lo.inf(&p), hi.sup(&p)),
                    });
                }
            }
        }
    }
    let (lo, hi) = bounds.ok_or_else(|| PipelineError::data(stage, "no reliable depth to fuse"))?;
    let mut vs = voxel;
    let count = |vs: f64| {
        let pad = 2.0 * truncation_voxels * vs;
        (0..3).map(|a| ((hi[a] - lo[a] + pad) / vs).ceil() + 1.0).product::<f64>()
    };
    while count(vs) > MAX_TSDF_VOXELS as f64 {
        vs *= (count(vs) / MAX_TSDF_VOXELS as f64).cbrt().max(1.01);
    }
    if vs != voxel {
        log::warn!("TSDF voxel enlarged from {voxel} to {vs} to keep the grid under {MAX_TSDF_VOXELS} points");
    }
    let mut volume = TsdfVolume::from_bounds(&lo, &hi, vs, truncation_voxels * vs);
    for (view, d) in views.iter().zip(depths) {
        volume.integrate(view, d);
    }
    let mesh = extract_mesh(&volume);
    if mesh.is_empty() {
        return Err(PipelineError::data(stage, "fused volume contains no surface"));
    }
    Ok(FusionResult { mesh, voxel_size: vs, dims: volume.dims() })
}

pub fn evaluate_points(pred: &[Vec3], gt: &[Vec3], tau: f64) -> Result<EvalReport, PipelineError> {
    evaluate(pred, gt, tau).map_err(|e| match e {
        crate::fusion::MetricError::Threshold(_) => PipelineError::usage("eval", e.to_string()),
        _ => PipelineError::data("eval", e.to_string()),
    })
}

/// Points of a PLY file: mesh vertices or a bare cloud.
pub fn read_points(path: &Path, stage: &str) -> Result<Vec<Vec3>, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))?;
    match read_ply_mesh(&bytes) {
        Ok(m) => Ok(m.vertices),
        Err(_) => read_ply_points(&bytes)
            .map(|p| p.0)
            .map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display()))),
    }
}

pub fn aligned_depth_file(view_id: usize, channel: &str) -> String {
    format!("depth_aligned/view_{view_id:04}.{channel}.pfm")
}

pub fn corrected_depth_file(view_id: usize, channel: &str) -> String {
    format!("depth_corrected/view_{view_id:04}.{channel}.pfm")
}

pub fn error_map_file(view_id: usize) -> String {
    format!("cloud/errors/view_{view_id:04}.pfm")
}

pub const FIELD_DIR: &str = "field";
pub const RELIABLE_CLOUD_FILE: &str = "cloud/reliable.ply";
pub const DENSE_CLOUD_FILE: &str = "cloud/dense.ply";
pub const MESH_FILE: &str = "mesh/mesh.ply";

#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub label: &'static str,
    pub seconds: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimingReport {
    pub rows: Vec<StageTiming>,
}

impl TimingReport {
    fn record(&mut self, stage: &'static str, seconds: f64, skipped: bool) {
        let label = STAGES.iter().find(|(s, _)| *s == stage).map_or(stage, |(_, l)| l);
        self.rows.push(StageTiming { stage, label, seconds, skipped });
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.seconds).sum()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# stage  seconds  description\n");
        for r in &self.rows {
            let note = if r.skipped { " (skipped)" } else { "" };
            let _ = writeln!(s, "{:<12} {:>10.3}  {}{note}", r.stage, r.seconds, r.label);
        }
        let _ = writeln!(s, "{:<12} {:>10.3}  Total", "total", self.total());
        s
    }
}

fn timed<T>(report: &mut TimingReport, stage: &'static str, f: impl FnOnce() -> Result<T, PipelineError>) -> Result<T, PipelineError> {
    let t = Instant::now();
    let out = f()?;
    report.record(stage, t.elapsed().as_secs_f64(), false);
    log::info!("{stage} done in {:.3} s", t.elapsed().as_secs_f64());
    Ok(out)
}

fn write(out: &Path, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
    io::write_file(&out.join(rel), bytes).map_err(io_err("write"))
}

fn write_pfm(out: &Path, rel: &str, map: &DepthMap) -> Result<(), PipelineError> {
    save_pfm(&out.join(rel), map).map_err(io_err("write"))
}

/// Runs `f` on a pool of `config.threads` workers, or the global pool.
pub fn with_threads<T: Send>(config: &PipelineConfig, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    match config.threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| PipelineError::usage("config", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn validate(config: &PipelineConfig) -> Result<(), PipelineError> {
    config.validate().map_err(|e| PipelineError::usage("config", e))
}

fn default_voxel(explicit: Option<f64>, scene: &Scene) -> Result<f64, PipelineError> {
    if let Some(v) = explicit {
        return Ok(v);
    }
    let diag = scene.diagonal();
    if !(diag > 0.0) {
        return Err(PipelineError::data("load", "sparse points span no volume; set the voxel sizes explicitly"));
    }
    Ok(VOXEL_FRACTION * diag)
}

fn alignment_text(scene: &Scene, aligned: &Alignment) -> String {
    let mut s = String::from("# view  anchors  vggt_scale  vggt_shift  mono_scale  mono_shift\n");
    for (i, v) in scene.views().iter().enumerate() {
        let (a, b) = aligned.params[i];
        let _ = writeln!(
            s,
            "{} {} {:e} {:e} {:e} {:e}",
            v.view_id,
            aligned.triplets[i].len(),
            a.scale,
            a.shift,
            b.scale,
            b.shift
        );
    }
    s
}

fn write_channels(out: &Path, views: &[View], vggt: &[DepthMap], mono: &[DepthMap], name: fn(usize, &str) -> String) -> Result<(), PipelineError> {
    for (i, v) in views.iter().enumerate() {
        write_pfm(out, &name(v.view_id, "vggt"), &vggt[i])?;
        write_pfm(out, &name(v.view_id, "mono"), &mono[i])?;
    }
    Ok(())
}

fn read_channels(out: &Path, views: &[View], stage: &str) -> Result<(Vec<DepthMap>, Vec<DepthMap>), PipelineError> {
    let mut vggt = Vec::new();
    let mut mono = Vec::new();
    for v in views {
        for (channel, dst) in [("vggt", &mut vggt), ("mono", &mut mono)] {
            let p = out.join(corrected_depth_file(v.view_id, channel));
            if !p.is_file() {
                return Err(PipelineError::data(stage, format!("missing {}; run `correct` first", p.display())));
            }
            dst.push(load_depth(&p, v).map_err(io_err(stage))?);
        }
    }
    Ok((vggt, mono))
}

/// `align` subcommand: writes the affinely aligned depths and their
/// parameters.
pub fn run_align(config: &PipelineConfig) -> Result<Alignment, PipelineError> {
    validate(config)?;
    with_threads(config, || {
        let scene = load_scene(&config.scene_dir)?;
        let aligned = align_scene(&scene);
        let out = &config.output_dir;
        write_channels(out, scene.views(), &aligned.vggt, &aligned.mono, aligned_depth_file)?;
        write(out, "report/alignment.txt", alignment_text(&scene, &aligned).as_bytes())?;
        Ok(aligned)
    })?
}

fn train(scene: &Scene, aligned: &Alignment, config: &PipelineConfig, timing: &mut TimingReport) -> Result<CorrectionField, PipelineError> {
    let cfg = &config.train;
    let mut field = timed(timing, "train_global", || {
        let set = training_set(scene, aligned)?;
        let mut field = CorrectionField::identity(set.depth_scale, set.num_views, cfg.head_mode, cfg.seed);
        train_global(&mut field, &set, cfg).map_err(|e| PipelineError::field("train_global", e))?;
        Ok((field, set))
    })?;
    timed(timing, "finetune", || finetune_all(&mut field.0, &field.1, cfg).map_err(|e| PipelineError::field("finetune", e)))?;
    Ok(field.0)
}

/// `correct` subcommand: align, train, and write the corrected depths and
/// the field checkpoint.
pub fn run_correct(config: &PipelineConfig) -> Result<(Vec<DepthMap>, Vec<DepthMap>), PipelineError> {
    validate(config)?;
    with_threads(config, || {
        let scene = load_scene(&config.scene_dir)?;
        let mut timing = TimingReport::default();
        let aligned = timed(&mut timing, "align", || Ok(align_scene(&scene)))?;
        let field = train(&scene, &aligned, config, &mut timing)?;
        let (cv, cm) = correct_scene(&field, scene.views(), &aligned.vggt, &aligned.mono);
        let out = &config.output_dir;
        write_channels(out, scene.views(), &cv, &cm, corrected_depth_file)?;
        save_field(&out.join(FIELD_DIR), &field).map_err(|e| PipelineError::field("write", e))?;
        Ok((cv, cm))
    })?
}

/// `init` subcommand: dense cloud from previously corrected depths.
pub fn run_init(config: &PipelineConfig) -> Result<DenseResult, PipelineError> {
    validate(config)?;
    with_threads(config, || {
        let scene = load_scene(&config.scene_dir)?;
        let (cv, cm) = read_channels(&config.output_dir, scene.views(), "dense_init")?;
        let depths = surface_depths(effective_source(config), &cv, &cm);
        let voxel = default_voxel(config.downsample_voxel, &scene)?;
        let dense = dense_init(scene.views(), &depths, config.neighbors, config.reliability_threshold, voxel)?;
        write_dense(&config.output_dir, scene.views(), &dense)?;
        Ok(dense)
    })?
}

fn write_dense(out: &Path, views: &[View], dense: &DenseResult) -> Result<(), PipelineError> {
    write(out, RELIABLE_CLOUD_FILE, &io::write_ply_points(&dense.reliable.positions(), None))?;
    write(out, DENSE_CLOUD_FILE, &io::write_ply_points(&dense.downsampled.positions(), None))?;
    for (v, e) in views.iter().zip(&dense.error_maps) {
        write_pfm(out, &error_map_file(v.view_id), e)?;
    }
    Ok(())
}

/// `fuse` subcommand: mesh from corrected depths masked by the stored
/// reliability maps.
pub fn run_fuse(config: &PipelineConfig) -> Result<FusionResult, PipelineError> {
    validate(config)?;
    with_threads(config, || {
        let scene = load_scene(&config.scene_dir)?;
        let out = &config.output_dir;
        let (cv, cm) = read_channels(out, scene.views(), "fuse")?;
        let depths = surface_depths(effective_source(config), &cv, &cm);
        let errors = scene
            .views()
            .iter()
            .map(|v| {
                let p = out.join(error_map_file(v.view_id));
                if !p.is_file() {
                    return Err(PipelineError::data("fuse", format!("missing {}; run `init` first", p.display())));
                }
                load_pfm(&p).map_err(io_err("fuse"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let voxel = default_voxel(config.tsdf_voxel, &scene)?;
        let fused = fuse_depths(scene.views(), &reliable_depths(&depths, &errors, config.reliability_threshold), voxel, config.truncation_voxels)?;
        write(out, MESH_FILE, &io::write_ply_mesh(&fused.mesh))?;
        Ok(fused)
    })?
}

/// `eval` subcommand: compares a predicted mesh or cloud to ground-truth
/// samples and writes `report/eval.{txt,json}` under `out`.
pub fn run_eval(pred: &Path, gt: &Path, tau: f64, out: &Path) -> Result<EvalReport, PipelineError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(PipelineError::usage("eval", format!("tau must be positive, got {tau}")));
    }
    let p = read_points(pred, "eval")?;
    let g = read_points(gt, "eval")?;
    let report = evaluate_points(&p, &g, tau)?;
    write(out, "report/eval.txt", report.to_key_values().as_bytes())?;
    write(out, "report/eval.json", report.to_json().as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub timing: TimingReport,
    pub eval: Option<EvalReport>,
    /// Mean depth L1 against ground truth of the aligned and the corrected
    /// surface depths, when the scene ships ground-truth depth.
    pub depth_l1: Option<(f64, f64)>,
    pub reliable_points: usize,
    pub total_points: usize,
    pub downsampled_points: usize,
    pub mesh_vertices: usize,
    pub mesh_faces: usize,
    pub tsdf_voxel: f64,
}

/// The full pipeline. Every output listed in the module docs is written.
pub fn run(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    validate(config)?;
    with_threads(config, || run_inner(config))?
}

fn run_inner(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let scene = load_scene(&config.scene_dir)?;
    let out = &config.output_dir;
    write(out, "config.txt", config.to_key_values().as_bytes())?;
    let mut timing = TimingReport::default();

    let aligned = timed(&mut timing, "align", || Ok(align_scene(&scene)))?;
    write_channels(out, scene.views(), &aligned.vggt, &aligned.mono, aligned_depth_file)?;
    write(out, "report/alignment.txt", alignment_text(&scene, &aligned).as_bytes())?;

    let field = train(&scene, &aligned, config, &mut timing)?;
    let source = effective_source(config);
    let (mut cv, mut cm) = timed(&mut timing, "correct", || Ok(correct_scene(&field, scene.views(), &aligned.vggt, &aligned.mono)))?;
    // later stages see exactly what the stage commands read back
    cv.iter_mut().chain(cm.iter_mut()).for_each(round_to_stored);
    write_channels(out, scene.views(), &cv, &cm, corrected_depth_file)?;
    save_field(&out.join(FIELD_DIR), &field).map_err(|e| PipelineError::field("write", e))?;
    let depths = surface_depths(source, &cv, &cm);

    let depth_l1 = match scene.gt_depths() {
        Some(gt) => {
            let before = surface_depths(source, &aligned.vggt, &aligned.mono);
            let a = depth_error_report(&before, &gt).map_err(|e| PipelineError::data("eval", e.to_string()))?;
            let b = depth_error_report(&depths, &gt).map_err(|e| PipelineError::data("eval", e.to_string()))?;
            let text = format!(
                "aligned_mean_l1 = {:e}\naligned_median_l1 = {:e}\ncorrected_mean_l1 = {:e}\ncorrected_median_l1 = {:e}\ncorrected_invalid = {}\n",
                a.overall.mean, a.overall.median, b.overall.mean, b.overall.median, b.overall.invalid
            );
            write(out, "report/depth.txt", text.as_bytes())?;
            Some((a.overall.mean, b.overall.mean))
        }
        None => None,
    };

    let down_voxel = default_voxel(config.downsample_voxel, &scene)?;
    let mut dense = timed(&mut timing, "dense_init", || {
        dense_init(scene.views(), &depths, config.neighbors, config.reliability_threshold, down_voxel)
    })?;
    dense.error_maps.iter_mut().for_each(round_to_stored);
    write_dense(out, scene.views(), &dense)?;

    let tsdf_voxel = default_voxel(config.tsdf_voxel, &scene)?;
    let fused = timed(&mut timing, "fuse", || {
        let masked = reliable_depths(&depths, &dense.error_maps, config.reliability_threshold);
        fuse_depths(scene.views(), &masked, tsdf_voxel, config.truncation_voxels)
    })?;
    write(out, MESH_FILE, &io::write_ply_mesh(&fused.mesh))?;

    let gt_path = scene.dir.join(GT_SURFACE_FILE);
    let eval = if gt_path.is_file() {
        let tau = config.tau.unwrap_or(fused.voxel_size);
        let report = timed(&mut timing, "eval", || {
            let gt = read_points(&gt_path, "eval")?;
            evaluate_points(&fused.mesh.vertices, &gt, tau)
        })?;
        write(out, "report/eval.txt", report.to_key_values().as_bytes())?;
        write(out, "report/eval.json", report.to_json().as_bytes())?;
        Some(report)
    } else {
        log::info!("no {GT_SURFACE_FILE} in the scene, skipping evaluation");
        timing.record("eval", 0.0, true);
        None
    };
    write(out, "report/timing.txt", timing.to_text().as_bytes())?;

    Ok(RunSummary {
        timing,
        eval,
        depth_l1,
        reliable_points: dense.reliable.len(),
        total_points: dense.total,
        downsampled_points: dense.downsampled.len(),
        mesh_vertices: fused.mesh.vertices.len(),
        mesh_faces: fused.mesh.faces.len(),
        tsdf_voxel: fused.voxel_size,
    })
}
