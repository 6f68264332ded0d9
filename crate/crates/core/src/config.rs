//! Plain-text `key = value` files with `#` comments, and the pipeline and
//! scene-generator configurations stored in them.

use crate::dense::CloudSource;
use crate::field::{HeadMode, TrainConfig};
use crate::synth::{ChannelSpec, CorruptionSpec, SurfacePreset, SynthSpec};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

/// Parses `key = value` lines. Blank lines and text after `#` are ignored;
/// repeated keys keep the last value.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", n + 1));
        };
        let k = k.trim();
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(format!("line {}: invalid key {k:?}", n + 1));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value for {key}: {value:?}"))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, String> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

/// Everything `run` and the stage subcommands need. Optional sizes are
/// written as `auto` and derived from the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scene_dir: PathBuf,
    pub output_dir: PathBuf,
    pub train: TrainConfig,
    /// Neighbor views per reprojection check.
    pub neighbors: usize,
    /// Mean cycle error, in pixels, below which a point is kept.
    pub reliability_threshold: f64,
    pub cloud_source: CloudSource,
    /// Defaults to 0.004 times the anchor bounding-box diagonal.
    pub downsample_voxel: Option<f64>,
    pub tsdf_voxel: Option<f64>,
    /// Truncation distance in TSDF voxels.
    pub truncation_voxels: f64,
    /// F-score distance threshold; defaults to the TSDF voxel size.
    pub tau: Option<f64>,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scene_dir: PathBuf::from("scene"),
            output_dir: PathBuf::from("out"),
            train: TrainConfig::default(),
            neighbors: 4,
            reliability_threshold: 1.0,
            cloud_source: CloudSource::default(),
            downsample_voxel: None,
            tsdf_voxel: None,
            truncation_voxels: 4.0,
            tau: None,
            threads: None,
        }
    }
}

/// `(key, description)` for every pipeline config key, in file order.
pub const PIPELINE_KEYS: &[(&str, &str)] = &[
    ("scene", "scene directory"),
    ("output", "output directory"),
    ("global_steps", "global training steps"),
    ("global_t0", "global cosine restart period"),
    ("global_lr", "global peak learning rate"),
    ("per_view_steps", "per-view fine-tuning steps"),
    ("per_view_t0", "per-view cosine restart period"),
    ("per_view_lr", "per-view peak learning rate"),
    ("batch_size", "anchors per training step"),
    ("weight_decay", "AdamW decoupled weight decay"),
    ("seed", "seed for all randomness"),
    ("head_mode", "depth heads used: both, vggt or mono"),
    ("neighbors", "neighbor views per reprojection check"),
    ("reliability_threshold", "max mean cycle error in pixels"),
    ("cloud_source", "depth fed to the cloud and TSDF: vggt, mono or average"),
    ("downsample_voxel", "cloud downsampling voxel (auto = 0.004 x scene diagonal)"),
    ("tsdf_voxel", "TSDF voxel (auto = 0.004 x scene diagonal)"),
    ("truncation_voxels", "TSDF truncation in voxels"),
    ("tau", "F-score threshold (auto = TSDF voxel)"),
    ("threads", "worker threads (auto = all cores)"),
];

impl PipelineConfig {
    /// Current value of `key` as it would be written to a file.
    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        Some(match key {
            "scene" => self.scene_dir.display().to_string(),
            "output" => self.output_dir.display().to_string(),
            "global_steps" => t.global.steps.to_string(),
            "global_t0" => t.global.t0.to_string(),
            "global_lr" => t.global.lr.to_string(),
            "per_view_steps" => t.per_view.steps.to_string(),
            "per_view_t0" => t.per_view.t0.to_string(),
            "per_view_lr" => t.per_view.lr.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "weight_decay" => t.weight_decay.to_string(),
            "seed" => t.seed.to_string(),
            "head_mode" => t.head_mode.to_string(),
            "neighbors" => self.neighbors.to_string(),
            "reliability_threshold" => self.reliability_threshold.to_string(),
            "cloud_source" => self.cloud_source.to_string(),
            "downsample_voxel" => opt_str(&self.downsample_voxel),
            "tsdf_voxel" => opt_str(&self.tsdf_voxel),
            "truncation_voxels" => self.truncation_voxels.to_string(),
            "tau" => opt_str(&self.tau),
            "threads" => opt_str(&self.threads),
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        match key {
            "scene" => self.scene_dir = PathBuf::from(value),
            "output" => self.output_dir = PathBuf::from(value),
            "global_steps" => t.global.steps = parse(key, value)?,
            "global_t0" => t.global.t0 = parse(key, value)?,
            "global_lr" => t.global.lr = parse(key, value)?,
            "per_view_steps" => t.per_view.steps = parse(key, value)?,
            "per_view_t0" => t.per_view.t0 = parse(key, value)?,
            "per_view_lr" => t.per_view.lr = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "weight_decay" => t.weight_decay = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "head_mode" => t.head_mode = value.parse::<HeadMode>()?,
            "neighbors" => self.neighbors = parse(key, value)?,
            "reliability_threshold" => self.reliability_threshold = parse(key, value)?,
            "cloud_source" => self.cloud_source = value.parse()?,
            "downsample_voxel" => self.downsample_voxel = parse_opt(key, value)?,
            "tsdf_voxel" => self.tsdf_voxel = parse_opt(key, value)?,
            "truncation_voxels" => self.truncation_voxels = parse(key, value)?,
            "tau" => self.tau = parse_opt(key, value)?,
            "threads" => self.threads = parse_opt(key, value)?,
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    pub fn from_key_values(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (k, doc) in PIPELINE_KEYS {
            let _ = writeln!(s, "# {doc}\n{k} = {}", self.get(k).expect("listed key"));
        }
        s
    }

    /// Range checks that do not need the scene.
    pub fn validate(&self) -> Result<(), String> {
        self.train.validate().map_err(|e| e.to_string())?;
        if self.neighbors == 0 {
            return Err("neighbors must be >= 1".into());
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        positive("reliability_threshold", self.reliability_threshold)?;
        positive("truncation_voxels", self.truncation_voxels)?;
        for (name, v) in [("downsample_voxel", self.downsample_voxel), ("tsdf_voxel", self.tsdf_voxel), ("tau", self.tau)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if self.threads == Some(0) {
            return Err("threads must be >= 1".into());
        }
        Ok(())
    }
}

/// Scene generator settings: the rig plus the corruption applied to both
/// depth channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynthConfig {
    pub scene: SynthSpec,
    pub corruption: CorruptionSpec,
}

pub const SYNTH_KEYS: &[&str] = &[
    "surface",
    "views",
    "width",
    "height",
    "hfov_deg",
    "distance",
    "arc_deg",
    "elevation",
    "anchors_per_view",
    "sample_stride",
    "seed",
    "corruption_seed",
    "outlier_cell",
    "vggt_scale_min",
    "vggt_scale_max",
    "vggt_shift_min",
    "vggt_shift_max",
    "vggt_poly",
    "vggt_noise",
    "vggt_outlier_fraction",
    "vggt_outlier_min",
    "vggt_outlier_max",
    "mono_scale_min",
    "mono_scale_max",
    "mono_shift_min",
    "mono_shift_max",
    "mono_poly",
    "mono_noise",
    "mono_outlier_fraction",
    "mono_outlier_min",
    "mono_outlier_max",
];

fn channel_field<'a>(c: &'a mut ChannelSpec, field: &str) -> Option<&'a mut f64> {
    Some(match field {
        "scale_min" => &mut c.scale_range.0,
        "scale_max" => &mut c.scale_range.1,
        "shift_min" => &mut c.shift_range.0,
        "shift_max" => &mut c.shift_range.1,
        "poly" => &mut c.poly_amplitude,
        "noise" => &mut c.noise_sigma,
        "outlier_fraction" => &mut c.outlier_fraction,
        "outlier_min" => &mut c.outlier_magnitude.0,
        "outlier_max" => &mut c.outlier_magnitude.1,
        _ => return None,
    })
}

impl SynthConfig {
    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.scene;
        Some(match key {
            "surface" => s.surface.to_string(),
            "views" => s.num_views.to_string(),
            "width" => s.width.to_string(),
            "height" => s.height.to_string(),
            "hfov_deg" => s.hfov_deg.to_string(),
            "distance" => s.distance.to_string(),
            "arc_deg" => s.arc_deg.to_string(),
            "elevation" => s.elevation.to_string(),
            "anchors_per_view" => s.anchors_per_view.to_string(),
            "sample_stride" => s.sample_stride.to_string(),
            "seed" => s.seed.to_string(),
            "corruption_seed" => self.corruption.seed.to_string(),
            "outlier_cell" => self.corruption.outlier_cell.to_string(),
            _ => {
                let (channel, field) = key.split_once('_')?;
                let mut c = match channel {
                    "vggt" => self.corruption.vggt,
                    "mono" => self.corruption.mono,
                    _ => return None,
                };
                channel_field(&mut c, field)?.to_string()
            }
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let s = &mut self.scene;
        match key {
            "surface" => s.surface = value.parse::<SurfacePreset>()?,
            "views" => s.num_views = parse(key, value)?,
            "width" => s.width = parse(key, value)?,
            "height" => s.height = parse(key, value)?,
            "hfov_deg" => s.hfov_deg = parse(key, value)?,
            "distance" => s.distance = parse(key, value)?,
            "arc_deg" => s.arc_deg = parse(key, value)?,
            "elevation" => s.elevation = parse(key, value)?,
            "anchors_per_view" => s.anchors_per_view = parse(key, value)?,
            "sample_stride" => s.sample_stride = parse(key, value)?,
            "seed" => s.seed = parse(key, value)?,
            "corruption_seed" => self.corruption.seed = parse(key, value)?,
            "outlier_cell" => self.corruption.outlier_cell = parse(key, value)?,
            _ => {
                let unknown = || format!("unknown synth key {key:?}");
                let (channel, field) = key.split_once('_').ok_or_else(unknown)?;
                let c = match channel {
                    "vggt" => &mut self.corruption.vggt,
                    "mono" => &mut self.corruption.mono,
                    _ => return Err(unknown()),
                };
                *channel_field(c, field).ok_or_else(unknown)? = parse(key, value)?;
            }
        }
        Ok(())
    }

    pub fn from_key_values(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> String {
        SYNTH_KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).expect("listed key"))).collect()
    }
}
