//! Pixel-wise affine depth correction field.
//!
//! A coordinate network maps `z = (d_v, d_m, u, v, ι)` to four coefficients
//! `(α_v, β_v, α_m, β_m)` and each head is corrected as `e^α · d + β`. Depth
//! inputs are divided by the scene's median anchor depth `c` before encoding,
//! and the network's shift outputs are in units of `c` as well, so a raw head
//! output `o` means `β = c · o` in scene units.
//!
//! Training first fits shared weights on every view's anchors, then refines a
//! private copy per view.

use crate::align::AnchorTriplet;
use crate::depth_map::{is_valid_depth, median_in_place, DepthMap};
use crate::geometry::{normalize_pixel, normalized_view_index, View};
use crate::io::{read_file, write_file, IoError};
use crate::nn::{
    architecture, backward, forward, read_weights, write_weights, AdamW, LrSchedule, MlpParams, NnError,
    PosEncConfig, Real, Workspace, HIDDEN_LAYERS, HIDDEN_WIDTH, OUTPUT_DIM,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

pub const INPUT_DIM: usize = 5;
const LOG_EVERY: u64 = 100;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("no anchor samples to train on")]
    EmptyTrainingSet,
    #[error("non-finite loss in {stage} training at step {step}")]
    NonFiniteLoss { stage: String, step: u64 },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("bad field manifest: {0}")]
    Manifest(String),
}

/// Which depth heads take part in training and in the final depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadMode {
    #[default]
    Both,
    VggtOnly,
    MonoOnly,
}

impl HeadMode {
    /// Loss weights of the (vggt, mono) heads.
    pub fn weights(self) -> (f64, f64) {
        match self {
            HeadMode::Both => (1.0, 1.0),
            HeadMode::VggtOnly => (1.0, 0.0),
            HeadMode::MonoOnly => (0.0, 1.0),
        }
    }

    /// Network depth inputs; a disabled head's slot repeats the other one.
    pub fn inputs(self, dv: f64, dm: f64) -> (f64, f64) {
        match self {
            HeadMode::Both => (dv, dm),
            HeadMode::VggtOnly => (dv, dv),
            HeadMode::MonoOnly => (dm, dm),
        }
    }

    /// Final per-pixel depth from corrected heads (0 when invalid).
    pub fn combine(self, dv: f64, dm: f64) -> f64 {
        match self {
            HeadMode::VggtOnly => dv,
            HeadMode::MonoOnly => dm,
            HeadMode::Both => match (is_valid_depth(dv), is_valid_depth(dm)) {
                (true, true) => 0.5 * (dv + dm),
                (true, false) => dv,
                (false, true) => dm,
                (false, false) => 0.0,
            },
        }
    }
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadMode::Both => "both",
            HeadMode::VggtOnly => "vggt",
            HeadMode::MonoOnly => "mono",
        })
    }
}

impl FromStr for HeadMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "both" => Ok(HeadMode::Both),
            "vggt" => Ok(HeadMode::VggtOnly),
            "mono" => Ok(HeadMode::MonoOnly),
            _ => Err(format!("unknown head mode {s:?} (expected both, vggt or mono)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConfig {
    pub steps: u64,
    pub t0: u64,
    pub lr: f64,
}

impl StageConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule::new(self.lr, self.t0)
    }

    fn validate(&self, name: &str) -> Result<(), FieldError> {
        if self.steps < 1 {
            return Err(FieldError::Config(format!("{name} steps must be >= 1")));
        }
        if self.t0 < 1 || self.t0 > self.steps {
            return Err(FieldError::Config(format!("{name} T0 must lie in 1..={} (got {})", self.steps, self.t0)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(FieldError::Config(format!("{name} learning rate must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub global: StageConfig,
    pub per_view: StageConfig,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub head_mode: HeadMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            global: StageConfig { steps: 5000, t0: 1000, lr: 1e-3 },
            per_view: StageConfig { steps: 500, t0: 250, lr: 1e-3 },
            batch_size: 1024,
            weight_decay: 1e-2,
            seed: 0,
            head_mode: HeadMode::Both,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        self.global.validate("global")?;
        self.per_view.validate("per-view")?;
        if self.batch_size == 0 {
            return Err(FieldError::Config("batch size must be >= 1".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(FieldError::Config("weight decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// One anchor observation: `z = (d_v, d_m, u, v, ι)` and its anchor depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionSample {
    pub view_id: usize,
    pub z: [f64; INPUT_DIM],
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub samples: Vec<CorrectionSample>,
    /// Median anchor depth over the scene.
    pub depth_scale: f64,
    pub num_views: usize,
}

impl TrainingSet {
    pub fn view_samples(&self, view_id: usize) -> Vec<CorrectionSample> {
        self.samples.iter().filter(|s| s.view_id == view_id).copied().collect()
    }
}

/// Assembles samples from per-view triplets whose depths are already
/// affine-aligned. `triplets[i]` belongs to `views[i]`.
pub fn build_training_set(views: &[View], triplets: &[Vec<AnchorTriplet>]) -> Result<TrainingSet, FieldError> {
    assert_eq!(views.len(), triplets.len(), "one triplet set per view");
    let n = views.len();
    let mut samples = Vec::with_capacity(triplets.iter().map(Vec::len).sum());
    for (i, (view, set)) in views.iter().zip(triplets).enumerate() {
        let iota = normalized_view_index(i, n);
        for t in set {
            let (u, v) = normalize_pixel(view.width(), view.height(), &t.pixel);
            samples.push(CorrectionSample { view_id: view.view_id, z: [t.d_vggt, t.d_mono, u, v, iota], target: t.d_anchor });
        }
    }
    if samples.is_empty() {
        return Err(FieldError::EmptyTrainingSet);
    }
    let mut anchors: Vec<f64> = samples.iter().map(|s| s.target).collect();
    let depth_scale = median_in_place(&mut anchors).expect("non-empty");
    Ok(TrainingSet { samples, depth_scale, num_views: n })
}

/// Per-head affine coefficients in scene units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub alpha_v: f64,
    pub beta_v: f64,
    pub alpha_m: f64,
    pub beta_m: f64,
}

impl Coefficients {
    pub const IDENTITY: Coefficients = Coefficients { alpha_v: 0.0, beta_v: 0.0, alpha_m: 0.0, beta_m: 0.0 };
}

fn positive_or_invalid(d: f64) -> f64 {
    if is_valid_depth(d) {
        d
    } else {
        0.0
    }
}

/// `(e^α_v · d_v + β_v, e^α_m · d_m + β_m)`; non-positive results become 0.
pub fn apply_coefficients(c: &Coefficients, d_v: f64, d_m: f64) -> (f64, f64) {
    (
        positive_or_invalid(c.alpha_v.exp() * d_v + c.beta_v),
        positive_or_invalid(c.alpha_m.exp() * d_m + c.beta_m),
    )
}

/// Encodes samples into a contiguous feature matrix for the network.
#[derive(Debug, Clone, Default)]
pub struct EncodedBatch<T> {
    pub features: Vec<T>,
    pub d_vggt: Vec<f64>,
    pub d_mono: Vec<f64>,
    pub target: Vec<f64>,
    dim: usize,
}

impl<T: Real> EncodedBatch<T> {
    pub fn new(samples: &[CorrectionSample], encoding: &PosEncConfig, depth_scale: f64, mode: HeadMode) -> Self {
        let dim = encoding.encoded_dim(INPUT_DIM);
        let mut features = vec![T::zero(); samples.len() * dim];
        for (s, row) in samples.iter().zip(features.chunks_exact_mut(dim)) {
            encoding.encode_into(&network_input(&s.z, depth_scale, mode), row);
        }
        Self {
            features,
            d_vggt: samples.iter().map(|s| s.z[0]).collect(),
            d_mono: samples.iter().map(|s| s.z[1]).collect(),
            target: samples.iter().map(|s| s.target).collect(),
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    /// Copies the rows `idx` into `out`.
    pub fn gather(&self, idx: &[usize], out: &mut EncodedBatch<T>) {
        out.dim = self.dim;
        out.features.clear();
        out.d_vggt.clear();
        out.d_mono.clear();
        out.target.clear();
        for &i in idx {
            out.features.extend_from_slice(&self.features[i * self.dim..(i + 1) * self.dim]);
            out.d_vggt.push(self.d_vggt[i]);
            out.d_mono.push(self.d_mono[i]);
            out.target.push(self.target[i]);
        }
    }
}

fn network_input(z: &[f64; INPUT_DIM], depth_scale: f64, mode: HeadMode) -> [f64; INPUT_DIM] {
    let (dv, dm) = mode.inputs(z[0], z[1]);
    [dv / depth_scale, dm / depth_scale, z[2], z[3], z[4]]
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean sparse L1 loss of a batch and, when `grad` is given, its exact
/// gradient with respect to the network parameters.
pub fn sparse_l1_loss_grad<T: Real>(
    params: &MlpParams<T>,
    batch: &EncodedBatch<T>,
    depth_scale: f64,
    mode: HeadMode,
    ws: &mut Workspace<T>,
    d_out: &mut Vec<T>,
    grad: Option<&mut MlpParams<T>>,
) -> Result<f64, NnError> {
    let n = batch.len();
    if n == 0 {
        return Err(NnError::DimensionMismatch("empty batch".into()));
    }
    let out = forward(params, &batch.features, n, ws)?;
    let (wv, wm) = mode.weights();
    let inv_n = 1.0 / n as f64;
    d_out.clear();
    d_out.resize(n * OUTPUT_DIM, T::zero());
    let mut loss = 0.0;
    for (i, (o, g)) in out.chunks_exact(OUTPUT_DIM).zip(d_out.chunks_exact_mut(OUTPUT_DIM)).enumerate() {
        let t = batch.target[i];
        let (dv, dm) = (batch.d_vggt[i], batch.d_mono[i]);
        let sv = o[0].f64().exp() * dv;
        let sm = o[2].f64().exp() * dm;
        let rv = sv + depth_scale * o[1].f64() - t;
        let rm = sm + depth_scale * o[3].f64() - t;
        loss += wv * rv.abs() + wm * rm.abs();
        let gv = wv * sign(rv) * inv_n;
        let gm = wm * sign(rm) * inv_n;
        g[0] = T::of(gv * sv);
        g[1] = T::of(gv * depth_scale);
        g[2] = T::of(gm * sm);
        g[3] = T::of(gm * depth_scale);
    }
    if let Some(grad) = grad {
        backward(params, &batch.features, n, ws, d_out, grad)?;
    }
    Ok(loss * inv_n)
}

/// Learned correction: global weights plus optional per-view refinements.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionField {
    pub global_weights: MlpParams<f32>,
    pub per_view_weights: BTreeMap<usize, MlpParams<f32>>,
    pub encoding: PosEncConfig,
    pub depth_scale: f64,
    pub num_views: usize,
    pub head_mode: HeadMode,
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

fn view_rng(seed: u64, view_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(view_id as u64 + 1);
    rng
}

impl CorrectionField {
    /// Freshly initialized field: random hidden layers, zero head.
    pub fn identity(depth_scale: f64, num_views: usize, head_mode: HeadMode, seed: u64) -> Self {
        let encoding = PosEncConfig::default();
        let dims = architecture(encoding.encoded_dim(INPUT_DIM), HIDDEN_WIDTH, HIDDEN_LAYERS, OUTPUT_DIM);
        Self {
            global_weights: MlpParams::init(&dims, &mut init_rng(seed)),
            per_view_weights: BTreeMap::new(),
            encoding,
            depth_scale,
            num_views,
            head_mode,
        }
    }

    /// Per-view weights when fine-tuned, otherwise the global weights.
    pub fn weights_for(&self, view_id: usize) -> &MlpParams<f32> {
        self.per_view_weights.get(&view_id).unwrap_or(&self.global_weights)
    }

    pub fn iota(&self, view_id: usize) -> f64 {
        normalized_view_index(view_id, self.num_views)
    }

    fn coefficients_from(&self, out: &[f32]) -> Coefficients {
        let c = self.depth_scale;
        let (wv, wm) = self.head_mode.weights();
        let mut k = Coefficients {
            alpha_v: out[0] as f64,
            beta_v: c * out[1] as f64,
            alpha_m: out[2] as f64,
            beta_m: c * out[3] as f64,
        };
        // a head without loss is passed through unchanged
        if wv == 0.0 {
            k.alpha_v = 0.0;
            k.beta_v = 0.0;
        }
        if wm == 0.0 {
            k.alpha_m = 0.0;
            k.beta_m = 0.0;
        }
        k
    }

    pub fn coefficients(&self, weights: &MlpParams<f32>, z: &[f64; INPUT_DIM]) -> Coefficients {
        let mut feat = vec![0f32; self.encoding.encoded_dim(INPUT_DIM)];
        self.encoding.encode_into(&network_input(z, self.depth_scale, self.head_mode), &mut feat);
        let out = weights.forward_one(&feat).expect("field weights match the encoder");
        self.coefficients_from(&out)
    }

    /// Corrects one pixel's depth pair with the given weights.
    pub fn correct_depth_pair(
        &self,
        weights: &MlpParams<f32>,
        d_v: f64,
        d_m: f64,
        u: f64,
        v: f64,
        iota: f64,
    ) -> (f64, f64) {
        let k = self.coefficients(weights, &[d_v, d_m, u, v, iota]);
        apply_coefficients(&k, d_v, d_m)
    }

    /// Dense correction of a view's aligned depth maps. A pixel is corrected
    /// only where both inputs are valid; others stay invalid.
    pub fn correct_depth_maps(&self, view: &View, d_vggt: &DepthMap, d_mono: &DepthMap) -> (DepthMap, DepthMap) {
        const CHUNK: usize = 4096;
        let (w, h) = (d_vggt.width(), d_vggt.height());
        assert!(d_mono.width() == w && d_mono.height() == h, "depth maps differ in size");
        let weights = self.weights_for(view.view_id);
        let iota = self.iota(view.view_id);
        let pixels: Vec<usize> = (0..w * h)
            .filter(|&i| is_valid_depth(d_vggt.values()[i]) && is_valid_depth(d_mono.values()[i]))
            .collect();
        let dim = self.encoding.encoded_dim(INPUT_DIM);
        let corrected: Vec<(usize, f64, f64)> = pixels
            .par_chunks(CHUNK)
            .flat_map_iter(|chunk| {
                let mut feats = vec![0f32; chunk.len() * dim];
                for (&i, row) in chunk.iter().zip(feats.chunks_exact_mut(dim)) {
                    let z = self.pixel_input(i, w, h, d_vggt, d_mono, iota);
                    self.encoding.encode_into(&network_input(&z, self.depth_scale, self.head_mode), row);
                }
                let mut ws = Workspace::default();
                let out = forward(weights, &feats, chunk.len(), &mut ws).expect("field weights match the encoder");
                chunk
                    .iter()
                    .zip(out.chunks_exact(OUTPUT_DIM))
                    .map(|(&i, o)| {
                        let k = self.coefficients_from(o);
                        let (a, b) = apply_coefficients(&k, d_vggt.values()[i], d_mono.values()[i]);
                        (i, a, b)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut out_v = DepthMap::filled(w, h, 0.0);
        let mut out_m = DepthMap::filled(w, h, 0.0);
        for (i, a, b) in corrected {
            out_v.values_mut()[i] = a;
            out_m.values_mut()[i] = b;
        }
        (out_v, out_m)
    }

    fn pixel_input(&self, i: usize, w: usize, h: usize, dv: &DepthMap, dm: &DepthMap, iota: f64) -> [f64; INPUT_DIM] {
        let p = crate::geometry::PixelCoord::new((i % w) as f64, (i / w) as f64);
        let (u, v) = normalize_pixel(w, h, &p);
        [dv.values()[i], dm.values()[i], u, v, iota]
    }

    /// Mean sparse L1 over `samples` under the given weights.
    pub fn sparse_l1_loss(&self, weights: &MlpParams<f32>, samples: &[CorrectionSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let batch = EncodedBatch::<f32>::new(samples, &self.encoding, self.depth_scale, self.head_mode);
        full_loss(weights, &batch, self.depth_scale, self.head_mode)
    }
}

fn full_loss(weights: &MlpParams<f32>, data: &EncodedBatch<f32>, depth_scale: f64, mode: HeadMode) -> f64 {
    const CHUNK: usize = 8192;
    let mut ws = Workspace::default();
    let mut d_out = Vec::new();
    let mut part = EncodedBatch::default();
    let mut total = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(CHUNK) {
        data.gather(chunk, &mut part);
        let l = sparse_l1_loss_grad(weights, &part, depth_scale, mode, &mut ws, &mut d_out, None)
            .expect("weights match the encoder");
        total += l * chunk.len() as f64;
    }
    total / data.len() as f64
}

/// Minibatch AdamW over `data` with a warm-restart cosine schedule. Returns
/// the last minibatch loss.
#[allow(clippy::too_many_arguments)]
fn run_stage(
    params: &mut MlpParams<f32>,
    data: &EncodedBatch<f32>,
    stage: &StageConfig,
    batch_size: usize,
    weight_decay: f64,
    depth_scale: f64,
    mode: HeadMode,
    rng: &mut ChaCha8Rng,
    label: &str,
) -> Result<f64, FieldError> {
    let schedule = stage.schedule();
    let mut opt = AdamW::for_params(params, weight_decay);
    let mut grad = MlpParams::zeros(params.dims());
    let mut ws = Workspace::default();
    let mut d_out = Vec::new();
    let mut batch = EncodedBatch::default();
    let mut idx = vec![0usize; batch_size];
    let mut last = f64::NAN;
    for step in 0..stage.steps {
        for i in idx.iter_mut() {
            *i = rng.random_range(0..data.len());
        }
        data.gather(&idx, &mut batch);
        let loss = sparse_l1_loss_grad(params, &batch, depth_scale, mode, &mut ws, &mut d_out, Some(&mut grad))?;
        if !loss.is_finite() {
            return Err(FieldError::NonFiniteLoss { stage: label.to_string(), step });
        }
        if step % LOG_EVERY == 0 {
            log::debug!("{label} step {step}: loss {loss:.6e}");
        }
        opt.step_params(params, &grad, schedule.lr(step)).map_err(|e| match e {
            NnError::NonFiniteGradient(_) => FieldError::NonFiniteLoss { stage: label.to_string(), step },
            other => other.into(),
        })?;
        last = loss;
    }
    Ok(last)
}

/// Trains the shared weights on all samples, starting from `field`'s global
/// weights.
pub fn train_global(field: &mut CorrectionField, set: &TrainingSet, config: &TrainConfig) -> Result<f64, FieldError> {
    config.validate()?;
    if set.samples.is_empty() {
        return Err(FieldError::EmptyTrainingSet);
    }
    let data = EncodedBatch::new(&set.samples, &field.encoding, field.depth_scale, field.head_mode);
    let before = full_loss(&field.global_weights, &data, field.depth_scale, field.head_mode);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_stage(
        &mut field.global_weights,
        &data,
        &config.global,
        config.batch_size,
        config.weight_decay,
        field.depth_scale,
        field.head_mode,
        &mut rng,
        "global",
    )?;
    let after = full_loss(&field.global_weights, &data, field.depth_scale, field.head_mode);
    log::info!("global training: anchor L1 {before:.6e} -> {after:.6e}");
    Ok(after)
}

/// Fine-tunes a copy of `start` on one view's samples. Keeps `start` when the
/// view has no samples or when fine-tuning fails to lower the anchor loss.
pub fn finetune_view(
    field: &CorrectionField,
    start: &MlpParams<f32>,
    view_id: usize,
    samples: &[CorrectionSample],
    config: &TrainConfig,
) -> Result<MlpParams<f32>, FieldError> {
    config.validate()?;
    if samples.is_empty() {
        log::warn!("view {view_id} has no anchors; keeping global weights");
        return Ok(start.clone());
    }
    let data = EncodedBatch::new(samples, &field.encoding, field.depth_scale, field.head_mode);
    let before = full_loss(start, &data, field.depth_scale, field.head_mode);
    let mut params = start.clone();
    let mut rng = view_rng(config.seed, view_id);
    run_stage(
        &mut params,
        &data,
        &config.per_view,
        config.batch_size,
        config.weight_decay,
        field.depth_scale,
        field.head_mode,
        &mut rng,
        &format!("view {view_id}"),
    )?;
    let after = full_loss(&params, &data, field.depth_scale, field.head_mode);
    log::debug!("view {view_id}: anchor L1 {before:.6e} -> {after:.6e}");
    if after > before {
        log::warn!("view {view_id}: fine-tuning raised anchor L1 ({before:.4e} -> {after:.4e}); keeping global weights");
        return Ok(start.clone());
    }
    Ok(params)
}

/// Fine-tunes every view from the current global weights, concurrently.
pub fn finetune_all(field: &mut CorrectionField, set: &TrainingSet, config: &TrainConfig) -> Result<(), FieldError> {
    let view_ids: Vec<usize> = {
        let mut ids: Vec<usize> = set.samples.iter().map(|s| s.view_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let snapshot = field.global_weights.clone();
    let frozen = &*field;
    let tuned: Vec<(usize, MlpParams<f32>)> = view_ids
        .par_iter()
        .map(|&id| finetune_view(frozen, &snapshot, id, &set.view_samples(id), config).map(|w| (id, w)))
        .collect::<Result<_, _>>()?;
    field.per_view_weights = tuned.into_iter().collect();
    Ok(())
}

/// Global training followed by per-view fine-tuning.
pub fn train_field(set: &TrainingSet, config: &TrainConfig) -> Result<CorrectionField, FieldError> {
    config.validate()?;
    let mut field = CorrectionField::identity(set.depth_scale, set.num_views, config.head_mode, config.seed);
    train_global(&mut field, set, config)?;
    finetune_all(&mut field, set, config)?;
    Ok(field)
}

const MANIFEST: &str = "field.txt";

fn weight_file(view: Option<usize>) -> String {
    match view {
        None => "global.ndcw".to_string(),
        Some(v) => format!("view_{v:04}.ndcw"),
    }
}

/// Writes the field as a key-value manifest plus one weight file per set.
pub fn save_field(dir: &Path, field: &CorrectionField) -> Result<(), FieldError> {
    let views: Vec<String> = field.per_view_weights.keys().map(|v| v.to_string()).collect();
    let manifest = format!(
        "depth_scale = {}\nnum_views = {}\nhead_mode = {}\nnum_frequencies = {}\ninclude_identity = {}\nglobal = {}\nper_view = {}\n",
        field.depth_scale,
        field.num_views,
        field.head_mode,
        field.encoding.num_frequencies,
        field.encoding.include_identity,
        weight_file(None),
        views.join(","),
    );
    write_file(&dir.join(MANIFEST), manifest.as_bytes())?;
    write_file(&dir.join(weight_file(None)), &write_weights(&field.global_weights))?;
    for (&v, w) in &field.per_view_weights {
        write_file(&dir.join(weight_file(Some(v))), &write_weights(w))?;
    }
    Ok(())
}

pub fn load_field(dir: &Path) -> Result<CorrectionField, FieldError> {
    let text = String::from_utf8(read_file(&dir.join(MANIFEST))?)
        .map_err(|_| FieldError::Manifest("manifest is not UTF-8".into()))?;
    let kv = crate::config::parse_key_values(&text).map_err(FieldError::Manifest)?;
    let get = |k: &str| kv.get(k).ok_or_else(|| FieldError::Manifest(format!("missing key {k}")));
    fn parse<T: FromStr>(k: &str, v: &str) -> Result<T, FieldError> {
        v.parse().map_err(|_| FieldError::Manifest(format!("bad value for {k}: {v:?}")))
    }
    let encoding = PosEncConfig {
        num_frequencies: parse("num_frequencies", get("num_frequencies")?)?,
        include_identity: parse("include_identity", get("include_identity")?)?,
    };
    let global_weights = read_weights(&read_file(&dir.join(get("global")?))?)?;
    if global_weights.input_dim() != encoding.encoded_dim(INPUT_DIM) || global_weights.output_dim() != OUTPUT_DIM {
        return Err(FieldError::Manifest("weight dimensions do not match the encoder".into()));
    }
    let mut per_view_weights = BTreeMap::new();
    for v in get("per_view")?.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let id: usize = parse("per_view", v)?;
        let w = read_weights(&read_file(&dir.join(weight_file(Some(id))))?)?;
        if !w.same_shape(&global_weights) {
            return Err(FieldError::Manifest(format!("view {id} weights differ in shape from the global weights")));
        }
        per_view_weights.insert(id, w);
    }
    Ok(CorrectionField {
        global_weights,
        per_view_weights,
        encoding,
        depth_scale: parse("depth_scale", get("depth_scale")?)?,
        num_views: parse("num_views", get("num_views")?)?,
        head_mode: parse::<HeadMode>("head_mode", get("head_mode")?)?,
    })
}
