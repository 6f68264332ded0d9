//! Per-view affine alignment of predicted depth to sparse anchors.

use crate::depth_map::{is_valid_depth, DepthMap};
use crate::geometry::{PixelCoord, View};
use crate::io::SparseModel;

/// Depth samples of both modalities at the projection of one sparse point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorTriplet {
    pub pixel: PixelCoord,
    pub d_vggt: f64,
    pub d_mono: f64,
    /// Camera-frame depth of the sparse point.
    pub d_anchor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub scale: f64,
    pub shift: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams { scale: 1.0, shift: 0.0 };

    pub fn new(scale: f64, shift: f64) -> Self {
        Self { scale, shift }
    }

    #[inline]
    pub fn apply(&self, d: f64) -> f64 {
        self.scale * d + self.shift
    }
}

impl Default for AffineParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Samples both depth maps at every in-bounds projection of the sparse points
/// tracked in `view`. Triplets touching an invalid depth are dropped.
pub fn extract_triplets(
    view: &View,
    model: &SparseModel,
    d_vggt: &DepthMap,
    d_mono: &DepthMap,
) -> Vec<AnchorTriplet> {
    let mut out = Vec::new();
    for point in &model.points {
        if !point.track.iter().any(|(v, _)| *v == view.view_id) {
            continue;
        }
        let Some((pixel, d_anchor)) = view.project(&point.position) else {
            continue;
        };
        if !view.contains(&pixel) {
            continue;
        }
        let (Some(dv), Some(dm)) = (d_vggt.sample_bilinear(&pixel), d_mono.sample_bilinear(&pixel)) else {
            continue;
        };
        out.push(AnchorTriplet { pixel, d_vggt: dv, d_mono: dm, d_anchor });
    }
    out
}

/// Sum of squared residuals `Σ (s·d + b − d_anchor)²`.
pub fn affine_objective(samples: &[(f64, f64)], params: &AffineParams) -> f64 {
    samples.iter().map(|&(d, a)| (params.apply(d) - a).powi(2)).sum()
}

/// Closed-form least-squares fit of `d_anchor ≈ s·d + b`.
///
/// Fewer than two samples yield the identity; a sample set with
/// `var(d) < 1e-12` falls back to a pure scale `mean(d_anchor) / mean(d)`.
pub fn fit_affine(samples: &[(f64, f64)]) -> AffineParams {
    if samples.len() < 2 {
        log::warn!("affine fit with {} sample(s), using identity", samples.len());
        return AffineParams::IDENTITY;
    }
    let n = samples.len() as f64;
    let (sum_d, sum_a) = samples.iter().fold((0.0, 0.0), |(sd, sa), &(d, a)| (sd + d, sa + a));
    let mean_d = sum_d / n;
    let mean_a = sum_a / n;
    let (mut var, mut cov) = (0.0, 0.0);
    for &(d, a) in samples {
        let dd = d - mean_d;
        var += dd * dd;
        cov += dd * (a - mean_a);
    }
    var /= n;
    cov /= n;
    if var < 1e-12 {
        log::warn!("affine fit over constant depth, using scale-only fallback");
        return AffineParams::new(mean_a / mean_d, 0.0);
    }
    let scale = cov / var;
    AffineParams::new(scale, mean_a - scale * mean_d)
}

/// Applies `s·d + b` to valid pixels; results `≤ 0` become invalid.
pub fn apply_affine(map: &DepthMap, params: &AffineParams) -> DepthMap {
    let mut out = map.clone();
    for d in out.values_mut() {
        *d = if is_valid_depth(*d) {
            let c = params.apply(*d);
            if is_valid_depth(c) {
                c
            } else {
                0.0
            }
        } else {
            0.0
        };
    }
    out
}

/// Fits one affine transform per modality from the view's triplets.
pub fn fit_view(triplets: &[AnchorTriplet]) -> (AffineParams, AffineParams) {
    let v: Vec<(f64, f64)> = triplets.iter().map(|t| (t.d_vggt, t.d_anchor)).collect();
    let m: Vec<(f64, f64)> = triplets.iter().map(|t| (t.d_mono, t.d_anchor)).collect();
    (fit_affine(&v), fit_affine(&m))
}
