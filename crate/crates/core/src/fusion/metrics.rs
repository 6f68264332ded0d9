//! Point-set reconstruction metrics.

use super::KdTree;
use crate::geometry::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("{0} point set is empty")]
    Empty(&'static str),
    #[error("threshold must be positive and finite, got {0}")]
    Threshold(f64),
}

/// Distances from every point of `from` to its nearest neighbor in `to`.
pub fn nearest_distances(from: &[Vec3], to: &KdTree) -> Vec<f64> {
    from.par_iter().map(|p| to.nearest_distance(p)).collect()
}

fn mean(d: &[f64]) -> f64 {
    d.iter().sum::<f64>() / d.len() as f64
}

/// Symmetric Chamfer distance: half the sum of both directed mean distances.
pub fn chamfer_distance(pred: &[Vec3], gt: &[Vec3]) -> Result<f64, MetricError> {
    Ok(evaluate(pred, gt, f64::MAX)?.chamfer)
}

/// Precision, recall and their harmonic mean at threshold `tau`.
pub fn fscore(pred: &[Vec3], gt: &[Vec3], tau: f64) -> Result<(f64, f64, f64), MetricError> {
    let r = evaluate(pred, gt, tau)?;
    Ok((r.precision, r.recall, r.f1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub chamfer: f64,
    /// Mean prediction to ground-truth distance.
    pub accuracy: f64,
    /// Mean ground-truth to prediction distance.
    pub completeness: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tau: f64,
    pub num_pred: usize,
    pub num_gt: usize,
}

pub fn evaluate(pred: &[Vec3], gt: &[Vec3], tau: f64) -> Result<EvalReport, MetricError> {
    if !(tau > 0.0) || tau.is_nan() {
        return Err(MetricError::Threshold(tau));
    }
    if pred.is_empty() {
        return Err(MetricError::Empty("predicted"));
    }
    if gt.is_empty() {
        return Err(MetricError::Empty("ground-truth"));
    }
    let d_pred = nearest_distances(pred, &KdTree::new(gt));
    let d_gt = nearest_distances(gt, &KdTree::new(pred));
    let accuracy = mean(&d_pred);
    let completeness = mean(&d_gt);
    let precision = d_pred.iter().filter(|&&d| d < tau).count() as f64 / pred.len() as f64;
    let recall = d_gt.iter().filter(|&&d| d < tau).count() as f64 / gt.len() as f64;
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(EvalReport {
        chamfer: 0.5 * (accuracy + completeness),
        accuracy,
        completeness,
        precision,
        recall,
        f1,
        tau,
        num_pred: pred.len(),
        num_gt: gt.len(),
    })
}

impl EvalReport {
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("chamfer", self.chamfer),
            ("accuracy", self.accuracy),
            ("completeness", self.completeness),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("tau", self.tau),
        ] {
            let _ = writeln!(s, "{k} = {v:e}");
        }
        let _ = writeln!(s, "num_pred = {}", self.num_pred);
        let _ = writeln!(s, "num_gt = {}", self.num_gt);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_sets() {
        let a = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let b = [Vec3::new(0.0, 0.5, 0.0)];
        // a->b: 0.5, sqrt(1.25); b->a: 0.5
        let r = evaluate(&a, &b, 0.6).unwrap();
        let acc = (0.5 + 1.25f64.sqrt()) / 2.0;
        assert!((r.accuracy - acc).abs() < 1e-15);
        assert_eq!(r.completeness, 0.5);
        assert!((r.chamfer - 0.5 * (acc + 0.5)).abs() < 1e-15);
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.recall, 1.0);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_sets() {
        let a = [Vec3::new(0.1, 0.2, 0.3), Vec3::new(-1.0, 2.0, 0.5)];
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(fscore(&a, &a, 1e-9).unwrap(), (1.0, 1.0, 1.0));
    }

    #[test]
    fn errors() {
        let a = [Vec3::zeros()];
        assert_eq!(evaluate(&[], &a, 0.1), Err(MetricError::Empty("predicted")));
        assert_eq!(evaluate(&a, &[], 0.1), Err(MetricError::Empty("ground-truth")));
        assert_eq!(evaluate(&a, &a, 0.0), Err(MetricError::Threshold(0.0)));
        assert!(evaluate(&a, &a, f64::NAN).is_err());
    }

    #[test]
    fn report_serializes() {
        let a = [Vec3::zeros()];
        let r = evaluate(&a, &a, 0.1).unwrap();
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_key_values().contains("num_gt = 1"));
    }
}
