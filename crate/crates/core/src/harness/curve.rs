//! The fixed-horizon baseline curve: F1 at a few anchor lengths,
//! linearly interpolated in between.

use crate::data::Dataset;
use crate::error::{CoreError, Result};
use crate::loss::{ConfidenceKind, DynamicLossConfig, MaskMode};
use crate::model::ModelConfig;
use crate::params::mix64;

use super::walkforward::{run_walk_forward, RunReport, WalkForwardConfig};

/// Piecewise-linear F1-versus-length curve; evaluation clamps to the
/// anchor range.
#[derive(Debug, Clone)]
pub struct StaticCurve {
    /// `(length, f1)` sorted by length.
    pub anchors: Vec<(f64, f64)>,
}

impl StaticCurve {
    pub fn new(mut anchors: Vec<(f64, f64)>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(CoreError::usage("a curve needs at least one anchor"));
        }
        anchors.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite lengths"));
        Ok(StaticCurve { anchors })
    }

    /// Interpolated F1 at `length`, clamped to the anchor range.
    pub fn value(&self, length: f64) -> f64 {
        let first = self.anchors[0];
        let last = *self.anchors.last().expect("non-empty");
        if length <= first.0 {
            return first.1;
        }
        if length >= last.0 {
            return last.1;
        }
        for pair in self.anchors.windows(2) {
            let (x0, y0) = pair[0];
            let (x1, y1) = pair[1];
            if length <= x1 {
                let t = (length - x0) / (x1 - x0);
                return y0 + t * (y1 - y0);
            }
        }
        last.1
    }
}

/// A loss configuration that never masks and never penalizes: the
/// maximum confidence can't drop below zero, so every step is emitted.
pub fn always_emit_loss(horizon: usize) -> DynamicLossConfig {
    DynamicLossConfig::new(ConfidenceKind::Maximum, MaskMode::Indicator, 0.0, 0.0, horizon)
}

/// Trains one fixed-horizon model per anchor length and records its
/// measured F1. Also returns the per-length run reports so callers can
/// reuse the per-window numbers.
pub fn build_static_curve(
    model_cfg: &ModelConfig,
    dataset: &Dataset,
    wf: &WalkForwardConfig,
    lengths: &[usize],
    seed: u64,
) -> Result<(StaticCurve, Vec<(usize, RunReport)>)> {
    if lengths.is_empty() {
        return Err(CoreError::usage("static curve needs at least one length"));
    }
    let mut anchors = Vec::with_capacity(lengths.len());
    let mut reports = Vec::with_capacity(lengths.len());
    for &len in lengths {
        if len == 0 || len > model_cfg.horizon {
            return Err(CoreError::config(format!(
                "anchor length {len} outside 1..={}",
                model_cfg.horizon
            )));
        }
        let loss_cfg = always_emit_loss(len);
        let run_seed = mix64(seed ^ mix64(0x57a71c ^ len as u64));
        let report = run_walk_forward(model_cfg, &loss_cfg, dataset, wf, run_seed)?;
        let f1 = report.measured_f1.ok_or_else(|| {
            CoreError::data(format!("static anchor {len} produced no predictions"))
        })?;
        anchors.push((len as f64, f1));
        reports.push((len, report));
    }
    Ok((StaticCurve::new(anchors)?, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_between_anchors() {
        let c = StaticCurve::new(vec![(1.0, 0.60), (4.0, 0.55)]).unwrap();
        assert!((c.value(2.5) - 0.575).abs() < 1e-12);
    }

    #[test]
    fn anchor_values_are_exact() {
        let c = StaticCurve::new(vec![(1.0, 0.6), (4.0, 0.5), (7.0, 0.4), (10.0, 0.35)]).unwrap();
        for (x, y) in c.anchors.clone() {
            assert_eq!(c.value(x), y);
        }
    }

    #[test]
    fn clamps_outside_the_anchor_range() {
        let c = StaticCurve::new(vec![(1.0, 0.6), (10.0, 0.3)]).unwrap();
        assert_eq!(c.value(0.5), 0.6);
        assert_eq!(c.value(12.0), 0.3);
    }

    #[test]
    fn unsorted_anchors_are_sorted() {
        let c = StaticCurve::new(vec![(7.0, 0.4), (1.0, 0.6)]).unwrap();
        assert_eq!(c.anchors[0].0, 1.0);
    }
}
