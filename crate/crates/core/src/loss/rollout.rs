//! Inference-time rollout with per-series stopping.

use crate::error::Result;
use crate::graph::Graph;
use crate::model::{DecoderFeed, Model, StepDistributions};
use crate::tensor::{one_hot, Tensor};

use super::confidence::{confidence_value, continuation_test};
use super::DynamicLossConfig;

/// What a rollout produced for one window.
#[derive(Debug, Clone)]
pub struct RolloutOutcome {
    /// Argmax labels per series, truncated at that series' stop index.
    pub predictions: Vec<Vec<usize>>,
    /// Stop index per series; 0 means nothing was emitted.
    pub lengths: Vec<usize>,
    /// Distribution snapshots for the full horizon (diagnostics).
    pub dists: StepDistributions,
}

/// Decodes up to the configured horizon feeding the model its own
/// previous argmax labels, then cuts each series at its first
/// confidence violation. The cut is a hard threshold regardless of the
/// training mask mode.
pub fn dynamic_rollout(
    model: &Model,
    x: &Tensor,
    first_label: &[usize],
    cfg: &DynamicLossConfig,
) -> Result<RolloutOutcome> {
    rollout_with_feed(model, x, first_label, cfg, DecoderFeed::SelfFed)
}

/// Rollout with an explicit decoder feed; teacher-forced feeds make the
/// stop indices comparable with the training-side trace.
pub fn rollout_with_feed(
    model: &Model,
    x: &Tensor,
    first_label: &[usize],
    cfg: &DynamicLossConfig,
    feed: DecoderFeed,
) -> Result<RolloutOutcome> {
    cfg.validate()?;
    let mut g = Graph::new();
    let trace = model.forward(&mut g, x, first_label, cfg.horizon, feed)?;
    let snapshots = StepDistributions::from_graph(&g, &trace.dists, model.config.classes);

    let series = model.config.series;
    let mut predictions = vec![Vec::new(); series];
    let mut lengths = vec![0usize; series];

    for q in 0..series {
        let mut prev: Option<Vec<f64>> = if cfg.kind.is_volatility() {
            Some(one_hot(first_label[q], model.config.classes)?.values().to_vec())
        } else {
            None
        };
        let mut stop = cfg.horizon;
        for t in 0..cfg.horizon {
            let p = &snapshots.probs[t][q];
            let gv = confidence_value(cfg.kind, p, prev.as_deref())?;
            if !continuation_test(gv, cfg) {
                stop = t;
                break;
            }
            prev = Some(p.clone());
        }
        lengths[q] = stop;
        for t in 0..stop {
            let p = &snapshots.probs[t][q];
            let mut best = 0;
            for i in 1..p.len() {
                if p[i] > p[best] {
                    best = i;
                }
            }
            predictions[q].push(best);
        }
    }

    Ok(RolloutOutcome {
        predictions,
        lengths,
        dists: snapshots,
    })
}
