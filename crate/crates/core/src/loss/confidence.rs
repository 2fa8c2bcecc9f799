//! Per-step divergence, the four confidence functions, masking weights
//! and the rectifier penalty. Each piece exists twice: as a plain-value
//! function (rollout, traces, tests) and as a graph builder (training,
//! where gradients must flow through G).

use crate::error::{CoreError, Result};
use crate::graph::{Graph, NodeId, LOG_CLAMP};

use super::{ConfidenceKind, DynamicLossConfig, MaskMode};

/// Divergence of a one-hot target from distribution `p`: `-log p[class]`,
/// clamped so saturated outputs stay finite.
pub fn kl_onehot(class: usize, p: &[f64]) -> Result<f64> {
    if class >= p.len() {
        return Err(CoreError::usage(format!(
            "class {class} out of range for {} classes",
            p.len()
        )));
    }
    Ok(-p[class].max(LOG_CLAMP).ln())
}

/// Graph form of [`kl_onehot`]; `dist` is a `[1, classes]` node.
pub fn kl_onehot_node(g: &mut Graph, class: usize, dist: NodeId) -> Result<NodeId> {
    let (_, classes) = g.shape(dist);
    if class >= classes {
        return Err(CoreError::usage(format!(
            "class {class} out of range for {classes} classes"
        )));
    }
    let picked = g.slice_cols(dist, class, class + 1)?;
    let lg = g.log(picked);
    Ok(g.scale(lg, -1.0))
}

/// Confidence value for one step. Volatility kinds (tv, emd) return the
/// negated measure; `prev` is required for those.
pub fn confidence_value(kind: ConfidenceKind, p: &[f64], prev: Option<&[f64]>) -> Result<f64> {
    match kind {
        ConfidenceKind::Maximum => Ok(p.iter().cloned().fold(f64::NEG_INFINITY, f64::max)),
        ConfidenceKind::ConfidenceDistance => {
            let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &v in p {
                if v > top {
                    second = top;
                    top = v;
                } else if v > second {
                    second = v;
                }
            }
            Ok(top - second)
        }
        ConfidenceKind::TotalVariation => {
            let prev = require_prev(kind, prev)?;
            let tv = p
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).abs())
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(-tv)
        }
        ConfidenceKind::EarthMover => {
            let prev = require_prev(kind, prev)?;
            let mut cdf_a = 0.0;
            let mut cdf_b = 0.0;
            let mut total = 0.0;
            for (a, b) in p.iter().zip(prev) {
                cdf_a += a;
                cdf_b += b;
                total += (cdf_a - cdf_b).abs();
            }
            Ok(-total)
        }
    }
}

fn require_prev<'a>(kind: ConfidenceKind, prev: Option<&'a [f64]>) -> Result<&'a [f64]> {
    prev.ok_or_else(|| {
        CoreError::usage(format!(
            "{kind} needs the previous step's distribution"
        ))
    })
}

/// Graph form of [`confidence_value`]. The selection structure (argmax,
/// abs branches) is fixed at the current values, which is exactly the
/// subgradient the training rule wants.
pub fn confidence_node(
    g: &mut Graph,
    kind: ConfidenceKind,
    p: NodeId,
    prev: Option<NodeId>,
) -> Result<NodeId> {
    match kind {
        ConfidenceKind::Maximum => g.max_over_cols(p),
        ConfidenceKind::ConfidenceDistance => {
            let values = g.value(p).to_vec();
            if values.len() < 2 {
                return Err(CoreError::shape(
                    "confidence_distance",
                    "needs at least two classes".to_string(),
                ));
            }
            let mut top = 0;
            for i in 1..values.len() {
                if values[i] > values[top] {
                    top = i;
                }
            }
            let top_node = g.slice_cols(p, top, top + 1)?;
            let mut runner: Option<NodeId> = None;
            for i in 0..values.len() {
                if i == top {
                    continue;
                }
                let s = g.slice_cols(p, i, i + 1)?;
                runner = Some(match runner {
                    Some(r) => g.max_elem(r, s)?,
                    None => s,
                });
            }
            g.sub(top_node, runner.expect("at least one non-top class"))
        }
        ConfidenceKind::TotalVariation => {
            let prev = prev
                .ok_or_else(|| CoreError::usage("tv needs the previous step's distribution"))?;
            let d = g.sub(p, prev)?;
            let a = g.abs(d)?;
            let m = g.max_over_cols(a)?;
            Ok(g.scale(m, -1.0))
        }
        ConfidenceKind::EarthMover => {
            let prev = prev
                .ok_or_else(|| CoreError::usage("emd needs the previous step's distribution"))?;
            let (_, classes) = g.shape(p);
            // CDF via a constant lower-triangular ones matrix:
            // cdf[j] = sum_{i<=j} p[i].
            let mut tri = vec![0.0; classes * classes];
            for i in 0..classes {
                for j in i..classes {
                    tri[i * classes + j] = 1.0;
                }
            }
            let tri = g.input(&crate::tensor::Tensor::new(vec![classes, classes], tri)?)?;
            let cdf_p = g.matmul(p, tri)?;
            let cdf_q = g.matmul(prev, tri)?;
            let d = g.sub(cdf_p, cdf_q)?;
            let a = g.abs(d)?;
            let s = g.sum_all(a);
            Ok(g.scale(s, -1.0))
        }
    }
}

/// Whether prediction continues at this step: `G >= threshold`, with the
/// boundary counting as continue.
pub fn continuation_test(g_value: f64, cfg: &DynamicLossConfig) -> bool {
    g_value >= cfg.threshold()
}

/// Mask weight in [0, 1] applied to the step's divergence term.
pub fn mask_weight(mode: MaskMode, g_value: f64, cfg: &DynamicLossConfig) -> f64 {
    match mode {
        MaskMode::Indicator => {
            if continuation_test(g_value, cfg) {
                1.0
            } else {
                0.0
            }
        }
        MaskMode::Sigmoid => {
            let z = cfg.sharpness * (g_value - cfg.threshold()) / cfg.sigmoid_scale();
            1.0 / (1.0 + (-z).exp())
        }
    }
}

/// Graph form of the sigmoid mask weight. Indicator masking has no node
/// form; it is structural (terms are included or not).
pub fn mask_weight_node(g: &mut Graph, g_node: NodeId, cfg: &DynamicLossConfig) -> NodeId {
    let shifted = g.add_scalar(g_node, -cfg.threshold());
    let scaled = g.scale(shifted, cfg.sharpness / cfg.sigmoid_scale());
    g.sigmoid(scaled)
}

/// Penalty for sub-threshold confidence: `lambda * max(threshold - G, 0)`.
pub fn penalty_value(g_value: f64, cfg: &DynamicLossConfig) -> f64 {
    cfg.lambda * (cfg.threshold() - g_value).max(0.0)
}

/// Graph form of [`penalty_value`]; gradient w.r.t. G is `-lambda` in
/// the active region and 0 at or past the threshold.
pub fn penalty_node(g: &mut Graph, g_node: NodeId, cfg: &DynamicLossConfig) -> NodeId {
    let neg = g.scale(g_node, -1.0);
    let gap = g.add_scalar(neg, cfg.threshold());
    let r = g.relu(gap);
    g.scale(r, cfg.lambda)
}
