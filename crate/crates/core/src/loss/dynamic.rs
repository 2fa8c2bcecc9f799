//! Assembly of the per-sample dynamic loss and its backward rule.

use crate::error::{CoreError, Result};
use crate::graph::{Graph, NodeId};
use crate::tensor::one_hot;

use super::confidence::{
    confidence_node, continuation_test, kl_onehot_node, mask_weight_node, penalty_node,
};
use super::{ConfidenceTrace, DynamicLossConfig, MaskMode, SeriesTrace};

/// Builds the dynamic loss over teacher-forced distributions.
///
/// `dists[t][q]` are the distribution nodes for every step of the full
/// horizon, `labels[t][q]` the ground-truth classes, and
/// `first_decoder_labels[q]` the observable label of the last encoder
/// tick (the time-dependent confidence kinds compare step 1 against its
/// one-hot).
///
/// Per series the stop index is the step count before the first
/// confidence violation. Indicator masking keeps the divergence terms
/// strictly before the stop and penalty terms strictly after it, so a
/// later confidence recovery is never re-included. Sigmoid masking
/// keeps every step, each weighted by its mask value, plus all penalty
/// terms; the stop index then only governs prediction extraction.
pub fn dynamic_loss(
    g: &mut Graph,
    dists: &[Vec<NodeId>],
    labels: &[Vec<usize>],
    first_decoder_labels: &[usize],
    cfg: &DynamicLossConfig,
) -> Result<(NodeId, ConfidenceTrace)> {
    cfg.validate()?;
    if dists.len() != cfg.horizon {
        return Err(CoreError::shape(
            "dynamic_loss",
            format!("{} distribution steps vs horizon {}", dists.len(), cfg.horizon),
        ));
    }
    if labels.len() < dists.len() {
        return Err(CoreError::shape(
            "dynamic_loss",
            format!("{} label steps vs {} distribution steps", labels.len(), dists.len()),
        ));
    }
    let series = dists.first().map(Vec::len).unwrap_or(0);
    if series == 0 || first_decoder_labels.len() != series {
        return Err(CoreError::shape(
            "dynamic_loss",
            format!(
                "{series} series in distributions vs {} first labels",
                first_decoder_labels.len()
            ),
        ));
    }

    let mut terms: Vec<NodeId> = Vec::new();
    let mut traces = Vec::with_capacity(series);

    for q in 0..series {
        let classes = g.shape(dists[0][q]).1;
        let mut prev: Option<NodeId> = if cfg.kind.is_volatility() {
            let oh = one_hot(first_decoder_labels[q], classes)?;
            Some(g.input(&oh)?)
        } else {
            None
        };

        let mut kl_nodes = Vec::with_capacity(cfg.horizon);
        let mut g_nodes = Vec::with_capacity(cfg.horizon);
        let mut kl_values = Vec::with_capacity(cfg.horizon);
        let mut g_values = Vec::with_capacity(cfg.horizon);

        for (t, row) in dists.iter().enumerate() {
            let d = row[q];
            g.ensure_finite(d, "dynamic_loss distribution")?;
            let kl = kl_onehot_node(g, labels[t][q], d)?;
            let gn = confidence_node(g, cfg.kind, d, prev)?;
            kl_values.push(g.scalar(kl)?);
            g_values.push(g.scalar(gn)?);
            kl_nodes.push(kl);
            g_nodes.push(gn);
            prev = Some(d);
        }

        let stop = g_values
            .iter()
            .position(|&gv| !continuation_test(gv, cfg))
            .unwrap_or(cfg.horizon);

        match cfg.mask {
            MaskMode::Indicator => {
                terms.extend_from_slice(&kl_nodes[..stop]);
                for &gn in &g_nodes[stop..] {
                    terms.push(penalty_node(g, gn, cfg));
                }
            }
            MaskMode::Sigmoid => {
                for t in 0..cfg.horizon {
                    let w = mask_weight_node(g, g_nodes[t], cfg);
                    terms.push(g.mul(w, kl_nodes[t])?);
                    terms.push(penalty_node(g, g_nodes[t], cfg));
                }
            }
        }

        traces.push(SeriesTrace {
            confidence: g_values,
            kl: kl_values,
            stop,
        });
    }

    let mut total = match terms.first() {
        Some(&t) => t,
        None => g.constant(1, 1, 0.0),
    };
    for &t in &terms[1..] {
        total = g.add(total, t)?;
    }
    Ok((total, ConfidenceTrace { series: traces }))
}

/// Unmasked full-horizon divergence sum: the plain objective the dynamic
/// loss reduces to when every step passes the threshold with no penalty.
pub fn static_full_loss(
    g: &mut Graph,
    dists: &[Vec<NodeId>],
    labels: &[Vec<usize>],
) -> Result<NodeId> {
    let mut total: Option<NodeId> = None;
    for (t, row) in dists.iter().enumerate() {
        for (q, &d) in row.iter().enumerate() {
            let kl = kl_onehot_node(g, labels[t][q], d)?;
            total = Some(match total {
                Some(acc) => g.add(acc, kl)?,
                None => kl,
            });
        }
    }
    total.ok_or_else(|| CoreError::usage("static_full_loss over zero steps"))
}

/// Backpropagates the assembled loss. The stop indices recorded in the
/// trace are structural constants of the graph, so this is standard
/// backpropagation treating them as fixed.
pub fn truncated_backward(g: &mut Graph, loss: NodeId) -> Result<()> {
    g.backward_scalar(loss)
}
