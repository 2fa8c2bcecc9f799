//! Additive attention over encoder states.

use crate::error::{CoreError, Result};
use crate::graph::{Graph, NodeId};

/// `query` and `keys` are `[hidden, hidden]` projections, `score` is the
/// `[hidden, 1]` scoring vector.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights {
    pub query: NodeId,
    pub keys: NodeId,
    pub score: NodeId,
}

/// Projects each encoder state once; reused across decoder steps.
pub fn project_keys(g: &mut Graph, enc_states: &[NodeId], w: &AttentionWeights) -> Result<Vec<NodeId>> {
    enc_states.iter().map(|&s| g.matmul(s, w.keys)).collect()
}

/// Attention context from pre-projected keys: weights are a softmax over
/// `score . tanh(state*Wq + key_i)`, the context the weighted sum of the
/// raw encoder states.
pub fn attend_with_keys(
    g: &mut Graph,
    state: NodeId,
    enc_states: &[NodeId],
    keys: &[NodeId],
    w: &AttentionWeights,
) -> Result<NodeId> {
    if enc_states.is_empty() || enc_states.len() != keys.len() {
        return Err(CoreError::usage(format!(
            "attend needs matching non-empty states/keys, got {}/{}",
            enc_states.len(),
            keys.len()
        )));
    }
    let projected = g.matmul(state, w.query)?;
    let mut scores = Vec::with_capacity(keys.len());
    for &k in keys {
        let sum = g.add(projected, k)?;
        let act = g.tanh(sum);
        scores.push(g.matmul(act, w.score)?);
    }
    let scores = g.concat(&scores)?;
    let weights = g.softmax(scores);

    let hid = g.shape(enc_states[0]).1;
    let stacked = g.concat(enc_states)?;
    let stacked = g.reshape(stacked, enc_states.len(), hid)?;
    g.matmul(weights, stacked)
}

/// Convenience form that projects the keys itself.
pub fn attend(
    g: &mut Graph,
    state: NodeId,
    enc_states: &[NodeId],
    w: &AttentionWeights,
) -> Result<NodeId> {
    let keys = project_keys(g, enc_states, w)?;
    attend_with_keys(g, state, enc_states, &keys, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{init_uniform, seeded_rng};
    use crate::tensor::Tensor;

    fn random_weights(g: &mut Graph, hid: usize, seed: u64) -> AttentionWeights {
        let mut rng = seeded_rng(seed, 2);
        let q = init_uniform(vec![hid, hid], &mut rng);
        let k = init_uniform(vec![hid, hid], &mut rng);
        let v = init_uniform(vec![hid, 1], &mut rng);
        AttentionWeights {
            query: g.input(&q).unwrap(),
            keys: g.input(&k).unwrap(),
            score: g.input(&v).unwrap(),
        }
    }

    #[test]
    fn single_state_passes_through() {
        let mut g = Graph::new();
        let w = random_weights(&mut g, 4, 1);
        let state = g.input(&Tensor::row(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let enc = g.input(&Tensor::row(&[9.0, 8.0, 7.0, 6.0])).unwrap();
        let ctx = attend(&mut g, state, &[enc], &w).unwrap();
        for (a, b) in g.value(ctx).iter().zip(g.value(enc)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_states_give_their_common_value() {
        let mut g = Graph::new();
        let w = random_weights(&mut g, 3, 2);
        let state = g.input(&Tensor::row(&[1.0, -1.0, 0.5])).unwrap();
        let common = [0.3, 0.6, -0.9];
        let encs: Vec<NodeId> = (0..4)
            .map(|_| g.input(&Tensor::row(&common)).unwrap())
            .collect();
        let ctx = attend(&mut g, state, &encs, &w).unwrap();
        for (a, b) in g.value(ctx).iter().zip(&common) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_scoring_weights_average_the_states() {
        let mut g = Graph::new();
        let w = AttentionWeights {
            query: g.constant(2, 2, 0.0),
            keys: g.constant(2, 2, 0.0),
            score: g.constant(2, 1, 0.0),
        };
        let state = g.input(&Tensor::row(&[5.0, -5.0])).unwrap();
        let e1 = g.input(&Tensor::row(&[1.0, 3.0])).unwrap();
        let e2 = g.input(&Tensor::row(&[3.0, 5.0])).unwrap();
        let ctx = attend(&mut g, state, &[e1, e2], &w).unwrap();
        assert!((g.value(ctx)[0] - 2.0).abs() < 1e-15);
        assert!((g.value(ctx)[1] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_one_indirectly() {
        // Context of all-ones encoder states must be all ones for any
        // scores, because attention weights are convex.
        let mut g = Graph::new();
        let w = random_weights(&mut g, 3, 3);
        let state = g.input(&Tensor::row(&[0.7, 0.1, -0.4])).unwrap();
        let encs: Vec<NodeId> = (0..5).map(|_| g.constant(1, 3, 1.0)).collect();
        let ctx = attend(&mut g, state, &encs, &w).unwrap();
        for v in g.value(ctx) {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
