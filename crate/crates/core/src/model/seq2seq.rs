//! Encoder/decoder forward passes with teacher-forced or self-fed
//! decoder inputs.

use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;

use super::attention::{attend_with_keys, project_keys, AttentionWeights};
use super::lstm::{lstm_step, LstmWeights};
use super::{argmax_labels, DecoderFeed, DecoderInput, ForwardTrace, Model};

/// Runs the encoder over `x` (`[input_len, series]`), returning every
/// hidden state plus the final (h, c) pair handed to the decoder.
pub(super) fn encode(
    model: &Model,
    g: &mut Graph,
    x: &Tensor,
) -> Result<(Vec<NodeId>, (NodeId, NodeId))> {
    let cfg = &model.config;
    let hid = cfg.hidden;
    let w = LstmWeights {
        w: g.param(&model.params, "enc.w")?,
        b: g.param(&model.params, "enc.b")?,
        hidden: hid,
    };
    let mut h = g.constant(1, hid, 0.0);
    let mut c = g.constant(1, hid, 0.0);
    let cols = cfg.series;
    let mut states = Vec::with_capacity(cfg.input_len);
    for t in 0..cfg.input_len {
        let row = &x.values()[t * cols..(t + 1) * cols];
        let inp = g.input(&Tensor::row(row))?;
        let (h2, c2) = lstm_step(g, inp, h, c, &w)?;
        h = h2;
        c = c2;
        states.push(h);
    }
    Ok((states, (h, c)))
}

/// One decoder step: previous labels (and optional attention context)
/// through the decoder cell, then one softmax head per series.
pub fn decode_step(
    model: &Model,
    g: &mut Graph,
    prev: NodeId,
    state: (NodeId, NodeId),
    context: Option<NodeId>,
    w: &LstmWeights,
) -> Result<(Vec<NodeId>, (NodeId, NodeId))> {
    let inp = match context {
        Some(ctx) => g.concat(&[prev, ctx])?,
        None => prev,
    };
    let (h, c) = lstm_step(g, inp, state.0, state.1, w)?;
    let dists = model.apply_heads(g, h)?;
    Ok((dists, (h, c)))
}

pub(super) fn forward(
    model: &Model,
    g: &mut Graph,
    x: &Tensor,
    first_label: &[usize],
    steps: usize,
    feed: DecoderFeed,
) -> Result<ForwardTrace> {
    let cfg = &model.config;
    let (enc_states, (h, c)) = encode(model, g, x)?;

    let dec_w = LstmWeights {
        w: g.param(&model.params, "dec.w")?,
        b: g.param(&model.params, "dec.b")?,
        hidden: cfg.hidden,
    };
    let attn = if cfg.attention {
        let w = AttentionWeights {
            query: g.param(&model.params, "attn.query.w")?,
            keys: g.param(&model.params, "attn.keys.w")?,
            score: g.param(&model.params, "attn.score.v")?,
        };
        let keys = project_keys(g, &enc_states, &w)?;
        Some((w, keys))
    } else {
        None
    };

    let mut state = (h, c);
    let mut prev_labels = first_label.to_vec();
    let mut dists = Vec::with_capacity(steps);
    let mut decoder_inputs = Vec::with_capacity(steps);

    for t in 0..steps {
        let prev = DecoderInput::from_labels(&prev_labels, cfg.classes)?;
        let prev_node = g.input(prev.tensor())?;
        decoder_inputs.push(prev_node);

        let context = match &attn {
            Some((w, keys)) => Some(attend_with_keys(g, state.0, &enc_states, keys, w)?),
            None => None,
        };
        let (step_dists, next_state) = decode_step(model, g, prev_node, state, context, &dec_w)?;
        state = next_state;

        prev_labels = match feed {
            DecoderFeed::TeacherForced(labels) => labels[t].clone(),
            DecoderFeed::SelfFed => argmax_labels(g, &step_dists),
        };
        dists.push(step_dists);
    }

    Ok(ForwardTrace {
        dists,
        decoder_inputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ModelKind, StepDistributions};
    use crate::params::seeded_rng;
    use rand::Rng;

    fn toy_config(q: usize, attention: bool) -> ModelConfig {
        ModelConfig {
            kind: ModelKind::Seq2Seq,
            series: q,
            classes: 5,
            hidden: 8,
            input_len: 4,
            horizon: 3,
            attention,
            layers: 1,
        }
    }

    fn zeroed(mut model: Model) -> Model {
        for (_, p) in model.params.iter_mut() {
            p.value.fill(0.0);
        }
        model
    }

    fn random_input(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = seeded_rng(seed, 77);
        let values: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(vec![rows, cols], values).unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_distributions_every_step() {
        let model = zeroed(Model::new(toy_config(2, true), 3).unwrap());
        let mut g = Graph::new();
        let x = random_input(4, 2, 1);
        let trace = model
            .forward(&mut g, &x, &[0, 4], 3, DecoderFeed::SelfFed)
            .unwrap();
        let snap = StepDistributions::from_graph(&g, &trace.dists, 5);
        snap.validate().unwrap();
        for row in &snap.probs {
            for p in row {
                for v in p {
                    assert!((v - 0.2).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn zero_weights_give_zero_encoder_states() {
        let model = zeroed(Model::new(toy_config(2, false), 3).unwrap());
        let mut g = Graph::new();
        let x = random_input(4, 2, 2);
        let (states, (h, c)) = model.encode(&mut g, &x).unwrap();
        for s in states {
            assert!(g.value(s).iter().all(|v| *v == 0.0));
        }
        assert!(g.value(h).iter().all(|v| *v == 0.0));
        assert!(g.value(c).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_tick_encoder_matches_one_cell_update() {
        let mut cfg = toy_config(2, false);
        cfg.input_len = 1;
        let model = Model::new(cfg, 11).unwrap();
        let x = random_input(1, 2, 3);

        let mut g = Graph::new();
        let (states, _) = model.encode(&mut g, &x).unwrap();
        assert_eq!(states.len(), 1);
        let from_encode = g.value(states[0]).to_vec();

        let mut g2 = Graph::new();
        let w = LstmWeights {
            w: g2.param(&model.params, "enc.w").unwrap(),
            b: g2.param(&model.params, "enc.b").unwrap(),
            hidden: 8,
        };
        let inp = g2.input(&Tensor::row(&x.values()[0..2])).unwrap();
        let h0 = g2.constant(1, 8, 0.0);
        let c0 = g2.constant(1, 8, 0.0);
        let (h1, _) = lstm_step(&mut g2, inp, h0, c0, &w).unwrap();
        assert_eq!(from_encode, g2.value(h1));
    }

    #[test]
    fn permuting_input_ticks_changes_the_final_state() {
        let model = Model::new(toy_config(2, false), 21).unwrap();
        let x = random_input(4, 2, 4);
        let mut swapped_values = x.values().to_vec();
        swapped_values.swap(0, 2);
        swapped_values.swap(1, 3);
        let swapped = Tensor::new(vec![4, 2], swapped_values).unwrap();

        let mut g1 = Graph::new();
        let (_, (h1, _)) = model.encode(&mut g1, &x).unwrap();
        let mut g2 = Graph::new();
        let (_, (h2, _)) = model.encode(&mut g2, &swapped).unwrap();
        let differs = g1
            .value(h1)
            .iter()
            .zip(g2.value(h2))
            .any(|(a, b)| (a - b).abs() > 1e-12);
        assert!(differs, "time order must matter to the encoder");
    }

    #[test]
    fn changing_one_head_only_moves_that_series() {
        let mut model = Model::new(toy_config(3, false), 8).unwrap();
        let x = random_input(4, 3, 5);
        let run = |m: &Model| {
            let mut g = Graph::new();
            let t = m
                .forward(&mut g, &x, &[1, 2, 3], 2, DecoderFeed::SelfFed)
                .unwrap();
            StepDistributions::from_graph(&g, &t.dists, 5)
        };
        let before = run(&model);
        // A single-entry bump; a uniform shift of a head's weights would
        // cancel in the softmax.
        model.params.get_mut("head.1.w").unwrap().value.values_mut()[0] += 0.25;
        let after = run(&model);

        // Series 1 changed at step 0; series 0 and 2 did not. Later
        // steps may differ through self-fed inputs, so only step 0 is
        // compared for isolation.
        assert_ne!(before.probs[0][1], after.probs[0][1]);
        assert_eq!(before.probs[0][0], after.probs[0][0]);
        assert_eq!(before.probs[0][2], after.probs[0][2]);
    }

    #[test]
    fn single_series_emits_one_distribution_per_step() {
        let model = Model::new(toy_config(1, true), 2).unwrap();
        let mut g = Graph::new();
        let x = random_input(4, 1, 6);
        let trace = model
            .forward(&mut g, &x, &[2], 3, DecoderFeed::SelfFed)
            .unwrap();
        for row in trace.dists {
            assert_eq!(row.len(), 1);
        }
    }

    #[test]
    fn horizon_overflow_is_an_error() {
        let model = Model::new(toy_config(1, false), 2).unwrap();
        let mut g = Graph::new();
        let x = random_input(4, 1, 7);
        assert!(model.forward(&mut g, &x, &[2], 4, DecoderFeed::SelfFed).is_err());
    }

    #[test]
    fn teacher_forcing_is_causal() {
        // The step-t distribution must not depend on labels fed at
        // steps > t: analytic input gradients at later decoder inputs
        // are exactly zero.
        let model = Model::new(toy_config(2, true), 31).unwrap();
        let mut g = Graph::new();
        let x = random_input(4, 2, 8);
        let labels = vec![vec![0, 1], vec![2, 3], vec![4, 0]];
        let trace = model
            .forward(&mut g, &x, &[1, 1], 3, DecoderFeed::TeacherForced(&labels))
            .unwrap();

        // Differentiate the first entry of the step-1 (0-based) dist.
        let target = trace.dists[1][0];
        let probe = g.slice_cols(target, 0, 1).unwrap();
        g.backward_scalar(probe).unwrap();
        let later_input = trace.decoder_inputs[2];
        assert!(
            g.grad(later_input).unwrap().iter().all(|v| *v == 0.0),
            "future labels leaked into step 1"
        );
        // The inputs actually consumed so far carry some gradient.
        let used = g.grad(trace.decoder_inputs[1]).unwrap();
        assert!(used.iter().any(|v| *v != 0.0));
    }
}
