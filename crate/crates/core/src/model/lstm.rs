//! The LSTM cell and the stacked-LSTM single-prediction baseline.

use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;

use super::{ForwardTrace, Model};

/// Weight handles for one LSTM layer: `w` is `[(in + hidden), 4*hidden]`
/// with column blocks ordered input/forget/candidate/output, `b` is
/// `[1, 4*hidden]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights {
    pub w: NodeId,
    pub b: NodeId,
    pub hidden: usize,
}

/// One cell update:
/// i,f,o = sigmoid(affine), g = tanh(affine),
/// c' = f*c + i*g, h' = o*tanh(c').
pub fn lstm_step(
    g: &mut Graph,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    w: &LstmWeights,
) -> Result<(NodeId, NodeId)> {
    let hid = w.hidden;
    let xin = g.concat(&[x, h])?;
    let z = g.matmul(xin, w.w)?;
    let z = g.add(z, w.b)?;
    let zi = g.slice_cols(z, 0, hid)?;
    let zf = g.slice_cols(z, hid, 2 * hid)?;
    let zg = g.slice_cols(z, 2 * hid, 3 * hid)?;
    let zo = g.slice_cols(z, 3 * hid, 4 * hid)?;
    let gate_i = g.sigmoid(zi);
    let gate_f = g.sigmoid(zf);
    let gate_g = g.tanh(zg);
    let gate_o = g.sigmoid(zo);
    let fc = g.mul(gate_f, c)?;
    let ig = g.mul(gate_i, gate_g)?;
    let c_next = g.add(fc, ig)?;
    let tc = g.tanh(c_next);
    let h_next = g.mul(gate_o, tc)?;
    Ok((h_next, c_next))
}

/// Stacked LSTM over the whole input, heads applied to the last hidden
/// state of the top layer. Always a single prediction step.
pub(super) fn baseline_forward(model: &Model, g: &mut Graph, x: &Tensor) -> Result<ForwardTrace> {
    let cfg = &model.config;
    let hid = cfg.hidden;
    let mut layer_weights = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        layer_weights.push(LstmWeights {
            w: g.param(&model.params, &format!("lstm.{l}.w"))?,
            b: g.param(&model.params, &format!("lstm.{l}.b"))?,
            hidden: hid,
        });
    }
    let mut states: Vec<(NodeId, NodeId)> = (0..cfg.layers)
        .map(|_| (g.constant(1, hid, 0.0), g.constant(1, hid, 0.0)))
        .collect();

    let cols = cfg.series;
    let mut top_h = states[0].0;
    for t in 0..cfg.input_len {
        let row = &x.values()[t * cols..(t + 1) * cols];
        let mut inp = g.input(&Tensor::row(row))?;
        for (l, w) in layer_weights.iter().enumerate() {
            let (h, c) = states[l];
            let (h2, c2) = lstm_step(g, inp, h, c, w)?;
            states[l] = (h2, c2);
            inp = h2;
        }
        top_h = inp;
    }
    let dists = model.apply_heads(g, top_h)?;
    Ok(ForwardTrace {
        dists: vec![dists],
        decoder_inputs: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecoderFeed, ModelConfig};
    use crate::params::ParameterSet;

    fn zero_weights(g: &mut Graph, input: usize, hidden: usize) -> LstmWeights {
        LstmWeights {
            w: g.constant(input + hidden, 4 * hidden, 0.0),
            b: g.constant(1, 4 * hidden, 0.0),
            hidden,
        }
    }

    #[test]
    fn zero_weights_zero_cell_gives_zero_state() {
        let mut g = Graph::new();
        let w = zero_weights(&mut g, 3, 4);
        let x = g.input(&Tensor::row(&[1.0, -2.0, 0.5])).unwrap();
        let h = g.constant(1, 4, 0.0);
        let c = g.constant(1, 4, 0.0);
        let (h2, c2) = lstm_step(&mut g, x, h, c, &w).unwrap();
        assert!(g.value(c2).iter().all(|v| *v == 0.0));
        assert!(g.value(h2).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_weights_nonzero_cell_halves_it() {
        // Gates sit at 0.5 and the candidate at 0, so c' = c/2 and
        // h' = tanh(c/2)/2.
        let mut g = Graph::new();
        let w = zero_weights(&mut g, 2, 3);
        let x = g.input(&Tensor::row(&[7.0, -7.0])).unwrap();
        let h = g.constant(1, 3, 0.0);
        let c0 = [0.4, -1.0, 2.0];
        let c = g.input(&Tensor::row(&c0)).unwrap();
        let (h2, c2) = lstm_step(&mut g, x, h, c, &w).unwrap();
        for (i, v) in g.value(c2).iter().enumerate() {
            assert!((v - 0.5 * c0[i]).abs() < 1e-15);
        }
        for (i, v) in g.value(h2).iter().enumerate() {
            assert!((v - 0.5 * (0.5 * c0[i]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn step_is_deterministic() {
        let make = || {
            let mut g = Graph::new();
            let mut params = ParameterSet::new();
            let mut rng = crate::params::seeded_rng(5, 1);
            params
                .insert("w", crate::params::init_uniform(vec![6, 12], &mut rng))
                .unwrap();
            params
                .insert("b", crate::params::init_uniform(vec![1, 12], &mut rng))
                .unwrap();
            let w = LstmWeights {
                w: g.param(&params, "w").unwrap(),
                b: g.param(&params, "b").unwrap(),
                hidden: 3,
            };
            let x = g.input(&Tensor::row(&[0.3, -0.1, 0.9])).unwrap();
            let h = g.constant(1, 3, 0.1);
            let c = g.constant(1, 3, -0.2);
            let (h2, _) = lstm_step(&mut g, x, h, c, &w).unwrap();
            g.value(h2).to_vec()
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn baseline_emits_single_step() {
        let model = Model::new(ModelConfig::lstm(3), 9).unwrap();
        let mut g = Graph::new();
        let x = Tensor::zeros(vec![20, 3]);
        let trace = model
            .forward(&mut g, &x, &[2, 2, 2], 1, DecoderFeed::SelfFed)
            .unwrap();
        assert_eq!(trace.dists.len(), 1);
        assert_eq!(trace.dists[0].len(), 3);
    }
}
