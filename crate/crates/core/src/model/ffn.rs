//! Feed-forward baseline: flattened returns through tanh layers, one
//! softmax head per series, single prediction step.

use crate::error::Result;
use crate::graph::Graph;
use crate::tensor::Tensor;

use super::{ForwardTrace, Model};

pub(super) fn forward(model: &Model, g: &mut Graph, x: &Tensor) -> Result<ForwardTrace> {
    let cfg = &model.config;
    let flat = Tensor::row(x.values());
    let mut h = g.input(&flat)?;
    for l in 0..cfg.layers {
        let w = g.param(&model.params, &format!("ffn.{l}.w"))?;
        let b = g.param(&model.params, &format!("ffn.{l}.b"))?;
        let z = g.matmul(h, w)?;
        let z = g.add(z, b)?;
        h = g.tanh(z);
    }
    let dists = model.apply_heads(g, h)?;
    Ok(ForwardTrace {
        dists: vec![dists],
        decoder_inputs: Vec::new(),
    })
}
