//! The three architectures: a feed-forward baseline, a stacked-LSTM
//! baseline, and the encoder/decoder network with additive attention
//! and one softmax head per series.

mod attention;
mod ffn;
mod lstm;
mod seq2seq;

pub use attention::{attend, attend_with_keys, AttentionWeights};
pub use lstm::{lstm_step, LstmWeights};
pub use seq2seq::decode_step;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{init_uniform, seeded_rng, ParameterSet};
use crate::tensor::{one_hot, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ffn,
    Lstm,
    Seq2Seq,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Ffn => write!(f, "ffn"),
            ModelKind::Lstm => write!(f, "lstm"),
            ModelKind::Seq2Seq => write!(f, "seq2seq"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Number of series predicted jointly (Q).
    pub series: usize,
    pub classes: usize,
    pub hidden: usize,
    /// Encoder input length in ticks.
    pub input_len: usize,
    /// Maximum prediction steps per window.
    pub horizon: usize,
    pub attention: bool,
    /// Hidden layer count for ffn/lstm; encoder depth (= decoder depth)
    /// for seq2seq.
    pub layers: usize,
}

impl ModelConfig {
    pub fn ffn(series: usize) -> Self {
        ModelConfig {
            kind: ModelKind::Ffn,
            series,
            classes: 5,
            hidden: 64,
            input_len: 10,
            horizon: 1,
            attention: false,
            layers: 2,
        }
    }

    pub fn lstm(series: usize) -> Self {
        ModelConfig {
            kind: ModelKind::Lstm,
            series,
            classes: 5,
            hidden: 64,
            input_len: 20,
            horizon: 1,
            attention: false,
            layers: 2,
        }
    }

    pub fn seq2seq(series: usize) -> Self {
        ModelConfig {
            kind: ModelKind::Seq2Seq,
            series,
            classes: 5,
            hidden: 64,
            input_len: 20,
            horizon: 10,
            attention: true,
            layers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.series == 0 {
            return Err(CoreError::config("series count must be positive"));
        }
        if self.classes < 2 {
            return Err(CoreError::config("need at least two classes"));
        }
        if self.hidden == 0 || self.input_len == 0 || self.horizon == 0 || self.layers == 0 {
            return Err(CoreError::config(
                "hidden, input_len, horizon and layers must all be positive",
            ));
        }
        match self.kind {
            ModelKind::Ffn | ModelKind::Lstm => {
                if self.horizon != 1 {
                    return Err(CoreError::config(format!(
                        "{} predicts a single step, horizon must be 1",
                        self.kind
                    )));
                }
                if self.attention {
                    return Err(CoreError::config(format!("{} has no attention", self.kind)));
                }
            }
            ModelKind::Seq2Seq => {
                if self.layers != 1 {
                    return Err(CoreError::config(
                        "seq2seq uses one encoder and one decoder layer",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Width of the concatenated one-hot decoder input.
    pub fn decoder_label_width(&self) -> usize {
        self.series * self.classes
    }
}

/// Validated decoder input: one one-hot block of `classes` entries per
/// series, concatenated.
#[derive(Debug, Clone)]
pub struct DecoderInput(Tensor);

impl DecoderInput {
    pub fn from_labels(labels: &[usize], classes: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(labels.len() * classes);
        for &l in labels {
            values.extend_from_slice(one_hot(l, classes)?.values());
        }
        Ok(DecoderInput(Tensor::row(&values)))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

/// Value snapshot of each step's per-series class distribution.
#[derive(Debug, Clone)]
pub struct StepDistributions {
    pub classes: usize,
    /// `probs[t][q]` is the class distribution for series `q` at step `t`.
    pub probs: Vec<Vec<Vec<f64>>>,
}

impl StepDistributions {
    pub fn from_graph(g: &Graph, dists: &[Vec<NodeId>], classes: usize) -> Self {
        let probs = dists
            .iter()
            .map(|row| row.iter().map(|&d| g.value(d).to_vec()).collect())
            .collect();
        StepDistributions { classes, probs }
    }

    pub fn validate(&self) -> Result<()> {
        for (t, row) in self.probs.iter().enumerate() {
            for (q, p) in row.iter().enumerate() {
                if p.len() != self.classes {
                    return Err(CoreError::shape(
                        "distributions",
                        format!("step {t} series {q}: {} entries", p.len()),
                    ));
                }
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > 1e-12 || p.iter().any(|v| *v <= 0.0 || *v >= 1.0 + 1e-12) {
                    return Err(CoreError::data(format!(
                        "step {t} series {q}: not a valid distribution (sum {sum})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How the decoder receives its non-first inputs.
#[derive(Debug, Clone, Copy)]
pub enum DecoderFeed<'a> {
    /// Ground-truth labels `labels[t][q]`; the input at step t+1 is the
    /// label for step t.
    TeacherForced(&'a [Vec<usize>]),
    /// Argmax of the model's own previous distribution, per series.
    SelfFed,
}

/// Everything a forward pass exposes: distribution nodes plus the
/// decoder-input leaves (for causality checks).
pub struct ForwardTrace {
    /// `dists[t][q]`: distribution node, shape `[1, classes]`.
    pub dists: Vec<Vec<NodeId>>,
    /// Leaf node carrying the label one-hots fed at each decoder step.
    pub decoder_inputs: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParameterSet,
}

impl Model {
    /// Fresh model with uniform [-0.08, 0.08] weights.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(seed, 0x6d6f64656c);
        let mut params = ParameterSet::new();
        let h = config.hidden;
        let q = config.series;
        let c = config.classes;

        match config.kind {
            ModelKind::Ffn => {
                let mut width = config.input_len * q;
                for l in 0..config.layers {
                    params.insert(format!("ffn.{l}.w"), init_uniform(vec![width, h], &mut rng))?;
                    params.insert(format!("ffn.{l}.b"), init_uniform(vec![1, h], &mut rng))?;
                    width = h;
                }
            }
            ModelKind::Lstm => {
                let mut width = q;
                for l in 0..config.layers {
                    params.insert(
                        format!("lstm.{l}.w"),
                        init_uniform(vec![width + h, 4 * h], &mut rng),
                    )?;
                    params.insert(format!("lstm.{l}.b"), init_uniform(vec![1, 4 * h], &mut rng))?;
                    width = h;
                }
            }
            ModelKind::Seq2Seq => {
                params.insert("enc.w", init_uniform(vec![q + h, 4 * h], &mut rng))?;
                params.insert("enc.b", init_uniform(vec![1, 4 * h], &mut rng))?;
                let mut dec_in = config.decoder_label_width();
                if config.attention {
                    dec_in += h;
                }
                params.insert("dec.w", init_uniform(vec![dec_in + h, 4 * h], &mut rng))?;
                params.insert("dec.b", init_uniform(vec![1, 4 * h], &mut rng))?;
                if config.attention {
                    params.insert("attn.query.w", init_uniform(vec![h, h], &mut rng))?;
                    params.insert("attn.keys.w", init_uniform(vec![h, h], &mut rng))?;
                    params.insert("attn.score.v", init_uniform(vec![h, 1], &mut rng))?;
                }
            }
        }
        for qi in 0..q {
            params.insert(format!("head.{qi}.w"), init_uniform(vec![h, c], &mut rng))?;
            params.insert(format!("head.{qi}.b"), init_uniform(vec![1, c], &mut rng))?;
        }
        Ok(Model { config, params })
    }

    /// Runs the model for `steps` prediction steps on encoder input `x`
    /// (`[input_len, series]` of normalized returns). `first_label` is
    /// the observable label of the last encoder tick, used as the first
    /// decoder input.
    pub fn forward(
        &self,
        g: &mut Graph,
        x: &Tensor,
        first_label: &[usize],
        steps: usize,
        feed: DecoderFeed,
    ) -> Result<ForwardTrace> {
        let (rows, cols) = x.dims2()?;
        if rows != self.config.input_len || cols != self.config.series {
            return Err(CoreError::shape(
                "forward",
                format!(
                    "input is [{rows}, {cols}], model wants [{}, {}]",
                    self.config.input_len, self.config.series
                ),
            ));
        }
        if steps == 0 || steps > self.config.horizon {
            return Err(CoreError::usage(format!(
                "requested {steps} steps, configured horizon is {}",
                self.config.horizon
            )));
        }
        if let DecoderFeed::TeacherForced(labels) = feed {
            if labels.len() < steps {
                return Err(CoreError::usage(format!(
                    "teacher forcing needs {steps} label steps, got {}",
                    labels.len()
                )));
            }
        }
        let trace = match self.config.kind {
            ModelKind::Ffn => ffn::forward(self, g, x)?,
            ModelKind::Lstm => lstm::baseline_forward(self, g, x)?,
            ModelKind::Seq2Seq => seq2seq::forward(self, g, x, first_label, steps, feed)?,
        };
        for row in &trace.dists {
            for &d in row {
                g.ensure_finite(d, "forward distributions")?;
            }
        }
        Ok(trace)
    }

    /// Encoder pass only; seq2seq models.
    pub fn encode(&self, g: &mut Graph, x: &Tensor) -> Result<(Vec<NodeId>, (NodeId, NodeId))> {
        if self.config.kind != ModelKind::Seq2Seq {
            return Err(CoreError::usage("encode is only defined for seq2seq models"));
        }
        seq2seq::encode(self, g, x)
    }

    /// Applies the per-series affine heads plus softmax to a hidden state.
    pub(crate) fn apply_heads(&self, g: &mut Graph, h: NodeId) -> Result<Vec<NodeId>> {
        let mut dists = Vec::with_capacity(self.config.series);
        for qi in 0..self.config.series {
            let w = g.param(&self.params, &format!("head.{qi}.w"))?;
            let b = g.param(&self.params, &format!("head.{qi}.b"))?;
            let logits = g.matmul(h, w)?;
            let logits = g.add(logits, b)?;
            dists.push(g.softmax(logits));
        }
        Ok(dists)
    }
}

/// Picks the most probable class per series from a distribution row.
pub fn argmax_labels(g: &Graph, dists: &[NodeId]) -> Vec<usize> {
    dists
        .iter()
        .map(|&d| {
            let v = g.value(d);
            let mut best = 0;
            for i in 1..v.len() {
                if v[i] > v[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
