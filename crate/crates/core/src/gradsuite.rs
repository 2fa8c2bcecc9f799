//! Finite-difference verification across every model/loss pairing the
//! trainer can produce, at toy sizes.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::gradcheck::{finite_diff_check, GradCheckReport};
use crate::graph::Graph;
use crate::loss::{dynamic_loss, ConfidenceKind, DynamicLossConfig, MaskMode};
use crate::model::{DecoderFeed, Model, ModelConfig};
use crate::params::{mix64, seeded_rng};
use crate::tensor::Tensor;

/// Margin around the mask threshold inside which a configuration is
/// re-seeded: finite differences disagree with subgradients across the
/// indicator boundary, so checked points must sit away from it.
pub const BOUNDARY_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub name: String,
    pub report: GradCheckReport,
    pub seed: u64,
    pub tolerance: f64,
}

impl SuiteCase {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error <= self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchVariant {
    Ffn,
    Lstm,
    Seq2Seq { attention: bool },
}

impl ArchVariant {
    pub const ALL: [ArchVariant; 4] = [
        ArchVariant::Ffn,
        ArchVariant::Lstm,
        ArchVariant::Seq2Seq { attention: false },
        ArchVariant::Seq2Seq { attention: true },
    ];

    fn label(self) -> &'static str {
        match self {
            ArchVariant::Ffn => "ffn",
            ArchVariant::Lstm => "lstm",
            ArchVariant::Seq2Seq { attention: false } => "seq2seq",
            ArchVariant::Seq2Seq { attention: true } => "seq2seq+attn",
        }
    }

    fn toy_config(self, series: usize, width: usize, input_len: usize, horizon: usize) -> ModelConfig {
        match self {
            ArchVariant::Ffn => ModelConfig {
                hidden: width,
                input_len,
                ..ModelConfig::ffn(series)
            },
            ArchVariant::Lstm => ModelConfig {
                hidden: width,
                input_len,
                ..ModelConfig::lstm(series)
            },
            ArchVariant::Seq2Seq { attention } => ModelConfig {
                hidden: width,
                input_len,
                horizon,
                attention,
                ..ModelConfig::seq2seq(series)
            },
        }
    }
}

fn random_sample(
    cfg: &ModelConfig,
    horizon: usize,
    seed: u64,
) -> (Tensor, Vec<usize>, Vec<Vec<usize>>) {
    let mut rng = seeded_rng(seed, 0x5a3);
    let x: Vec<f64> = (0..cfg.input_len * cfg.series)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let x = Tensor::new(vec![cfg.input_len, cfg.series], x).expect("shape consistent");
    let first: Vec<usize> = (0..cfg.series).map(|_| rng.random_range(0..cfg.classes)).collect();
    let labels: Vec<Vec<usize>> = (0..horizon)
        .map(|_| (0..cfg.series).map(|_| rng.random_range(0..cfg.classes)).collect())
        .collect();
    (x, first, labels)
}

/// Distance of every per-step confidence to the mask threshold; boundary
/// proximity makes a seed unusable.
fn min_boundary_distance(
    model: &Model,
    loss_cfg: &DynamicLossConfig,
    x: &Tensor,
    first: &[usize],
    labels: &[Vec<usize>],
) -> Result<f64> {
    let mut g = Graph::new();
    let trace = model.forward(&mut g, x, first, loss_cfg.horizon, DecoderFeed::TeacherForced(labels))?;
    let (_, lt) = dynamic_loss(&mut g, &trace.dists, labels, first, loss_cfg)?;
    let threshold = loss_cfg.threshold();
    Ok(lt
        .series
        .iter()
        .flat_map(|s| s.confidence.iter())
        .map(|gv| (gv - threshold).abs())
        .fold(f64::INFINITY, f64::min))
}

/// Checks one architecture/mask/confidence combination, stepping the
/// seed deterministically until the sample sits clear of the mask
/// boundary.
pub fn check_configuration(
    variant: ArchVariant,
    mask: MaskMode,
    kind: ConfidenceKind,
    base_seed: u64,
    eps: f64,
    tolerance: f64,
) -> Result<SuiteCase> {
    let (series, width, input_len, horizon) = (2, 8, 6, 3);
    let model_cfg = variant.toy_config(series, width, input_len, horizon);
    let loss_horizon = model_cfg.horizon.min(horizon);
    let tau = match kind {
        ConfidenceKind::Maximum => 0.25,
        ConfidenceKind::ConfidenceDistance => 0.02,
        ConfidenceKind::TotalVariation | ConfidenceKind::EarthMover => 0.05,
    };
    let mut loss_cfg = DynamicLossConfig::new(kind, mask, tau, 0.1, loss_horizon);
    loss_cfg.sharpness = 5.0;

    let name = format!("{}/{}/{}", variant.label(), mask, kind);
    for attempt in 0..64u64 {
        let seed = mix64(base_seed ^ mix64(attempt));
        let model = Model::new(model_cfg.clone(), seed)?;
        let (x, first, labels) = random_sample(&model_cfg, loss_horizon, seed);
        if min_boundary_distance(&model, &loss_cfg, &x, &first, &labels)? <= BOUNDARY_MARGIN {
            continue;
        }
        let report = finite_diff_check(
            &model.params,
            |p| {
                let probe = Model {
                    config: model_cfg.clone(),
                    params: p.clone(),
                };
                let mut g = Graph::new();
                let trace = probe.forward(
                    &mut g,
                    &x,
                    &first,
                    loss_cfg.horizon,
                    DecoderFeed::TeacherForced(&labels),
                )?;
                let (loss, _) = dynamic_loss(&mut g, &trace.dists, &labels, &first, &loss_cfg)?;
                Ok((g, loss))
            },
            eps,
        )?;
        return Ok(SuiteCase {
            name,
            report,
            seed,
            tolerance,
        });
    }
    Err(CoreError::data(format!(
        "{name}: no seed found clear of the mask boundary"
    )))
}

/// The full matrix: every architecture, both masks, all four confidence
/// kinds. `filter` restricts by substring match on the case name.
pub fn run_suite(filter: Option<&str>, eps: f64, tolerance: f64) -> Result<Vec<SuiteCase>> {
    let mut cases = Vec::new();
    for variant in ArchVariant::ALL {
        for mask in [MaskMode::Indicator, MaskMode::Sigmoid] {
            for kind in ConfidenceKind::ALL {
                let name = format!("{}/{}/{}", variant.label(), mask, kind);
                if let Some(f) = filter {
                    if !name.contains(f) {
                        continue;
                    }
                }
                let base = mix64(0xd19a ^ crate::checkpoint::bytes_hash(name.as_bytes()));
                cases.push(check_configuration(variant, mask, kind, base, eps, tolerance)?);
            }
        }
    }
    if cases.is_empty() {
        return Err(CoreError::usage(format!(
            "gradient suite filter {:?} matched no configurations",
            filter.unwrap_or_default()
        )));
    }
    Ok(cases)
}
