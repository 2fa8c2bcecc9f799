//! The run configuration file: one TOML document covering data
//! generation, model, loss, walk-forward protocol and sweep grids.
//! Every field has a default; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dynlen_core::data::{RegimeSegment, SyntheticConfig};
use dynlen_core::harness::WalkForwardConfig;
use dynlen_core::loss::{ConfidenceKind, DynamicLossConfig, MaskMode};
use dynlen_core::model::{ModelConfig, ModelKind};
use dynlen_core::CoreError;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// Prices CSV consumed by train/sweep; written by generate.
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: RawSynthetic,
    #[serde(default)]
    pub labeling: RawLabeling,
    #[serde(default)]
    pub model: RawModel,
    #[serde(default)]
    pub loss: RawLoss,
    #[serde(default)]
    pub walk_forward: RawWalkForward,
    #[serde(default)]
    pub sweep: RawSweep,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSynthetic {
    pub series: Option<usize>,
    pub ticks_per_day: Option<usize>,
    pub days: Option<usize>,
    pub base_vols: Option<Vec<f64>>,
    pub regimes: Option<Vec<Vec<RegimeSegment>>>,
    pub factor_loading: Option<f64>,
    pub tail_df: Option<f64>,
    pub momentum: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLabeling {
    /// Fixed band width; omitting it calibrates instead.
    pub beta: Option<f64>,
    /// Middle-class target for calibration (default 0.5).
    pub calibrate_target: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub kind: Option<ModelKind>,
    pub series: Option<usize>,
    pub hidden: Option<usize>,
    pub input_len: Option<usize>,
    pub horizon: Option<usize>,
    pub attention: Option<bool>,
    pub layers: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLoss {
    pub confidence: Option<ConfidenceKind>,
    pub mask: Option<MaskMode>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub sharpness: Option<f64>,
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWalkForward {
    pub train_ticks: Option<usize>,
    pub test_ticks: Option<usize>,
    pub windows: Option<usize>,
    pub warm_start_windows: Option<usize>,
    pub epochs_cap: Option<usize>,
    pub patience: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub validation_fraction: Option<f64>,
    pub pretrain_epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub taus: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub workers: Option<usize>,
    pub curve_lengths: Option<Vec<usize>>,
    /// Lambda whose tau-row feeds sensitivity.csv.
    pub sensitivity_lambda: Option<f64>,
}

/// Labeling choice after resolution.
#[derive(Debug, Clone, Serialize)]
pub struct LabelingResolved {
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibrate_target: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResolved {
    pub taus: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub workers: usize,
    pub curve_lengths: Vec<usize>,
    pub sensitivity_lambda: f64,
}

/// Fully-defaulted configuration; what commands run from and what gets
/// echoed next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: PathBuf,
    pub synthetic: SyntheticConfig,
    pub labeling: LabelingResolved,
    pub model: ModelConfig,
    pub loss: DynamicLossConfig,
    pub walk_forward: WalkForwardConfig,
    pub sweep: SweepResolved,
}

pub fn load(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))
}

pub fn resolve(raw: &RawConfig) -> Result<Effective> {
    let seed = raw.seed.unwrap_or(17);
    let mut output_dir = raw.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    if let Ok(root) = std::env::var("DYNLEN_OUT_ROOT") {
        output_dir = PathBuf::from(root).join(&output_dir);
    }
    let dataset = raw
        .dataset
        .clone()
        .unwrap_or_else(|| output_dir.join("dataset.csv"));

    let s = &raw.synthetic;
    let synthetic = SyntheticConfig {
        series: s.series.unwrap_or(4),
        ticks_per_day: s.ticks_per_day.unwrap_or(78),
        days: s.days.unwrap_or(60),
        base_vols: s.base_vols.clone().unwrap_or_else(|| vec![0.001]),
        regimes: s.regimes.clone().unwrap_or_default(),
        factor_loading: s.factor_loading.unwrap_or(0.4),
        tail_df: s.tail_df.unwrap_or(4.0),
        momentum: s.momentum.unwrap_or(0.0),
        seed: s.seed.unwrap_or(seed),
    };
    synthetic.validate()?;

    let labeling = match (raw.labeling.beta, raw.labeling.calibrate_target) {
        (Some(_), Some(_)) => {
            return Err(CoreError::Config(
                "labeling.beta and labeling.calibrate_target are mutually exclusive".into(),
            ))
        }
        (Some(beta), None) => LabelingResolved {
            mode: "fixed".into(),
            beta: Some(beta),
            calibrate_target: None,
        },
        (None, target) => LabelingResolved {
            mode: "calibrate".into(),
            beta: None,
            calibrate_target: Some(target.unwrap_or(0.5)),
        },
    };

    let kind = raw.model.kind.unwrap_or(ModelKind::Seq2Seq);
    let mut model = match kind {
        ModelKind::Ffn => ModelConfig::ffn(synthetic.series),
        ModelKind::Lstm => ModelConfig::lstm(synthetic.series),
        ModelKind::Seq2Seq => ModelConfig::seq2seq(synthetic.series),
    };
    if let Some(v) = raw.model.series {
        model.series = v;
    }
    if let Some(v) = raw.model.hidden {
        model.hidden = v;
    }
    if let Some(v) = raw.model.input_len {
        model.input_len = v;
    }
    if let Some(v) = raw.model.horizon {
        model.horizon = v;
    }
    if let Some(v) = raw.model.attention {
        model.attention = v;
    }
    if let Some(v) = raw.model.layers {
        model.layers = v;
    }
    model.validate()?;

    let loss = DynamicLossConfig {
        kind: raw.loss.confidence.unwrap_or(ConfidenceKind::ConfidenceDistance),
        mask: raw.loss.mask.unwrap_or(MaskMode::Sigmoid),
        tau: raw.loss.tau.unwrap_or(0.3),
        lambda: raw.loss.lambda.unwrap_or(0.1),
        sharpness: raw.loss.sharpness.unwrap_or(100.0),
        horizon: raw.loss.horizon.unwrap_or(model.horizon),
    };
    loss.validate()?;

    let w = &raw.walk_forward;
    let defaults = WalkForwardConfig::default();
    let walk_forward = WalkForwardConfig {
        train_ticks: w.train_ticks.unwrap_or(defaults.train_ticks),
        test_ticks: w.test_ticks.unwrap_or(defaults.test_ticks),
        windows: w.windows.unwrap_or(defaults.windows),
        warm_start_windows: w.warm_start_windows.unwrap_or(defaults.warm_start_windows),
        epochs_cap: w.epochs_cap.unwrap_or(defaults.epochs_cap),
        patience: w.patience.unwrap_or(defaults.patience),
        batch_size: w.batch_size.unwrap_or(defaults.batch_size),
        learning_rate: w.learning_rate.unwrap_or(defaults.learning_rate),
        validation_fraction: w.validation_fraction.unwrap_or(defaults.validation_fraction),
        pretrain_epochs: w.pretrain_epochs.unwrap_or(defaults.pretrain_epochs),
    };
    walk_forward.validate()?;

    let sw = &raw.sweep;
    let sweep = SweepResolved {
        taus: sw.taus.clone().unwrap_or_else(|| vec![0.1, 0.2, 0.3, 0.4, 0.5]),
        lambdas: sw.lambdas.clone().unwrap_or_else(|| vec![0.1, 0.5]),
        workers: sw.workers.unwrap_or(2).max(1),
        curve_lengths: sw.curve_lengths.clone().unwrap_or_else(|| vec![1, 4, 7, 10]),
        sensitivity_lambda: sw.sensitivity_lambda.unwrap_or(0.1),
    };

    Ok(Effective {
        seed,
        output_dir,
        dataset,
        synthetic,
        labeling,
        model,
        loss,
        walk_forward,
        sweep,
    })
}

impl Effective {
    /// TOML snapshot written next to every command's outputs.
    pub fn echo(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| CoreError::Config(format!("config echo: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_with_defaults() {
        let raw: RawConfig = toml::from_str("").unwrap();
        let eff = resolve(&raw).unwrap();
        assert_eq!(eff.seed, 17);
        assert_eq!(eff.model.kind, ModelKind::Seq2Seq);
        assert_eq!(eff.loss.tau, 0.3);
        assert_eq!(eff.labeling.mode, "calibrate");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<RawConfig>("definitely_not_a_key = 1").unwrap_err();
        assert!(err.to_string().contains("definitely_not_a_key"));
        assert!(toml::from_str::<RawConfig>("[loss]\nconfidnce = \"cd\"").is_err());
    }

    #[test]
    fn beta_and_target_conflict() {
        let raw: RawConfig =
            toml::from_str("[labeling]\nbeta = 0.14\ncalibrate_target = 0.5").unwrap();
        assert!(resolve(&raw).is_err());
    }

    #[test]
    fn echo_round_trips_loss_fields() {
        let raw: RawConfig = toml::from_str("[loss]\ntau = 0.4\nconfidence = \"emd\"").unwrap();
        let eff = resolve(&raw).unwrap();
        let echoed = eff.echo().unwrap();
        assert!(echoed.contains("tau = 0.4"));
        assert!(echoed.contains("emd"));
    }
}
