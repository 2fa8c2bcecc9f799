//! The confidence-masked dynamic loss and its inference rollout.
//!
//! Each prediction step gets a confidence score; a threshold decides
//! how many steps count. Training masks the per-step divergence terms
//! (hard indicator or smooth sigmoid) and adds a rectifier penalty for
//! sub-threshold confidence so the model cannot win by emitting
//! nothing. Inference stops each series at its first violation.

mod confidence;
mod dynamic;
mod rollout;

pub use confidence::{
    confidence_node, confidence_value, continuation_test, kl_onehot, kl_onehot_node, mask_weight,
    mask_weight_node, penalty_node, penalty_value,
};
pub use dynamic::{dynamic_loss, static_full_loss, truncated_backward};
pub use rollout::{dynamic_rollout, rollout_with_feed, RolloutOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfidenceKind {
    /// Largest class probability of the current step.
    #[serde(rename = "maximum")]
    Maximum,
    /// Largest minus second-largest class probability.
    #[serde(rename = "cd")]
    ConfidenceDistance,
    /// Negated max per-class change from the previous step.
    #[serde(rename = "tv")]
    TotalVariation,
    /// Negated Wasserstein-1 distance to the previous step, unit ground
    /// distance between adjacent classes.
    #[serde(rename = "emd")]
    EarthMover,
}

impl ConfidenceKind {
    /// Volatility-style kinds are stored negated so "continue" is
    /// always `G >= threshold`.
    pub fn is_volatility(self) -> bool {
        matches!(self, ConfidenceKind::TotalVariation | ConfidenceKind::EarthMover)
    }

    pub const ALL: [ConfidenceKind; 4] = [
        ConfidenceKind::Maximum,
        ConfidenceKind::ConfidenceDistance,
        ConfidenceKind::TotalVariation,
        ConfidenceKind::EarthMover,
    ];
}

impl std::fmt::Display for ConfidenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConfidenceKind::Maximum => "maximum",
            ConfidenceKind::ConfidenceDistance => "cd",
            ConfidenceKind::TotalVariation => "tv",
            ConfidenceKind::EarthMover => "emd",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for ConfidenceKind {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximum" | "max" => Ok(ConfidenceKind::Maximum),
            "cd" => Ok(ConfidenceKind::ConfidenceDistance),
            "tv" => Ok(ConfidenceKind::TotalVariation),
            "emd" => Ok(ConfidenceKind::EarthMover),
            other => Err(CoreError::config(format!(
                "unknown confidence kind {other:?}, expected maximum|cd|tv|emd"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    Indicator,
    Sigmoid,
}

impl std::fmt::Display for MaskMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaskMode::Indicator => write!(f, "indicator"),
            MaskMode::Sigmoid => write!(f, "sigmoid"),
        }
    }
}

impl std::str::FromStr for MaskMode {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indicator" | "ind" => Ok(MaskMode::Indicator),
            "sigmoid" | "sig" => Ok(MaskMode::Sigmoid),
            other => Err(CoreError::config(format!(
                "unknown mask mode {other:?}, expected indicator|sigmoid"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicLossConfig {
    pub kind: ConfidenceKind,
    pub mask: MaskMode,
    /// Confidence threshold. For volatility kinds it applies to the raw
    /// measure before negation, so it stays positive in configs.
    pub tau: f64,
    /// Penalty weight for sub-threshold confidence.
    pub lambda: f64,
    /// Sigmoid mask steepness.
    pub sharpness: f64,
    /// Maximum prediction steps (T).
    pub horizon: usize,
}

impl DynamicLossConfig {
    /// Sharpness defaults high enough that the mask is a softened
    /// indicator; a loose mask lets the loss reward hiding inaccurate
    /// steps instead of fixing them.
    pub fn new(kind: ConfidenceKind, mask: MaskMode, tau: f64, lambda: f64, horizon: usize) -> Self {
        DynamicLossConfig {
            kind,
            mask,
            tau,
            lambda,
            sharpness: 100.0,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || !self.lambda.is_finite() || !self.sharpness.is_finite() {
            return Err(CoreError::config("tau, lambda and sharpness must be finite"));
        }
        if self.lambda < 0.0 {
            return Err(CoreError::config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.sharpness <= 0.0 {
            return Err(CoreError::config(format!(
                "sharpness must be > 0, got {}",
                self.sharpness
            )));
        }
        if self.horizon == 0 {
            return Err(CoreError::config("horizon must be positive"));
        }
        if self.kind.is_volatility() {
            if self.tau <= 0.0 {
                return Err(CoreError::config(format!(
                    "tau must be > 0 for volatility kinds, got {}",
                    self.tau
                )));
            }
        } else {
            // tau = 0 reduces to the unmasked loss and tau = 1 is the
            // never-continue extreme; both are useful in tests, so the
            // closed interval is accepted.
            if !(0.0..=1.0).contains(&self.tau) {
                return Err(CoreError::config(format!(
                    "tau must lie in [0, 1] for confidence kinds, got {}",
                    self.tau
                )));
            }
            if self.mask == MaskMode::Sigmoid && self.tau >= 1.0 {
                return Err(CoreError::config(
                    "sigmoid masking needs tau < 1 (its scale is 1 - tau)",
                ));
            }
        }
        Ok(())
    }

    /// The comparison point for `G`: tau as-is for confidence kinds,
    /// negated for volatility kinds (whose G is already negated).
    pub fn threshold(&self) -> f64 {
        if self.kind.is_volatility() {
            -self.tau
        } else {
            self.tau
        }
    }

    /// Scale of the sigmoid mask argument.
    pub fn sigmoid_scale(&self) -> f64 {
        if self.kind.is_volatility() {
            1.0
        } else {
            1.0 - self.tau
        }
    }
}

/// Per-series record of what the loss saw: confidence values, per-step
/// divergence, and the stop index.
#[derive(Debug, Clone)]
pub struct SeriesTrace {
    /// `G` per step (volatility kinds already negated).
    pub confidence: Vec<f64>,
    /// Per-step divergence loss values.
    pub kl: Vec<f64>,
    /// Steps before the first violation; `horizon` when none occurs.
    pub stop: usize,
}

#[derive(Debug, Clone)]
pub struct ConfidenceTrace {
    pub series: Vec<SeriesTrace>,
}

impl ConfidenceTrace {
    pub fn mean_stop(&self) -> f64 {
        if self.series.is_empty() {
            return 0.0;
        }
        self.series.iter().map(|s| s.stop as f64).sum::<f64>() / self.series.len() as f64
    }
}
