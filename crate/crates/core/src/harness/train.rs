//! Minibatch training of one walk-forward window with early stopping on
//! validation F1.

use rand::seq::SliceRandom;

use crate::data::LabeledWindow;
use crate::error::Result;
use crate::graph::Graph;
use crate::loss::{dynamic_loss, dynamic_rollout, DynamicLossConfig};
use crate::model::{DecoderFeed, Model};
use crate::optim::Optimizer;
use crate::params::{seeded_rng, ParameterSet};

use super::f1::PredictionPool;

#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub epochs_cap: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Validation checks per epoch (at least 1, the epoch end). The
    /// masked losses drift confidence toward the threshold once
    /// accuracy saturates, so the best-F1 state can live mid-epoch.
    pub evals_per_epoch: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    pub best_val_f1: Option<f64>,
    pub mean_train_loss: f64,
}

/// Model quality on a window set: rollout predictions pooled into macro
/// F1, plus emitted-length bookkeeping.
#[derive(Debug, Clone)]
pub struct EvalStats {
    pub f1: Option<f64>,
    /// Mean stop index over every (window, series) rollout.
    pub avg_len: f64,
    /// Fraction of (window, series) rollouts that emitted at least one
    /// prediction.
    pub coverage: f64,
    pub per_series_len: Vec<f64>,
    pub emitted: u64,
}

pub fn evaluate(
    model: &Model,
    loss_cfg: &DynamicLossConfig,
    windows: &[LabeledWindow],
) -> Result<EvalStats> {
    let series = model.config.series;
    let mut pool = PredictionPool::new(series, model.config.classes);
    let mut len_sum = 0.0;
    let mut len_per_series = vec![0.0; series];
    let mut covered = 0u64;

    for w in windows {
        let out = dynamic_rollout(model, &w.x, &w.first_label, loss_cfg)?;
        for q in 0..series {
            let len = out.lengths[q];
            len_sum += len as f64;
            len_per_series[q] += len as f64;
            if len > 0 {
                covered += 1;
            }
            for (t, &pred) in out.predictions[q].iter().enumerate() {
                pool.record(q, w.y[t][q], pred);
            }
        }
    }
    let rollouts = (windows.len() * series) as f64;
    Ok(EvalStats {
        f1: pool.f1_macro(),
        avg_len: if rollouts > 0.0 { len_sum / rollouts } else { 0.0 },
        coverage: if rollouts > 0.0 { covered as f64 / rollouts } else { 0.0 },
        per_series_len: len_per_series
            .into_iter()
            .map(|s| if windows.is_empty() { 0.0 } else { s / windows.len() as f64 })
            .collect(),
        emitted: pool.emitted(),
    })
}

/// Builds one teacher-forced loss graph and backpropagates it. The
/// returned graph still holds the parameter gradients; push them into a
/// ParameterSet with [`Graph::apply_param_grads`].
pub fn sample_gradient(
    model: &Model,
    loss_cfg: &DynamicLossConfig,
    window: &LabeledWindow,
) -> Result<(f64, Graph)> {
    let mut g = Graph::new();
    let trace = model.forward(
        &mut g,
        &window.x,
        &window.first_label,
        loss_cfg.horizon,
        DecoderFeed::TeacherForced(&window.y),
    )?;
    let (loss, _) = dynamic_loss(&mut g, &trace.dists, &window.y, &window.first_label, loss_cfg)?;
    let value = g.scalar(loss)?;
    g.backward_scalar(loss)?;
    Ok((value, g))
}

/// Epoch loop over shuffled minibatches; tracks validation F1 from the
/// inherited state onward (several checks per epoch), restores the best
/// scorer at the end, and stops once `patience` epochs pass without an
/// improvement.
pub fn train_window(
    model: &mut Model,
    optimizer: &mut Optimizer,
    loss_cfg: &DynamicLossConfig,
    train: &[LabeledWindow],
    validation: &[LabeledWindow],
    settings: &TrainSettings,
) -> Result<TrainOutcome> {
    let mut indices: Vec<usize> = (0..train.len()).collect();
    let mut best_f1: Option<f64> = None;
    let mut best_params: Option<ParameterSet> = None;
    let mut epochs_run = 0usize;
    let mut loss_sum = 0.0;
    let mut loss_count = 0u64;

    // The warm-started state competes too: a window whose training only
    // hurts keeps its inherited weights.
    let inherited = evaluate(model, loss_cfg, validation)?;

    // A candidate must keep at least half the inherited coverage to be
    // eligible. The rollout F1 of a near-empty emission set is easy to
    // inflate, and without the floor training drifts there.
    let coverage_floor = 0.5 * inherited.coverage;

    let consider = |val: &EvalStats,
                    params: &ParameterSet,
                    best_f1: &mut Option<f64>,
                    best_params: &mut Option<ParameterSet>|
     -> bool {
        if val.coverage < coverage_floor {
            return false;
        }
        let improved = match (val.f1, *best_f1) {
            (Some(v), Some(b)) => v > b,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if improved {
            *best_f1 = val.f1;
            *best_params = Some(params.clone());
        }
        improved
    };

    consider(&inherited, &model.params, &mut best_f1, &mut best_params);

    let mut since_best = 0usize;
    model.params.zero_grads();
    'outer: for epoch in 0..settings.epochs_cap {
        epochs_run = epoch + 1;
        let mut rng = seeded_rng(settings.seed, 0xe70c ^ epoch as u64);
        indices.shuffle(&mut rng);

        let batches: Vec<&[usize]> = indices.chunks(settings.batch_size.max(1)).collect();
        let evals = settings.evals_per_epoch.max(1).min(batches.len());
        let stride = batches.len().div_ceil(evals);

        let mut epoch_improved = false;
        for (b, batch) in batches.iter().enumerate() {
            let scale = 1.0 / batch.len() as f64;
            for &i in *batch {
                let (value, g) = sample_gradient(model, loss_cfg, &train[i])?;
                g.apply_param_grads(&mut model.params, scale)?;
                loss_sum += value;
                loss_count += 1;
            }
            optimizer.step(&mut model.params)?;

            if (b + 1) % stride == 0 || b + 1 == batches.len() {
                let val = evaluate(model, loss_cfg, validation)?;
                if consider(&val, &model.params, &mut best_f1, &mut best_params) {
                    epoch_improved = true;
                }
            }
        }

        if epoch_improved {
            since_best = 0;
        } else if best_f1.is_some() {
            // Patience counts only once a score exists; while nothing
            // is emitted there is no plateau to detect yet.
            since_best += 1;
            if since_best >= settings.patience {
                break 'outer;
            }
        }
    }

    if let Some(p) = best_params {
        model.params = p;
    }
    Ok(TrainOutcome {
        epochs_run,
        best_val_f1: best_f1,
        mean_train_loss: if loss_count > 0 {
            loss_sum / loss_count as f64
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{ConfidenceKind, MaskMode};
    use crate::model::{ModelConfig, ModelKind};
    use crate::optim::OptimizerKind;
    use crate::tensor::Tensor;

    fn tiny_windows(n: usize, series: usize, input_len: usize, horizon: usize) -> Vec<LabeledWindow> {
        (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..input_len * series)
                    .map(|j| ((i * 7 + j) as f64 * 0.31).sin())
                    .collect();
                let y = (0..horizon)
                    .map(|t| (0..series).map(|q| (i + t + q) % 5).collect())
                    .collect();
                LabeledWindow {
                    x: Tensor::new(vec![input_len, series], x).unwrap(),
                    y,
                    first_label: (0..series).map(|q| (i + q) % 5).collect(),
                    start_tick: i,
                }
            })
            .collect()
    }

    #[test]
    fn training_reduces_the_unmasked_loss() {
        let cfg = ModelConfig {
            kind: ModelKind::Seq2Seq,
            series: 2,
            classes: 5,
            hidden: 10,
            input_len: 5,
            horizon: 3,
            attention: false,
            layers: 1,
        };
        let mut model = Model::new(cfg, 3).unwrap();
        let loss_cfg = DynamicLossConfig::new(
            ConfidenceKind::Maximum,
            MaskMode::Indicator,
            0.0,
            0.0,
            3,
        );
        let windows = tiny_windows(24, 2, 5, 3);
        let before: f64 = windows
            .iter()
            .map(|w| sample_gradient(&model, &loss_cfg, w).unwrap().0)
            .sum();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01);
        let settings = TrainSettings {
            batch_size: 8,
            epochs_cap: 12,
            patience: 12,
            evals_per_epoch: 1,
            seed: 5,
        };
        train_window(&mut model, &mut opt, &loss_cfg, &windows, &windows[..4], &settings).unwrap();
        let after: f64 = windows
            .iter()
            .map(|w| sample_gradient(&model, &loss_cfg, w).unwrap().0)
            .sum();
        assert!(
            after < before,
            "loss should drop on the training set: {before} -> {after}"
        );
    }

    #[test]
    fn early_stopping_halts_within_patience() {
        let cfg = ModelConfig {
            kind: ModelKind::Seq2Seq,
            series: 1,
            classes: 5,
            hidden: 6,
            input_len: 4,
            horizon: 2,
            attention: false,
            layers: 1,
        };
        let mut model = Model::new(cfg, 1).unwrap();
        let loss_cfg = DynamicLossConfig::new(
            ConfidenceKind::Maximum,
            MaskMode::Indicator,
            0.0,
            0.0,
            2,
        );
        // Constant labels: validation F1 saturates immediately, so the
        // run must stop well before the cap.
        let mut windows = tiny_windows(12, 1, 4, 2);
        for w in &mut windows {
            w.y = vec![vec![2], vec![2]];
            w.first_label = vec![2];
        }
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05);
        let settings = TrainSettings {
            batch_size: 4,
            epochs_cap: 50,
            patience: 2,
            evals_per_epoch: 1,
            seed: 9,
        };
        let out =
            train_window(&mut model, &mut opt, &loss_cfg, &windows, &windows[..3], &settings)
                .unwrap();
        assert!(out.epochs_run <= 10, "ran {} epochs", out.epochs_run);
    }
}
