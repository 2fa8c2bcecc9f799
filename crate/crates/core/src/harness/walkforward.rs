//! Rolling train/test evaluation with warm-started windows.

use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::data::{make_windows, normalize, Dataset, LabeledWindow};
use crate::error::{CoreError, Result};
use crate::loss::DynamicLossConfig;
use crate::model::{Model, ModelConfig, ModelKind};
use crate::optim::{Optimizer, OptimizerKind};
use crate::params::mix64;

use super::train::{evaluate, train_window, EvalStats, TrainSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkForwardConfig {
    /// Training span in ticks.
    pub train_ticks: usize,
    /// Test span in ticks; also the step both spans advance by.
    pub test_ticks: usize,
    /// Total walk-forward windows.
    pub windows: usize,
    /// Leading windows excluded from reported means.
    pub warm_start_windows: usize,
    pub epochs_cap: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Trailing fraction of each training span held out for early
    /// stopping.
    pub validation_fraction: f64,
    /// Unmasked-loss epochs before the first window's dynamic phase. A
    /// cold-started masked model keeps its own confidence pinned under
    /// the threshold and never trains its accuracy; fitting the plain
    /// objective first puts it in the emitting regime, and early
    /// stopping holds it there.
    pub pretrain_epochs: usize,
}

impl Default for WalkForwardConfig {
    fn default() -> Self {
        WalkForwardConfig {
            train_ticks: 2000,
            test_ticks: 390,
            windows: 8,
            warm_start_windows: 3,
            epochs_cap: 12,
            patience: 3,
            batch_size: 32,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
            pretrain_epochs: 3,
        }
    }
}

impl WalkForwardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_ticks == 0 || self.test_ticks == 0 || self.windows == 0 {
            return Err(CoreError::config("spans and window count must be positive"));
        }
        if self.warm_start_windows >= self.windows {
            return Err(CoreError::config(format!(
                "warm start ({}) must leave measured windows (of {})",
                self.warm_start_windows, self.windows
            )));
        }
        if self.epochs_cap == 0 || self.batch_size == 0 {
            return Err(CoreError::config("epochs_cap and batch_size must be positive"));
        }
        if self.learning_rate <= 0.0 {
            return Err(CoreError::config("learning rate must be positive"));
        }
        if !(0.0..0.9).contains(&self.validation_fraction) {
            return Err(CoreError::config("validation_fraction must lie in [0, 0.9)"));
        }
        Ok(())
    }

    /// Ticks the dataset must provide for all windows.
    pub fn required_ticks(&self) -> usize {
        self.train_ticks + self.windows * self.test_ticks
    }
}

#[derive(Debug, Clone)]
pub struct WindowReport {
    pub window: usize,
    pub eval: EvalStats,
    pub epochs: usize,
    pub mean_train_loss: f64,
    pub best_val_f1: Option<f64>,
}

/// One full walk-forward run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub windows: Vec<WindowReport>,
    /// Mean test F1 over post-warm-start windows that produced a score.
    pub measured_f1: Option<f64>,
    /// Mean emitted length over post-warm-start windows.
    pub measured_avg_len: f64,
    pub measured_coverage: f64,
    /// Mean emitted length per series over post-warm-start windows.
    pub measured_per_series_len: Vec<f64>,
    /// Serialized-parameter hashes at (end of window w, start of window
    /// w+1); equal pairs certify warm-start continuity.
    pub boundary_hashes: Vec<(u64, u64)>,
    /// Final trained parameters, for checkpointing.
    pub final_model: Model,
}

fn params_hash(model: &Model) -> Result<u64> {
    let mut buf = Vec::new();
    checkpoint::write_to(&model.params, &mut buf)?;
    Ok(checkpoint::bytes_hash(&buf))
}

/// Trains and evaluates across every window, warm-starting each window
/// from the previous one's weights (optimizer state carries over too).
pub fn run_walk_forward(
    model_cfg: &ModelConfig,
    loss_cfg: &DynamicLossConfig,
    dataset: &Dataset,
    wf: &WalkForwardConfig,
    seed: u64,
) -> Result<RunReport> {
    model_cfg.validate()?;
    loss_cfg.validate()?;
    wf.validate()?;
    if loss_cfg.horizon > model_cfg.horizon {
        return Err(CoreError::config(format!(
            "loss horizon {} exceeds model horizon {}",
            loss_cfg.horizon, model_cfg.horizon
        )));
    }
    if dataset.series() != model_cfg.series {
        return Err(CoreError::config(format!(
            "dataset has {} series, model wants {}",
            dataset.series(),
            model_cfg.series
        )));
    }
    if dataset.ticks() < wf.required_ticks() {
        return Err(CoreError::data(format!(
            "dataset has {} ticks, walk-forward needs {}",
            dataset.ticks(),
            wf.required_ticks()
        )));
    }

    let mut model = Model::new(model_cfg.clone(), seed)?;
    let optimizer_kind = match model_cfg.kind {
        ModelKind::Ffn => OptimizerKind::Sgd,
        _ => OptimizerKind::Adam,
    };
    let mut optimizer = Optimizer::new(optimizer_kind, wf.learning_rate);

    let mut reports = Vec::with_capacity(wf.windows);
    let mut boundary_hashes = Vec::new();
    let mut pending_end_hash: Option<u64> = None;

    for w in 0..wf.windows {
        if let Some(end_hash) = pending_end_hash.take() {
            boundary_hashes.push((end_hash, params_hash(&model)?));
        }

        let span_start = w * wf.test_ticks;
        let train_end = span_start + wf.train_ticks;
        let test_end = train_end + wf.test_ticks;
        let (returns, labels) = dataset.slice(span_start..test_end)?;
        let all = make_windows(&returns, &labels, model_cfg.input_len, loss_cfg.horizon)?;

        // Train windows: horizon entirely inside the train span.
        // Test windows: horizon entirely inside the test span.
        // Straddlers are dropped.
        let mut train: Vec<LabeledWindow> = Vec::new();
        let mut test: Vec<LabeledWindow> = Vec::new();
        for win in all {
            let horizon_start = win.start_tick + model_cfg.input_len;
            if horizon_start + loss_cfg.horizon <= wf.train_ticks {
                train.push(win);
            } else if horizon_start >= wf.train_ticks {
                test.push(win);
            }
        }
        if train.is_empty() || test.is_empty() {
            return Err(CoreError::data(format!(
                "window {w}: {} train / {} test samples; spans too short",
                train.len(),
                test.len()
            )));
        }

        // Normalization stats come from the full train span; validation
        // (its trailing slice) and test reuse them.
        normalize(&mut train, &mut test)?;
        let val_count = ((train.len() as f64) * wf.validation_fraction).floor() as usize;
        let (fit, val) = train.split_at(train.len() - val_count);
        let val = if val.is_empty() { fit } else { val };

        if w == 0 && wf.pretrain_epochs > 0 {
            // Pretrain on the unmasked objective for a fixed budget:
            // the masked loss cannot lift accuracy on steps it masks,
            // so the dynamic phase inherits whatever this phase
            // reached. Validation F1 sits flat for several epochs
            // before the model finds any signal, so a patience rule
            // here would quit inside that plateau.
            let warm_loss = super::curve::always_emit_loss(loss_cfg.horizon);
            let warm_settings = TrainSettings {
                batch_size: wf.batch_size,
                epochs_cap: wf.pretrain_epochs,
                patience: wf.pretrain_epochs,
                evals_per_epoch: 1,
                seed: mix64(seed ^ 0x77a6),
            };
            train_window(&mut model, &mut optimizer, &warm_loss, fit, val, &warm_settings)?;
        }

        let settings = TrainSettings {
            batch_size: wf.batch_size,
            epochs_cap: wf.epochs_cap,
            patience: wf.patience,
            evals_per_epoch: 4,
            seed: mix64(seed ^ mix64(w as u64)),
        };
        let outcome = train_window(&mut model, &mut optimizer, loss_cfg, fit, val, &settings)?;
        let eval = evaluate(&model, loss_cfg, &test)?;
        reports.push(WindowReport {
            window: w,
            eval,
            epochs: outcome.epochs_run,
            mean_train_loss: outcome.mean_train_loss,
            best_val_f1: outcome.best_val_f1,
        });

        pending_end_hash = Some(params_hash(&model)?);
    }

    let measured = &reports[wf.warm_start_windows..];
    let f1s: Vec<f64> = measured.iter().filter_map(|r| r.eval.f1).collect();
    let measured_f1 = if f1s.is_empty() {
        None
    } else {
        Some(f1s.iter().sum::<f64>() / f1s.len() as f64)
    };
    let measured_avg_len =
        measured.iter().map(|r| r.eval.avg_len).sum::<f64>() / measured.len() as f64;
    let measured_coverage =
        measured.iter().map(|r| r.eval.coverage).sum::<f64>() / measured.len() as f64;
    let series = model.config.series;
    let measured_per_series_len: Vec<f64> = (0..series)
        .map(|q| {
            measured.iter().map(|r| r.eval.per_series_len[q]).sum::<f64>() / measured.len() as f64
        })
        .collect();

    Ok(RunReport {
        windows: reports,
        measured_f1,
        measured_avg_len,
        measured_coverage,
        measured_per_series_len,
        boundary_hashes,
        final_model: model,
    })
}
