//! (tau, lambda) grid sweeps, the tau-sensitivity regression, and the
//! F1-gap summary.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{CoreError, Result};
use crate::loss::{DynamicLossConfig, MaskMode};
use crate::model::ModelConfig;
use crate::params::mix64;

use super::curve::StaticCurve;
use super::walkforward::{run_walk_forward, WalkForwardConfig};

/// One grid point's outcome. `status` is "ok" or the error text; failed
/// points keep their grid slot instead of aborting the sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub tau: f64,
    pub lambda: f64,
    pub mask: MaskMode,
    pub kind: crate::loss::ConfidenceKind,
    pub f1: Option<f64>,
    pub avg_len: f64,
    pub above_curve: Option<bool>,
    pub status: String,
}

/// Seed for one grid point; depends only on the master seed and the
/// pair itself, so extending the grid never perturbs existing points.
pub fn point_seed(master: u64, tau: f64, lambda: f64) -> u64 {
    mix64(master ^ mix64(tau.to_bits()) ^ mix64(lambda.to_bits().rotate_left(17)))
}

/// Runs one independent walk-forward per (tau, lambda) pair. Points run
/// in parallel when `workers > 1`; results always come back in grid
/// order (taus outer, lambdas inner) with per-pair seeds, so the worker
/// count cannot change the output.
pub fn sweep(
    model_cfg: &ModelConfig,
    template: &DynamicLossConfig,
    dataset: &Dataset,
    wf: &WalkForwardConfig,
    curve: &StaticCurve,
    taus: &[f64],
    lambdas: &[f64],
    master_seed: u64,
    workers: usize,
) -> Result<Vec<SweepPoint>> {
    if taus.is_empty() || lambdas.is_empty() {
        return Err(CoreError::usage("sweep grids must be non-empty"));
    }
    let pairs: Vec<(f64, f64)> = taus
        .iter()
        .flat_map(|&t| lambdas.iter().map(move |&l| (t, l)))
        .collect();

    let run_point = |&(tau, lambda): &(f64, f64)| -> SweepPoint {
        let mut cfg = *template;
        cfg.tau = tau;
        cfg.lambda = lambda;
        let seed = point_seed(master_seed, tau, lambda);
        match run_walk_forward(model_cfg, &cfg, dataset, wf, seed) {
            Ok(report) => {
                let above = report.measured_f1.map(|f1| f1 > curve.value(report.measured_avg_len));
                SweepPoint {
                    tau,
                    lambda,
                    mask: cfg.mask,
                    kind: cfg.kind,
                    f1: report.measured_f1,
                    avg_len: report.measured_avg_len,
                    above_curve: above,
                    status: "ok".to_string(),
                }
            }
            Err(e) => SweepPoint {
                tau,
                lambda,
                mask: cfg.mask,
                kind: cfg.kind,
                f1: None,
                avg_len: 0.0,
                above_curve: None,
                status: e.to_string(),
            },
        }
    };

    if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CoreError::usage(format!("worker pool: {e}")))?;
        Ok(pool.install(|| pairs.par_iter().map(run_point).collect()))
    } else {
        Ok(pairs.iter().map(run_point).collect())
    }
}

/// Ordinary least squares plus Pearson correlation over `(x, y)` points.
#[derive(Debug, Clone, Copy)]
pub struct SensitivityFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` when y has no variance (correlation undefined).
    pub pearson_r: Option<f64>,
}

pub fn sensitivity_fit(points: &[(f64, f64)]) -> Result<SensitivityFit> {
    if points.len() < 3 {
        return Err(CoreError::usage(format!(
            "regression needs at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if points.iter().all(|p| p.0 == points[0].0) || sxx == 0.0 {
        return Err(CoreError::data("degenerate regression: all x values equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let pearson_r = if syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx.sqrt() * syy.sqrt()))
    };
    Ok(SensitivityFit {
        slope,
        intercept,
        pearson_r,
    })
}

/// Relative F1 improvement (percent) of a dynamic run over the static
/// curve at the same average length.
pub fn f1_gap(dynamic_f1: f64, dynamic_len: f64, curve: &StaticCurve) -> Result<f64> {
    let base = curve.value(dynamic_len);
    if base == 0.0 {
        return Err(CoreError::data("curve value is zero; gap undefined"));
    }
    Ok(100.0 * (dynamic_f1 - base) / base)
}
