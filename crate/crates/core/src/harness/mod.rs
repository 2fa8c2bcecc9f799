//! Walk-forward experiment machinery: training loops, macro F1, the
//! static baseline curve, grid sweeps and report rendering.

pub(crate) mod curve;
mod f1;
mod report;
mod sweep;
mod train;
mod walkforward;

pub use curve::{always_emit_loss, build_static_curve, StaticCurve};
pub use f1::{f1_macro, PredictionPool};
pub use report::{
    curve_csv, sensitivity_csv, summarize, sweep_csv, windows_csv, SummaryEntry, SweepSummary,
};
pub use sweep::{f1_gap, point_seed, sensitivity_fit, sweep, SensitivityFit, SweepPoint};
pub use train::{evaluate, sample_gradient, train_window, EvalStats, TrainOutcome, TrainSettings};
pub use walkforward::{run_walk_forward, RunReport, WalkForwardConfig, WindowReport};
