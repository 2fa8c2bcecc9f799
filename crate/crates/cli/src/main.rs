//! `dynlen`: data generation, walk-forward training, hyperparameter
//! sweeps, gradient checking and report emission, driven by one TOML
//! config file. Exit codes: 0 success, 1 runtime failure, 2 usage or
//! configuration error.

mod config;
mod report_io;

use std::cell::Cell;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dynlen_core::checkpoint;
use dynlen_core::data::{generate_synthetic, BetaSpec, Dataset, PricePanel};
use dynlen_core::gradcheck::finite_diff_check;
use dynlen_core::gradsuite;
use dynlen_core::harness::{
    always_emit_loss, build_static_curve, curve_csv, run_walk_forward, sensitivity_csv, summarize,
    sweep, sweep_csv, windows_csv,
};
use dynlen_core::loss::{ConfidenceKind, MaskMode};
use dynlen_core::params::init_uniform;
use dynlen_core::{CoreError, Graph, ParameterSet};

use config::Effective;

#[derive(Parser)]
#[command(name = "dynlen", version, about = "dynamic prediction-length experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long, default_value = "dynlen.toml")]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic price dataset CSV.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Walk-forward training and evaluation.
    Train {
        #[command(flatten)]
        common: Common,
        /// static: fixed-horizon unmasked training; dynamic: the
        /// confidence-masked loss.
        #[arg(long, default_value = "dynamic")]
        mode: String,
        /// Fixed prediction length for static mode.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// maximum | cd | tv | emd
        #[arg(long)]
        confidence: Option<String>,
        /// indicator | sigmoid
        #[arg(long)]
        mask: Option<String>,
        /// Also train fixed-length-1 and fixed-length-T baselines to
        /// fill the static columns of windows.csv.
        #[arg(long)]
        baselines: bool,
    },
    /// Static curve plus a (tau, lambda) grid; writes sweep.csv,
    /// curve.csv, sensitivity.csv and summary.json.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parallel workers for grid points (output is identical for
        /// any worker count).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Finite-difference verification across all model/loss pairings.
    Gradcheck {
        /// Substring filter on configuration names.
        #[arg(long)]
        only: Option<String>,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        /// Fault-injection self-test: corrupt one analytic gradient and
        /// prove the checker catches it.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Re-summarize an existing sweep output directory.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory holding sweep.csv and curve.csv; defaults to the
        /// config's output directory.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CoreError::Config(_) | CoreError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CoreError> {
    match cli.command {
        Command::Generate { common } => cmd_generate(&load_effective(&common)?),
        Command::Train {
            common,
            mode,
            horizon,
            tau,
            lambda,
            confidence,
            mask,
            baselines,
        } => {
            let mut eff = load_effective(&common)?;
            if let Some(t) = tau {
                eff.loss.tau = t;
            }
            if let Some(l) = lambda {
                eff.loss.lambda = l;
            }
            if let Some(c) = &confidence {
                eff.loss.kind = c.parse::<ConfidenceKind>()?;
            }
            if let Some(m) = &mask {
                eff.loss.mask = m.parse::<MaskMode>()?;
            }
            if let Some(h) = horizon {
                eff.loss.horizon = h;
            }
            match mode.as_str() {
                "dynamic" => {
                    eff.loss.validate()?;
                    cmd_train(&eff, false, baselines)
                }
                "static" => {
                    eff.loss = always_emit_loss(eff.loss.horizon);
                    cmd_train(&eff, true, baselines)
                }
                other => Err(CoreError::usage(format!(
                    "unknown mode {other:?}, expected static|dynamic"
                ))),
            }
        }
        Command::Sweep { common, workers } => {
            let mut eff = load_effective(&common)?;
            if let Some(w) = workers {
                eff.sweep.workers = w.max(1);
            }
            cmd_sweep(&eff)
        }
        Command::Gradcheck {
            only,
            eps,
            tolerance,
            corrupt,
        } => cmd_gradcheck(only.as_deref(), eps, tolerance, corrupt),
        Command::Report { common, dir } => {
            let eff = load_effective(&common)?;
            let dir = dir.unwrap_or_else(|| eff.output_dir.clone());
            cmd_report(&dir)
        }
    }
}

fn load_effective(common: &Common) -> Result<Effective, CoreError> {
    let raw = config::load(&common.config)?;
    config::resolve(&raw)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CoreError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path)?;
    f.write_all(contents.as_bytes())?;
    Ok(path)
}

fn echo_config(eff: &Effective) -> Result<(), CoreError> {
    write_file(&eff.output_dir, "effective_config.toml", &eff.echo()?)?;
    Ok(())
}

fn load_dataset(eff: &Effective) -> Result<Dataset, CoreError> {
    if !eff.dataset.exists() {
        return Err(CoreError::Config(format!(
            "dataset {} not found; run `dynlen generate` first",
            eff.dataset.display()
        )));
    }
    let file = std::fs::File::open(&eff.dataset)?;
    let panel = PricePanel::read_csv(std::io::BufReader::new(file))?;
    let beta = match (eff.labeling.beta, eff.labeling.calibrate_target) {
        (Some(b), _) => BetaSpec::Fixed(b),
        (None, target) => BetaSpec::Calibrate {
            target: target.unwrap_or(0.5),
        },
    };
    // Calibration looks only at the first training span.
    Dataset::from_panel(
        &panel,
        eff.synthetic.ticks_per_day,
        beta,
        Some(0..eff.walk_forward.train_ticks.min(panel.ticks().saturating_sub(1))),
    )
}

fn cmd_generate(eff: &Effective) -> Result<(), CoreError> {
    let panel = generate_synthetic(&eff.synthetic)?;
    if let Some(parent) = eff.dataset.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut buf = Vec::new();
    panel.write_csv(&mut buf)?;
    std::fs::write(&eff.dataset, &buf)?;
    echo_config(eff)?;

    // Summary: per-series return volatility and mean pairwise correlation.
    let returns: Vec<Vec<f64>> = panel
        .prices
        .iter()
        .map(|p| dynlen_core::data::compute_returns(p))
        .collect::<Result<_, _>>()?;
    println!("wrote {} ({} series, {} ticks)", eff.dataset.display(), panel.series(), panel.ticks());
    for (q, r) in returns.iter().enumerate() {
        let n = r.len() as f64;
        let mu = r.iter().sum::<f64>() / n;
        let sd = (r.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1.0)).sqrt();
        println!("series_{q}: return std {sd:.6}");
    }
    if returns.len() > 1 {
        let mut acc = 0.0;
        let mut pairs = 0.0;
        for a in 0..returns.len() {
            for b in a + 1..returns.len() {
                acc += correlation(&returns[a], &returns[b]);
                pairs += 1.0;
            }
        }
        println!("mean pairwise correlation {:.4}", acc / pairs);
    }
    Ok(())
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

fn cmd_train(eff: &Effective, static_mode: bool, baselines: bool) -> Result<(), CoreError> {
    let dataset = load_dataset(eff)?;
    let report = run_walk_forward(&eff.model, &eff.loss, &dataset, &eff.walk_forward, eff.seed)?;

    let (static_1, static_t) = if baselines {
        let s1 = run_walk_forward(
            &eff.model,
            &always_emit_loss(1),
            &dataset,
            &eff.walk_forward,
            eff.seed,
        )?;
        let st = run_walk_forward(
            &eff.model,
            &always_emit_loss(eff.loss.horizon),
            &dataset,
            &eff.walk_forward,
            eff.seed,
        )?;
        (Some(s1), Some(st))
    } else {
        (None, None)
    };

    let csv = if static_mode && !baselines {
        // A static run reports itself in the static column matching its
        // horizon.
        let one = eff.loss.horizon == 1;
        windows_csv(
            None,
            if one { Some(&report) } else { None },
            if one { None } else { Some(&report) },
        )
    } else {
        windows_csv(Some(&report), static_1.as_ref(), static_t.as_ref())
    };
    write_file(&eff.output_dir, "windows.csv", &csv)?;
    checkpoint::save(&report.final_model.params, &eff.output_dir.join("checkpoint.bin"))?;
    echo_config(eff)?;

    let continuity = report.boundary_hashes.iter().all(|(a, b)| a == b);
    let summary = serde_json::json!({
        "mode": if static_mode { "static" } else { "dynamic" },
        "measured_f1": report.measured_f1,
        "measured_avg_len": report.measured_avg_len,
        "measured_coverage": report.measured_coverage,
        "per_series_len": report.measured_per_series_len,
        "windows": report.windows.len(),
        "warm_start_continuity": continuity,
    });
    write_file(
        &eff.output_dir,
        "train_summary.json",
        &serde_json::to_string_pretty(&summary).map_err(|e| CoreError::data(e.to_string()))?,
    )?;
    println!(
        "train done: f1 {:?}, avg len {:.3}, coverage {:.3}, warm-start continuity {}",
        report.measured_f1, report.measured_avg_len, report.measured_coverage, continuity
    );
    Ok(())
}

fn cmd_sweep(eff: &Effective) -> Result<(), CoreError> {
    let dataset = load_dataset(eff)?;
    let (curve, _anchor_reports) = build_static_curve(
        &eff.model,
        &dataset,
        &eff.walk_forward,
        &eff.sweep.curve_lengths,
        eff.seed,
    )?;
    let points = sweep(
        &eff.model,
        &eff.loss,
        &dataset,
        &eff.walk_forward,
        &curve,
        &eff.sweep.taus,
        &eff.sweep.lambdas,
        eff.seed,
        eff.sweep.workers,
    )?;

    write_file(&eff.output_dir, "sweep.csv", &sweep_csv(&points))?;
    write_file(&eff.output_dir, "curve.csv", &curve_csv(&curve))?;
    let sens: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.lambda == eff.sweep.sensitivity_lambda && p.status == "ok")
        .map(|p| (p.tau, p.avg_len))
        .collect();
    write_file(&eff.output_dir, "sensitivity.csv", &sensitivity_csv(&sens))?;
    let summary = summarize(&points, &curve)?;
    write_file(
        &eff.output_dir,
        "summary.json",
        &serde_json::to_string_pretty(&summary).map_err(|e| CoreError::data(e.to_string()))?,
    )?;
    echo_config(eff)?;

    let above = points.iter().filter(|p| p.above_curve == Some(true)).count();
    println!(
        "sweep done: {} points, {} above the static curve; best gap {:?}",
        points.len(),
        above,
        summary.best.as_ref().map(|b| b.f1_gap_pct)
    );
    Ok(())
}

fn cmd_gradcheck(
    only: Option<&str>,
    eps: f64,
    tolerance: f64,
    corrupt: bool,
) -> Result<(), CoreError> {
    if corrupt {
        return corrupted_self_test(eps, tolerance);
    }
    let cases = gradsuite::run_suite(only, eps, tolerance)?;
    let mut failed = 0;
    for c in &cases {
        println!(
            "{:<32} max_rel_err {:>12.4e}  worst {}[{}]  {}",
            c.name,
            c.report.max_rel_error,
            c.report.worst_param,
            c.report.worst_index,
            if c.passed() { "PASS" } else { "FAIL" }
        );
        if !c.passed() {
            failed += 1;
        }
    }
    println!("{} configurations, {} failed", cases.len(), failed);
    if failed > 0 {
        return Err(CoreError::data(format!("{failed} configurations over tolerance")));
    }
    Ok(())
}

/// Adds a term only the analytic pass sees; the checker must flag the
/// mismatch, proving it can detect a wrong gradient.
fn corrupted_self_test(eps: f64, tolerance: f64) -> Result<(), CoreError> {
    let mut rng = dynlen_core::params::seeded_rng(99, 0);
    let mut params = ParameterSet::new();
    params.insert("theta", init_uniform(vec![1, 4], &mut rng))?;
    let first_call = Cell::new(true);
    let report = finite_diff_check(
        &params,
        |p| {
            let mut g = Graph::new();
            let t = g.param(p, "theta")?;
            let sq = g.mul(t, t)?;
            let mut loss = g.sum_all(sq);
            if first_call.replace(false) {
                let probe = g.slice_cols(t, 0, 1)?;
                let bump = g.scale(probe, 1e-2);
                loss = g.add(loss, bump)?;
            }
            Ok((g, loss))
        },
        eps,
    )?;
    println!(
        "corrupted-gradient self-test: max_rel_err {:.4e} ({})",
        report.max_rel_error,
        if report.max_rel_error > tolerance {
            "fault detected"
        } else {
            "fault NOT detected"
        }
    );
    if report.max_rel_error > tolerance {
        Err(CoreError::data(
            "corrupted gradient detected, failing as designed".to_string(),
        ))
    } else {
        Ok(())
    }
}

fn cmd_report(dir: &Path) -> Result<(), CoreError> {
    let points = report_io::read_sweep_csv(&dir.join("sweep.csv"))?;
    let curve = report_io::read_curve_csv(&dir.join("curve.csv"))?;
    let summary = summarize(&points, &curve)?;
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CoreError::data(e.to_string()))?;
    println!("{text}");
    Ok(())
}
