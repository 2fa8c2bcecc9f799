//! Readers for the sweep outputs, used by the report subcommand.

use std::path::Path;

use dynlen_core::harness::{StaticCurve, SweepPoint};
use dynlen_core::loss::{ConfidenceKind, MaskMode};
use dynlen_core::CoreError;

fn parse_opt_f64(field: &str, what: &str) -> Result<Option<f64>, CoreError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|e| CoreError::data(format!("{what}: {e}")))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepPoint>, CoreError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "tau,lambda,mask,confidence,f1,avg_len,above_curve,status" {
        return Err(CoreError::data(format!("unexpected sweep.csv header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(CoreError::data(format!("sweep.csv row {i}: {} fields", f.len())));
        }
        out.push(SweepPoint {
            tau: f[0].parse().map_err(|e| CoreError::data(format!("tau: {e}")))?,
            lambda: f[1].parse().map_err(|e| CoreError::data(format!("lambda: {e}")))?,
            mask: f[2].parse::<MaskMode>()?,
            kind: f[3].parse::<ConfidenceKind>()?,
            f1: parse_opt_f64(f[4], "f1")?,
            avg_len: f[5].parse().map_err(|e| CoreError::data(format!("avg_len: {e}")))?,
            above_curve: match f[6] {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => return Err(CoreError::data(format!("above_curve: {other:?}"))),
            },
            status: f[7].to_string(),
        });
    }
    Ok(out)
}

pub fn read_curve_csv(path: &Path) -> Result<StaticCurve, CoreError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "length,f1" {
        return Err(CoreError::data(format!("unexpected curve.csv header {header:?}")));
    }
    let mut anchors = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (l, f) = line
            .split_once(',')
            .ok_or_else(|| CoreError::data(format!("curve.csv row {line:?}")))?;
        anchors.push((
            l.parse().map_err(|e| CoreError::data(format!("length: {e}")))?,
            f.parse().map_err(|e| CoreError::data(format!("f1: {e}")))?,
        ));
    }
    StaticCurve::new(anchors)
}
