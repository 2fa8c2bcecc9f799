//! Text renderings of run results: the CSV files and the summary
//! structure. Numbers use Rust's shortest round-trip float formatting,
//! so identical runs produce identical bytes.

use serde::Serialize;

use crate::error::Result;
use crate::loss::{ConfidenceKind, MaskMode};

use super::curve::StaticCurve;
use super::sweep::{f1_gap, SweepPoint};
use super::walkforward::RunReport;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `tau,lambda,mask,confidence,f1,avg_len,above_curve,status`
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("tau,lambda,mask,confidence,f1,avg_len,above_curve,status\n");
    for p in points {
        let above = p
            .above_curve
            .map(|b| b.to_string())
            .unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.tau,
            p.lambda,
            p.mask,
            p.kind,
            opt(p.f1),
            p.avg_len,
            above,
            p.status
        ));
    }
    s
}

/// `tau,avg_len`
pub fn sensitivity_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("tau,avg_len\n");
    for (tau, len) in points {
        s.push_str(&format!("{tau},{len}\n"));
    }
    s
}

/// `length,f1`
pub fn curve_csv(curve: &StaticCurve) -> String {
    let mut s = String::from("length,f1\n");
    for (len, f1) in &curve.anchors {
        s.push_str(&format!("{len},{f1}\n"));
    }
    s
}

/// `window,f1_dynamic,avg_len,coverage,f1_static_1,f1_static_T`
///
/// The static columns are per-window scores of the fixed-length-1 and
/// fixed-length-T baselines, when those runs exist.
pub fn windows_csv(
    dynamic: Option<&RunReport>,
    static_1: Option<&RunReport>,
    static_t: Option<&RunReport>,
) -> String {
    let count = dynamic
        .or(static_1)
        .or(static_t)
        .map(|r| r.windows.len())
        .unwrap_or(0);
    let mut s = String::from("window,f1_dynamic,avg_len,coverage,f1_static_1,f1_static_T\n");
    for w in 0..count {
        let (f1d, len, cov) = match dynamic {
            Some(r) => (
                opt(r.windows[w].eval.f1),
                r.windows[w].eval.avg_len.to_string(),
                r.windows[w].eval.coverage.to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        let s1 = static_1.map(|r| opt(r.windows[w].eval.f1)).unwrap_or_default();
        let st = static_t.map(|r| opt(r.windows[w].eval.f1)).unwrap_or_default();
        s.push_str(&format!("{w},{f1d},{len},{cov},{s1},{st}\n"));
    }
    s
}

/// One summary row: the best grid point of a (confidence, mask) family
/// by F1 gap over the static curve.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryEntry {
    pub confidence: String,
    pub mask: String,
    pub f1_gap_pct: f64,
    pub tau: f64,
    pub lambda: f64,
    pub prediction_length: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub entries: Vec<SummaryEntry>,
    pub best: Option<SummaryEntry>,
}

/// Reduces sweep points to per-family best-gap rows plus the overall
/// winner.
pub fn summarize(points: &[SweepPoint], curve: &StaticCurve) -> Result<SweepSummary> {
    let mut entries: Vec<SummaryEntry> = Vec::new();
    let mut families: Vec<(ConfidenceKind, MaskMode)> = Vec::new();
    for p in points {
        if !families.contains(&(p.kind, p.mask)) {
            families.push((p.kind, p.mask));
        }
    }
    for (kind, mask) in families {
        let mut best: Option<SummaryEntry> = None;
        for p in points.iter().filter(|p| p.kind == kind && p.mask == mask) {
            let Some(f1) = p.f1 else { continue };
            let gap = f1_gap(f1, p.avg_len, curve)?;
            if best.as_ref().map(|b| gap > b.f1_gap_pct).unwrap_or(true) {
                best = Some(SummaryEntry {
                    confidence: kind.to_string(),
                    mask: mask.to_string(),
                    f1_gap_pct: gap,
                    tau: p.tau,
                    lambda: p.lambda,
                    prediction_length: p.avg_len,
                    f1,
                });
            }
        }
        if let Some(e) = best {
            entries.push(e);
        }
    }
    let best = entries
        .iter()
        .max_by(|a, b| a.f1_gap_pct.partial_cmp(&b.f1_gap_pct).expect("finite gaps"))
        .cloned();
    Ok(SweepSummary { entries, best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(tau: f64, lambda: f64, f1: Option<f64>, avg_len: f64) -> SweepPoint {
        SweepPoint {
            tau,
            lambda,
            mask: MaskMode::Sigmoid,
            kind: ConfidenceKind::ConfidenceDistance,
            f1,
            avg_len,
            above_curve: f1.map(|v| v > 0.5),
            status: "ok".into(),
        }
    }

    #[test]
    fn csv_shapes() {
        let pts = vec![point(0.3, 0.1, Some(0.55), 6.5), point(0.4, 0.1, None, 0.0)];
        let csv = sweep_csv(&pts);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "tau,lambda,mask,confidence,f1,avg_len,above_curve,status");
        assert!(lines[1].starts_with("0.3,0.1,sigmoid,cd,0.55,6.5,true,ok"));
        assert_eq!(lines[2], "0.4,0.1,sigmoid,cd,,0,,ok");
    }

    #[test]
    fn summary_picks_best_gap() {
        let curve = StaticCurve::new(vec![(1.0, 0.5), (10.0, 0.5)]).unwrap();
        let pts = vec![
            point(0.3, 0.1, Some(0.55), 6.0),
            point(0.4, 0.1, Some(0.60), 6.0),
            point(0.5, 0.1, None, 0.0),
        ];
        let summary = summarize(&pts, &curve).unwrap();
        assert_eq!(summary.entries.len(), 1);
        let best = summary.best.unwrap();
        assert_eq!(best.tau, 0.4);
        assert!((best.f1_gap_pct - 20.0).abs() < 1e-9);
    }
}
