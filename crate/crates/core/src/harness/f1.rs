//! Macro F1 over (series, class) cells with one-against-all counts.

use crate::error::{CoreError, Result};

/// Pooled confusion counts per (series, class) cell.
#[derive(Debug, Clone)]
pub struct PredictionPool {
    series: usize,
    classes: usize,
    tp: Vec<u64>,
    fp: Vec<u64>,
    fn_: Vec<u64>,
    emitted: u64,
}

impl PredictionPool {
    pub fn new(series: usize, classes: usize) -> Self {
        PredictionPool {
            series,
            classes,
            tp: vec![0; series * classes],
            fp: vec![0; series * classes],
            fn_: vec![0; series * classes],
            emitted: 0,
        }
    }

    pub fn record(&mut self, series: usize, truth: usize, predicted: usize) {
        debug_assert!(series < self.series && truth < self.classes && predicted < self.classes);
        self.emitted += 1;
        if truth == predicted {
            self.tp[series * self.classes + truth] += 1;
        } else {
            self.fp[series * self.classes + predicted] += 1;
            self.fn_[series * self.classes + truth] += 1;
        }
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Unweighted mean of per-cell F1 over every (series, class) cell
    /// that appears in the truths or the predictions. `None` when
    /// nothing was emitted.
    pub fn f1_macro(&self) -> Option<f64> {
        if self.emitted == 0 {
            return None;
        }
        let mut sum = 0.0;
        let mut cells = 0usize;
        for i in 0..self.tp.len() {
            let (tp, fp, fn_) = (self.tp[i], self.fp[i], self.fn_[i]);
            if tp + fp + fn_ == 0 {
                continue;
            }
            // 2PR/(P+R) reduces to 2tp / (2tp + fp + fn), with the
            // convention that a cell with tp = 0 scores 0.
            sum += 2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fn_ as f64);
            cells += 1;
        }
        if cells == 0 {
            None
        } else {
            Some(sum / cells as f64)
        }
    }
}

/// Array form over `[sample][series][step]` predictions with an emitted
/// mask of the same shape. Truths must cover every emitted slot.
pub fn f1_macro(
    predictions: &[Vec<Vec<usize>>],
    truths: &[Vec<Vec<usize>>],
    emitted: &[Vec<Vec<bool>>],
    series: usize,
    classes: usize,
) -> Result<Option<f64>> {
    if predictions.len() != truths.len() || predictions.len() != emitted.len() {
        return Err(CoreError::shape(
            "f1_macro",
            format!(
                "{} predictions vs {} truths vs {} masks",
                predictions.len(),
                truths.len(),
                emitted.len()
            ),
        ));
    }
    let mut pool = PredictionPool::new(series, classes);
    for ((ps, ts), ms) in predictions.iter().zip(truths).zip(emitted) {
        if ps.len() != series || ts.len() != series || ms.len() != series {
            return Err(CoreError::shape("f1_macro", "series extent mismatch"));
        }
        for q in 0..series {
            if ps[q].len() != ms[q].len() || ts[q].len() < ps[q].len() {
                return Err(CoreError::shape("f1_macro", "step extent mismatch"));
            }
            for t in 0..ps[q].len() {
                if ms[q][t] {
                    pool.record(q, ts[q][t], ps[q][t]);
                }
            }
        }
    }
    Ok(pool.f1_macro())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct_with_all_classes_present_is_one() {
        let mut pool = PredictionPool::new(1, 5);
        for c in 0..5 {
            pool.record(0, c, c);
        }
        assert_eq!(pool.f1_macro(), Some(1.0));
    }

    #[test]
    fn hand_checked_confusion() {
        // truths [0,0,1,1], predictions [0,1,0,1]:
        // class 0: tp 1, fp 1, fn 1 -> 0.5; class 1 the same; macro 0.5.
        let mut pool = PredictionPool::new(1, 5);
        for (t, p) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            pool.record(0, t, p);
        }
        assert_eq!(pool.f1_macro(), Some(0.5));
    }

    #[test]
    fn absent_classes_are_excluded_not_zeroed() {
        // One perfect class; the other four never appear. Macro must be
        // 1.0, not 0.2.
        let mut pool = PredictionPool::new(1, 5);
        pool.record(0, 2, 2);
        assert_eq!(pool.f1_macro(), Some(1.0));
    }

    #[test]
    fn zero_emissions_is_absent_not_zero() {
        let pool = PredictionPool::new(3, 5);
        assert_eq!(pool.f1_macro(), None);
    }

    #[test]
    fn array_form_applies_the_mask() {
        let predictions = vec![vec![vec![0, 1], vec![2, 2]]];
        let truths = vec![vec![vec![0, 0], vec![2, 3]]];
        let emitted = vec![vec![vec![true, false], vec![true, true]]];
        let f1 = f1_macro(&predictions, &truths, &emitted, 2, 5).unwrap().unwrap();
        // Series 0: one emitted, correct class 0 -> cell f1 1.0.
        // Series 1: class 2 tp=1 fp=1 -> 2/3; class 3 fn=1 -> 0.
        let want = (1.0 + 2.0 / 3.0 + 0.0) / 3.0;
        assert!((f1 - want).abs() < 1e-12);
    }

    #[test]
    fn per_series_cells_are_independent() {
        let mut pool = PredictionPool::new(2, 5);
        pool.record(0, 1, 1);
        pool.record(1, 1, 2);
        // Series 0 class 1: f1 1. Series 1: class 1 fn -> 0, class 2 fp -> 0.
        let want = (1.0 + 0.0 + 0.0) / 3.0;
        assert!((pool.f1_macro().unwrap() - want).abs() < 1e-12);
    }
}
