//! Sliding-window sample construction and train-stat normalization.

use crate::error::{CoreError, Result};
use crate::tensor::Tensor;

/// One training sample: an encoder block of normalized returns plus the
/// label horizon that follows it.
#[derive(Debug, Clone)]
pub struct LabeledWindow {
    /// `[input_len, series]` returns (normalized in place later).
    pub x: Tensor,
    /// `y[t][q]`: class for horizon step t, series q.
    pub y: Vec<Vec<usize>>,
    /// Label of the last encoder tick per series; the first decoder input.
    pub first_label: Vec<usize>,
    /// Tick index of the first encoder entry.
    pub start_tick: usize,
}

/// Per-series normalization statistics taken from the training windows.
#[derive(Debug, Clone)]
pub struct NormStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Builds stride-1 overlapping windows over `returns[q][t]` using the
/// label stream `labels[q][t]` (None = unlabelable tick). Windows whose
/// last encoder tick or horizon ticks lack labels are dropped, so the
/// first day contributes no samples.
pub fn make_windows(
    returns: &[Vec<f64>],
    labels: &[Vec<Option<usize>>],
    input_len: usize,
    horizon: usize,
) -> Result<Vec<LabeledWindow>> {
    let series = returns.len();
    if series == 0 || labels.len() != series {
        return Err(CoreError::data(format!(
            "{series} return series vs {} label series",
            labels.len()
        )));
    }
    let ticks = returns[0].len();
    for (q, r) in returns.iter().enumerate() {
        if r.len() != ticks || labels[q].len() != ticks {
            return Err(CoreError::data(format!(
                "series {q}: ragged returns/labels ({} / {} vs {ticks})",
                r.len(),
                labels[q].len()
            )));
        }
    }
    if ticks < input_len + horizon {
        return Err(CoreError::data(format!(
            "{ticks} ticks cannot fit one window of {input_len} + {horizon}"
        )));
    }

    let count = ticks - input_len - horizon + 1;
    let mut out = Vec::with_capacity(count);
    'windows: for start in 0..count {
        let last_enc = start + input_len - 1;
        let mut first_label = Vec::with_capacity(series);
        for labels_q in labels {
            match labels_q[last_enc] {
                Some(c) => first_label.push(c),
                None => continue 'windows,
            }
        }
        let mut y = vec![Vec::with_capacity(series); horizon];
        for (t, row) in y.iter_mut().enumerate() {
            for labels_q in labels {
                match labels_q[last_enc + 1 + t] {
                    Some(c) => row.push(c),
                    None => continue 'windows,
                }
            }
        }
        let mut x = vec![0.0; input_len * series];
        for t in 0..input_len {
            for (q, returns_q) in returns.iter().enumerate() {
                x[t * series + q] = returns_q[start + t];
            }
        }
        out.push(LabeledWindow {
            x: Tensor::new(vec![input_len, series], x)?,
            y,
            first_label,
            start_tick: start,
        });
    }
    if out.is_empty() {
        return Err(CoreError::data(
            "no usable windows: every candidate lacked labels",
        ));
    }
    Ok(out)
}

/// Z-scores both sets per series with statistics taken from the
/// training windows only.
pub fn normalize(train: &mut [LabeledWindow], eval: &mut [LabeledWindow]) -> Result<NormStats> {
    let Some(first) = train.first() else {
        return Err(CoreError::data("normalize needs a non-empty training set"));
    };
    let (_, series) = first.x.dims2()?;

    let mut sums = vec![0.0; series];
    let mut count = 0usize;
    for w in train.iter() {
        for row in w.x.values().chunks(series) {
            for (q, v) in row.iter().enumerate() {
                sums[q] += v;
            }
        }
        count += w.x.len() / series;
    }
    let mu: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();

    let mut sq = vec![0.0; series];
    for w in train.iter() {
        for row in w.x.values().chunks(series) {
            for (q, v) in row.iter().enumerate() {
                sq[q] += (v - mu[q]).powi(2);
            }
        }
    }
    let sigma: Vec<f64> = sq.iter().map(|s| (s / count as f64).sqrt()).collect();
    if let Some(q) = sigma.iter().position(|s| *s <= 1e-12) {
        return Err(CoreError::data(format!(
            "series {q} is constant over the training span; cannot normalize"
        )));
    }

    for set in [train, eval] {
        for w in set.iter_mut() {
            for row in w.x.values_mut().chunks_mut(series) {
                for (q, v) in row.iter_mut().enumerate() {
                    *v = (*v - mu[q]) / sigma[q];
                }
            }
        }
    }
    Ok(NormStats { mu, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(ticks: usize, series: usize) -> (Vec<Vec<f64>>, Vec<Vec<Option<usize>>>) {
        let returns: Vec<Vec<f64>> = (0..series)
            .map(|q| {
                (0..ticks)
                    .map(|t| ((t + q) as f64 * 0.37).sin() * 0.01)
                    .collect()
            })
            .collect();
        let labels = returns
            .iter()
            .map(|r| r.iter().map(|v| Some(((v * 500.0).abs() as usize) % 5)).collect())
            .collect();
        (returns, labels)
    }

    #[test]
    fn window_count_arithmetic() {
        let (r, l) = labeled(13, 2);
        // len = input + horizon -> exactly one window
        let w = make_windows(&r, &l, 10, 3).unwrap();
        assert_eq!(w.len(), 1);
        let (r, l) = labeled(22, 2);
        // len = input + horizon + 9 -> ten windows
        let w = make_windows(&r, &l, 10, 3).unwrap();
        assert_eq!(w.len(), 10);
    }

    #[test]
    fn consecutive_windows_share_all_but_one_tick() {
        let (r, l) = labeled(30, 1);
        let w = make_windows(&r, &l, 10, 2).unwrap();
        let a = w[0].x.values();
        let b = w[1].x.values();
        assert_eq!(&a[1..], &b[..9]);
        assert_eq!(w[1].start_tick, w[0].start_tick + 1);
    }

    #[test]
    fn too_short_series_is_an_error() {
        let (r, l) = labeled(12, 1);
        assert!(make_windows(&r, &l, 10, 3).is_err());
    }

    #[test]
    fn unlabeled_ticks_drop_windows() {
        let (r, mut l) = labeled(25, 1);
        for slot in l[0][..12].iter_mut() {
            *slot = None;
        }
        let w = make_windows(&r, &l, 10, 2).unwrap();
        // The last encoder tick must be labeled: start + 9 >= 12.
        assert!(w.iter().all(|w| w.start_tick + 9 >= 12));
    }

    #[test]
    fn first_label_is_last_encoder_ticks_label() {
        let (r, l) = labeled(20, 2);
        let w = make_windows(&r, &l, 10, 2).unwrap();
        for win in &w {
            for q in 0..2 {
                assert_eq!(Some(win.first_label[q]), l[q][win.start_tick + 9]);
                assert_eq!(Some(win.y[0][q]), l[q][win.start_tick + 10]);
            }
        }
    }

    #[test]
    fn normalization_stats_come_from_train_only() {
        let (r, l) = labeled(40, 2);
        let all = make_windows(&r, &l, 10, 2).unwrap();
        let (mut train, mut eval) = {
            let mid = all.len() / 2;
            (all[..mid].to_vec(), all[mid..].to_vec())
        };
        let stats = normalize(&mut train, &mut eval).unwrap();

        // Train set is now standard per series.
        let series = 2;
        for q in 0..series {
            let vals: Vec<f64> = train
                .iter()
                .flat_map(|w| w.x.values().chunks(series).map(move |row| row[q]))
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-9, "train mean {mean}");
            assert!((var - 1.0).abs() < 1e-9, "train var {var}");
        }

        // Eval used the train stats, so it is generally not standard.
        let vals: Vec<f64> = eval
            .iter()
            .flat_map(|w| w.x.values().chunks(series).map(move |row| row[0]))
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() > 1e-12, "eval mean should differ from zero");
        assert!(stats.sigma.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn constant_train_series_errors() {
        let returns = vec![vec![0.01; 20]];
        let labels: Vec<Vec<Option<usize>>> = vec![vec![Some(2); 20]];
        let mut train = make_windows(&returns, &labels, 10, 2).unwrap();
        assert!(normalize(&mut train, &mut []).is_err());
    }
}
