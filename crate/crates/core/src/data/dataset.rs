//! A labeled return panel ready for windowing.

use std::ops::Range;

use crate::error::{CoreError, Result};

use super::{calibrate_beta, compute_returns, daily_stats, label_series, PricePanel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSpec {
    Fixed(f64),
    /// Bisect beta so the middle class holds this fraction of the
    /// calibration span's labels.
    Calibrate { target: f64 },
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// `returns[q][t]`.
    pub returns: Vec<Vec<f64>>,
    /// `labels[q][t]`, `None` where no prior-day stats exist.
    pub labels: Vec<Vec<Option<usize>>>,
    pub beta: f64,
    pub ticks_per_day: usize,
}

impl Dataset {
    /// Computes returns and labels from prices. When calibrating, only
    /// ticks inside `calibration_span` feed the bisection (pass the
    /// first training span to avoid looking ahead).
    pub fn from_panel(
        panel: &PricePanel,
        ticks_per_day: usize,
        beta: BetaSpec,
        calibration_span: Option<Range<usize>>,
    ) -> Result<Self> {
        panel.validate()?;
        let returns: Vec<Vec<f64>> = panel
            .prices
            .iter()
            .map(|p| compute_returns(p))
            .collect::<Result<_>>()?;

        let beta = match beta {
            BetaSpec::Fixed(b) => {
                if !(0.0 < b && b < 1.0) {
                    return Err(CoreError::config(format!("beta must lie in (0, 1), got {b}")));
                }
                b
            }
            BetaSpec::Calibrate { target } => {
                let ticks = returns[0].len();
                let span = calibration_span.unwrap_or(0..ticks);
                if span.end > ticks || span.is_empty() {
                    return Err(CoreError::config(format!(
                        "calibration span {span:?} outside 0..{ticks}"
                    )));
                }
                let mut samples = Vec::new();
                for series in &returns {
                    let stats = daily_stats(series, ticks_per_day)?;
                    for t in span.clone() {
                        let day = t / ticks_per_day;
                        if day == 0 || day > stats.len() {
                            continue;
                        }
                        let s = stats[day - 1];
                        samples.push((series[t], s.mu, s.sigma));
                    }
                }
                calibrate_beta(&samples, target)?
            }
        };

        let labels = returns
            .iter()
            .map(|r| label_series(r, ticks_per_day, beta))
            .collect::<Result<_>>()?;

        Ok(Dataset {
            returns,
            labels,
            beta,
            ticks_per_day,
        })
    }

    pub fn series(&self) -> usize {
        self.returns.len()
    }

    pub fn ticks(&self) -> usize {
        self.returns.first().map(Vec::len).unwrap_or(0)
    }

    /// Per-series slices of a tick range, for window construction.
    pub fn slice(&self, range: Range<usize>) -> Result<(Vec<Vec<f64>>, Vec<Vec<Option<usize>>>)> {
        if range.end > self.ticks() {
            return Err(CoreError::data(format!(
                "slice {range:?} outside 0..{}",
                self.ticks()
            )));
        }
        let returns = self.returns.iter().map(|r| r[range.clone()].to_vec()).collect();
        let labels = self.labels.iter().map(|l| l[range.clone()].to_vec()).collect();
        Ok((returns, labels))
    }

    /// Fraction of labeled ticks per class, pooled over series; a
    /// diagnostic for the class balance the paper's band targets.
    pub fn class_masses(&self) -> [f64; 5] {
        let mut counts = [0u64; 5];
        let mut total = 0u64;
        for series in &self.labels {
            for l in series.iter().flatten() {
                counts[*l] += 1;
                total += 1;
            }
        }
        if total == 0 {
            return [0.0; 5];
        }
        counts.map(|c| c as f64 / total as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    #[test]
    fn calibrated_dataset_hits_target_middle_mass() {
        let cfg = SyntheticConfig {
            series: 3,
            days: 120,
            seed: 4,
            ..SyntheticConfig::default()
        };
        let panel = generate_synthetic(&cfg).unwrap();
        let ds = Dataset::from_panel(&panel, 78, BetaSpec::Calibrate { target: 0.5 }, None).unwrap();
        let masses = ds.class_masses();
        assert!(
            (masses[2] - 0.5).abs() < 0.02,
            "middle class mass {} after calibration",
            masses[2]
        );
        // Soft diagnostic: heavy tails put visible mass in the extreme
        // classes, unlike a Gaussian under the same rule.
        assert!(masses[0] > 0.005 && masses[4] > 0.005, "{masses:?}");
    }

    #[test]
    fn class_partition_is_total() {
        let cfg = SyntheticConfig {
            days: 30,
            seed: 9,
            ..SyntheticConfig::default()
        };
        let panel = generate_synthetic(&cfg).unwrap();
        let ds = Dataset::from_panel(&panel, 78, BetaSpec::Fixed(0.14), None).unwrap();
        let masses = ds.class_masses();
        let sum: f64 = masses.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}
