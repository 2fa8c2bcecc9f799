//! Returns, five-class labeling against previous-day statistics, and
//! width calibration.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelingConfig {
    /// Width of the insignificant-movement band in prior-day sigmas.
    pub beta: f64,
    pub classes: usize,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig {
            beta: 0.14,
            classes: 5,
        }
    }
}

impl LabelingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.beta && self.beta < 1.0) {
            return Err(CoreError::config(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if self.classes != 5 {
            return Err(CoreError::config("labeling uses exactly five classes"));
        }
        Ok(())
    }
}

/// Mean and standard deviation of one day's returns, applied to the
/// following day's labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyStats {
    pub mu: f64,
    pub sigma: f64,
}

/// Simple returns `p[t] / p[t-1] - 1`; one shorter than the input.
pub fn compute_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(CoreError::data(format!(
            "need at least two prices, got {}",
            prices.len()
        )));
    }
    let mut out = Vec::with_capacity(prices.len() - 1);
    for w in prices.windows(2) {
        if w[0] <= 0.0 || w[1] <= 0.0 {
            return Err(CoreError::data("non-positive price in return computation"));
        }
        out.push(w[1] / w[0] - 1.0);
    }
    Ok(out)
}

/// Class in 0..=4 for a return against prior-day stats:
/// 0 large down, 1 small down, 2 insignificant, 3 small up, 4 large up.
pub fn label_return(x: f64, mu: f64, sigma: f64, beta: f64) -> Result<usize> {
    if sigma <= 0.0 {
        return Err(CoreError::data(format!(
            "degenerate day: sigma = {sigma} cannot label returns"
        )));
    }
    Ok(if x < mu - sigma {
        0
    } else if x < mu - beta * sigma {
        1
    } else if x < mu + beta * sigma {
        2
    } else if x < mu + sigma {
        3
    } else {
        4
    })
}

/// Population mean/std of the returns of each whole day, in day order.
/// A trailing partial day is ignored.
pub fn daily_stats(returns: &[f64], ticks_per_day: usize) -> Result<Vec<DailyStats>> {
    if ticks_per_day == 0 {
        return Err(CoreError::config("ticks_per_day must be positive"));
    }
    let days = returns.len() / ticks_per_day;
    let mut out = Vec::with_capacity(days);
    for d in 0..days {
        let chunk = &returns[d * ticks_per_day..(d + 1) * ticks_per_day];
        let n = chunk.len() as f64;
        let mu = chunk.iter().sum::<f64>() / n;
        let var = chunk.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
        out.push(DailyStats {
            mu,
            sigma: var.sqrt(),
        });
    }
    Ok(out)
}

/// Labels each return with its class, or `None` while no prior-day
/// stats exist (the whole first day, and any trailing partial day
/// beyond the last full prior day).
pub fn label_series(
    returns: &[f64],
    ticks_per_day: usize,
    beta: f64,
) -> Result<Vec<Option<usize>>> {
    let stats = daily_stats(returns, ticks_per_day)?;
    let mut labels = Vec::with_capacity(returns.len());
    for (t, &x) in returns.iter().enumerate() {
        let day = t / ticks_per_day;
        if day == 0 || day > stats.len() {
            labels.push(None);
            continue;
        }
        let s = stats[day - 1];
        labels.push(Some(label_return(x, s.mu, s.sigma, beta)?));
    }
    Ok(labels)
}

/// Bisects the band width until the middle class holds `target` of the
/// samples within half a percentage point, giving up after 50 rounds
/// and returning the midpoint reached. Samples are `(x, mu, sigma)`.
pub fn calibrate_beta(samples: &[(f64, f64, f64)], target: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(CoreError::data("cannot calibrate beta on zero samples"));
    }
    if !(0.0 < target && target < 1.0) {
        return Err(CoreError::config(format!(
            "target middle fraction must lie in (0, 1), got {target}"
        )));
    }
    let middle_fraction = |beta: f64| -> f64 {
        let hits = samples
            .iter()
            .filter(|(x, mu, sigma)| (mu - beta * sigma..mu + beta * sigma).contains(x))
            .count();
        hits as f64 / samples.len() as f64
    };

    let tolerance = 0.005;
    let mut lo = 0.0;
    let mut hi = 1.0;
    if middle_fraction(1.0 - 1e-12) + tolerance < target {
        return Err(CoreError::data(format!(
            "target {target} unattainable: even beta -> 1 reaches only {:.4}",
            middle_fraction(1.0 - 1e-12)
        )));
    }
    let mut beta = 0.5;
    for _ in 0..50 {
        beta = 0.5 * (lo + hi);
        let f = middle_fraction(beta);
        if (f - target).abs() <= tolerance {
            return Ok(beta);
        }
        if f < target {
            lo = beta;
        } else {
            hi = beta;
        }
    }
    Ok(beta)
}
