//! Synthetic multi-series price data, return labeling and window
//! construction.

mod dataset;
mod returns;
mod synthetic;
mod windows;

pub use dataset::{BetaSpec, Dataset};
pub use returns::{
    calibrate_beta, compute_returns, daily_stats, label_return, label_series, DailyStats,
    LabelingConfig,
};
pub use synthetic::{generate_synthetic, RegimeSegment, SyntheticConfig};
pub use windows::{make_windows, normalize, LabeledWindow, NormStats};

use crate::error::{CoreError, Result};

/// Raw price panel: `prices[q][t]`, all series equally long.
#[derive(Debug, Clone)]
pub struct PricePanel {
    pub prices: Vec<Vec<f64>>,
}

impl PricePanel {
    pub fn series(&self) -> usize {
        self.prices.len()
    }

    pub fn ticks(&self) -> usize {
        self.prices.first().map(Vec::len).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let ticks = self.ticks();
        for (q, s) in self.prices.iter().enumerate() {
            if s.len() != ticks {
                return Err(CoreError::data(format!(
                    "series {q} has {} ticks, expected {ticks}",
                    s.len()
                )));
            }
            if let Some(i) = s.iter().position(|p| !p.is_finite() || *p <= 0.0) {
                return Err(CoreError::data(format!(
                    "series {q} has a non-positive or non-finite price at tick {i}"
                )));
            }
        }
        Ok(())
    }

    /// Writes the `tick,series_0..series_{Q-1}` CSV.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        write!(w, "tick")?;
        for q in 0..self.series() {
            write!(w, ",series_{q}")?;
        }
        writeln!(w)?;
        for t in 0..self.ticks() {
            write!(w, "{t}")?;
            for q in 0..self.series() {
                write!(w, ",{}", self.prices[q][t])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`PricePanel::write_csv`].
    pub fn read_csv(r: impl std::io::BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| CoreError::data("empty dataset file"))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"tick") || cols.len() < 2 {
            return Err(CoreError::data(format!(
                "unexpected dataset header {header:?}"
            )));
        }
        let series = cols.len() - 1;
        let mut prices = vec![Vec::new(); series];
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != series + 1 {
                return Err(CoreError::data(format!(
                    "row {i} has {} fields, expected {}",
                    fields.len(),
                    series + 1
                )));
            }
            for q in 0..series {
                let v: f64 = fields[q + 1]
                    .parse()
                    .map_err(|e| CoreError::data(format!("row {i}, series {q}: {e}")))?;
                prices[q].push(v);
            }
        }
        let panel = PricePanel { prices };
        panel.validate()?;
        Ok(panel)
    }
}
