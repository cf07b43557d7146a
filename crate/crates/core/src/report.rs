//! Aggregate reports: RDS histograms, week-over-week trends and score correlation.
//!
//! Bins split `[0, 1]` into equal-width intervals that include their lower edge
//! and exclude their upper edge, except the last bin which also holds 1.0.
//! Every JSON report carries a `schema_version`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metrics::{pearson, RdsResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Below this absolute Pearson r the relationship is reported as low.
pub const LOW_CORRELATION: f64 = 0.5;

fn bin_count(bin_width: f64) -> Result<usize> {
    if !(bin_width.is_finite() && bin_width > 0.0 && bin_width <= 1.0) {
        return Err(invalid(format!("bin width {bin_width} must be in (0, 1]")));
    }
    let n = (1.0 / bin_width).round();
    if (n * bin_width - 1.0).abs() > 1e-9 {
        return Err(invalid(format!(
            "bin width {bin_width} does not divide [0, 1]"
        )));
    }
    Ok(n as usize)
}

fn edge(i: usize, n_bins: usize) -> f64 {
    i as f64 / n_bins as f64
}

/// Bin of `value` in `n_bins` equal bins over `[0, 1]`.
pub fn bin_index(value: f64, n_bins: usize) -> usize {
    let mut idx = ((value * n_bins as f64).floor() as usize).min(n_bins - 1);
    // Settle float rounding against the exact edges i / n.
    while idx + 1 < n_bins && value >= edge(idx + 1, n_bins) {
        idx += 1;
    }
    while idx > 0 && value < edge(idx, n_bins) {
        idx -= 1;
    }
    idx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub week: Option<NaiveDate>,
    pub bin_width: f64,
    pub bins: Vec<Bin>,
    pub total: u64,
    /// Mean of the binned values.
    pub mean: f64,
    /// Population standard deviation of the binned values.
    pub std: f64,
}

impl HistogramReport {
    pub fn rate(&self, bin: usize) -> f64 {
        self.bins[bin].rate
    }

    /// `bin_lo,bin_hi,count,rate`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,rate\n");
        for b in &self.bins {
            out.push_str(&format!("{},{},{},{}\n", b.lo, b.hi, b.count, b.rate));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema_version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }
}

/// Streaming histogram accumulator.
#[derive(Clone, Debug)]
pub struct HistogramBuilder {
    bin_width: f64,
    counts: Vec<u64>,
    total: u64,
    mean: f64,
    m2: f64,
    week: Option<NaiveDate>,
}

impl HistogramBuilder {
    pub fn new(bin_width: f64) -> Result<Self> {
        let n = bin_count(bin_width)?;
        Ok(Self {
            bin_width,
            counts: vec![0; n],
            total: 0,
            mean: 0.0,
            m2: 0.0,
            week: None,
        })
    }

    pub fn with_week(mut self, week: Option<NaiveDate>) -> Self {
        self.week = week;
        self
    }

    pub fn push(&mut self, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(invalid(format!("value {value} outside [0, 1]")));
        }
        let idx = bin_index(value, self.counts.len());
        self.counts[idx] += 1;
        self.total += 1;
        let delta = value - self.mean;
        self.mean += delta / self.total as f64;
        self.m2 += delta * (value - self.mean);
        Ok(())
    }

    pub fn finish(self) -> HistogramReport {
        let n = self.counts.len();
        let bins = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &count)| Bin {
                lo: edge(i, n),
                hi: edge(i + 1, n),
                count,
                rate: if self.total == 0 {
                    0.0
                } else {
                    count as f64 / self.total as f64
                },
            })
            .collect();
        let std = if self.total == 0 {
            0.0
        } else {
            (self.m2 / self.total as f64).max(0.0).sqrt()
        };
        HistogramReport {
            schema_version: SCHEMA_VERSION,
            week: self.week,
            bin_width: self.bin_width,
            bins,
            total: self.total,
            mean: self.mean,
            std,
        }
    }
}

/// Histogram of normalized values in `[0, 1]`.
pub fn histogram_values(values: &[f64], bin_width: f64) -> Result<HistogramReport> {
    let mut b = HistogramBuilder::new(bin_width)?;
    for &v in values {
        b.push(v)?;
    }
    Ok(b.finish())
}

/// Histogram of normalized RDS.
pub fn histogram(results: &[RdsResult], bin_width: f64) -> Result<HistogramReport> {
    let values: Vec<f64> = results.iter().map(|r| r.normalized).collect();
    histogram_values(&values, bin_width)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendBin {
    pub lo: f64,
    pub hi: f64,
    /// Rate in each week, aligned with [`TrendReport::weeks`].
    pub rates: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub schema_version: u32,
    pub weeks: Vec<NaiveDate>,
    pub bins: Vec<TrendBin>,
}

impl TrendReport {
    pub fn max_std(&self) -> f64 {
        self.bins.iter().map(|b| b.std).fold(0.0, f64::max)
    }

    /// `bin_lo,bin_hi,<week>...,mean,std`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi");
        for w in &self.weeks {
            out.push_str(&format!(",{w}"));
        }
        out.push_str(",mean,std\n");
        for b in &self.bins {
            out.push_str(&format!("{},{}", b.lo, b.hi));
            for r in &b.rates {
                out.push_str(&format!(",{r}"));
            }
            out.push_str(&format!(",{},{}\n", b.mean, b.std));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Mean and population standard deviation. Equal inputs give exactly zero spread.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let shift = xs[0];
    let mean = shift + xs.iter().map(|x| x - shift).sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-bin mean and population STD of rates across weekly histograms.
///
/// Every report must carry a distinct week and share the same binning.
pub fn trend(weekly: &[HistogramReport]) -> Result<TrendReport> {
    if weekly.len() < 2 {
        return Err(invalid("trend needs at least two weekly reports"));
    }
    let mut reports: Vec<&HistogramReport> = weekly.iter().collect();
    if reports.iter().any(|r| r.week.is_none()) {
        return Err(invalid("every weekly report needs a week"));
    }
    reports.sort_by_key(|r| r.week);
    if reports.windows(2).any(|w| w[0].week == w[1].week) {
        return Err(invalid("duplicate week in trend input"));
    }
    let first = reports[0];
    for r in &reports[1..] {
        if r.bins.len() != first.bins.len() || (r.bin_width - first.bin_width).abs() > 1e-12 {
            return Err(invalid("weekly reports use different binning"));
        }
    }
    let bins = (0..first.bins.len())
        .map(|i| {
            let rates: Vec<f64> = reports.iter().map(|r| r.bins[i].rate).collect();
            let (mean, std) = mean_std(&rates);
            TrendBin {
                lo: first.bins[i].lo,
                hi: first.bins[i].hi,
                rates,
                mean,
                std,
            }
        })
        .collect();
    Ok(TrendReport {
        schema_version: SCHEMA_VERSION,
        weeks: reports.iter().map(|r| r.week.unwrap()).collect(),
        bins,
    })
}

/// Pearson correlation between similarity scores and normalized RDS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub schema_version: u32,
    pub n: usize,
    /// `None` when the input is degenerate (too short or constant).
    pub r: Option<f64>,
    pub p_value: Option<f64>,
    /// `|r| < 0.5`.
    pub low_correlation: Option<bool>,
}

impl CorrelationReport {
    pub fn is_defined(&self) -> bool {
        self.r.is_some()
    }

    /// `n,r,p_value,low_correlation`, with empty fields when undefined.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "n,r,p_value,low_correlation\n{},{},{},{}\n",
            self.n,
            opt(self.r.map(|v| v.to_string())),
            opt(self.p_value.map(|v| v.to_string())),
            opt(self.low_correlation.map(|v| v.to_string())),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Correlates `(sim_score, normalized_rds)` pairs.
pub fn correlate(pairs: &[(f64, f64)]) -> CorrelationReport {
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    match pearson(&xs, &ys) {
        Ok(p) => CorrelationReport {
            schema_version: SCHEMA_VERSION,
            n: pairs.len(),
            r: Some(p.r),
            p_value: Some(p.p_value),
            low_correlation: Some(p.r.abs() < LOW_CORRELATION),
        },
        Err(_) => CorrelationReport {
            schema_version: SCHEMA_VERSION,
            n: pairs.len(),
            r: None,
            p_value: None,
            low_correlation: None,
        },
    }
}
