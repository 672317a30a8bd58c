use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Metric(format!(
            "{} actual values vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Metric("no values".into()));
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    if actual.contains(&0.0) {
        return Err(Error::Metric("MAPE is undefined when an actual value is 0".into()));
    }
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| ((a - p) / a).abs()).sum();
    Ok(100.0 * sum / actual.len() as f64)
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum();
    Ok(sum / actual.len() as f64)
}

/// Coefficient of determination. Not clamped: a predictor worse than the
/// mean scores below zero.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    if actual.len() < 2 {
        return Err(Error::Metric("R² needs at least two values".into()));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("R² is undefined for constant actual values".into()));
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Signed prediction errors (`predicted − actual`) in unit-width bins
/// centred on integers; bin `i` covers `[edges[i], edges[i+1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of_errors(errors: &[f64]) -> Self {
        if errors.is_empty() {
            return Histogram {
                edges: vec![],
                counts: vec![],
            };
        }
        let bin = |e: f64| (e + 0.5).floor() as i64;
        let lo = errors.iter().map(|&e| bin(e)).min().unwrap();
        let hi = errors.iter().map(|&e| bin(e)).max().unwrap();
        let mut counts = vec![0; (hi - lo + 1) as usize];
        for &e in errors {
            counts[(bin(e) - lo) as usize] += 1;
        }
        Histogram {
            edges: (lo..=hi + 1).map(|c| c as f64 - 0.5).collect(),
            counts,
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub mape: f64,
    pub mae: f64,
    pub r2: f64,
    pub histogram: Histogram,
    /// `(actual, predicted)` per test record.
    pub scatter: Vec<(f64, f64)>,
}

impl Metrics {
    pub fn compute(actual: &[f64], predicted: &[f64]) -> Result<Self> {
        let errors: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| p - a).collect();
        Ok(Metrics {
            n: actual.len(),
            mape: mape(actual, predicted)?,
            mae: mae(actual, predicted)?,
            r2: r_squared(actual, predicted)?,
            histogram: Histogram::of_errors(&errors),
            scatter: actual.iter().copied().zip(predicted.iter().copied()).collect(),
        })
    }
}
