use serde::{Deserialize, Serialize};

use super::HarnessError;

/// How curves from several seeds are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Median,
    Best,
}

impl Aggregate {
    pub fn combine(self, values: &[f64]) -> f64 {
        match self {
            Aggregate::Median => median(values),
            Aggregate::Best => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Median; the mean of the two middle values for even lengths. Infinite
/// entries are allowed and sort last. NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 || v[m - 1] == v[m] {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

pub fn normalize_trajectories(trajectories: &[Vec<f64>], baseline_value: f64) -> Result<Vec<Vec<f64>>, HarnessError> {
    if !(baseline_value > 0.0 && baseline_value.is_finite()) {
        return Err(HarnessError::InvalidState(format!(
            "baseline value must be positive, got {baseline_value}"
        )));
    }
    Ok(trajectories
        .iter()
        .map(|t| t.iter().map(|v| v / baseline_value).collect())
        .collect())
}

/// First iteration whose normalized value reaches `theta`.
pub fn first_crossing(normalized: &[f64], theta: f64) -> Option<usize> {
    normalized.iter().position(|v| *v >= theta)
}
