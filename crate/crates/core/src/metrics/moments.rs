use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Population moments of a multiset. Skewness and excess kurtosis are
/// `None` when the variance is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

impl MomentSummary {
    /// Mean, median, variance, skewness, kurtosis in that order.
    pub fn as_array(&self) -> [Option<f64>; 5] {
        [Some(self.mean), Some(self.median), Some(self.variance), self.skewness, self.kurtosis]
    }
}

pub fn moment_summary(values: &[f64]) -> Result<MomentSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { (sorted[mid - 1] + sorted[mid]) / 2.0 };

    // spread below rounding noise of the mean counts as constant input
    let degenerate = m2 <= (mean.abs() * 1e-13).powi(2);
    let (skewness, kurtosis) = if degenerate {
        (None, None)
    } else {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    };
    Ok(MomentSummary { mean, median, variance: if degenerate { 0.0 } else { m2 }, skewness, kurtosis })
}

/// `(M(R) − M(H)) / M(H) · 100`, undefined when `M(H)` is zero or either
/// side is undefined.
pub fn percent_delta(history: Option<f64>, recommended: Option<f64>) -> Option<f64> {
    match (history, recommended) {
        (Some(h), Some(r)) if h != 0.0 => Some((r - h) / h * 100.0),
        _ => None,
    }
}
