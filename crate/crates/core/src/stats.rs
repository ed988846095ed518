//! Order statistics and binomial estimates shared by the oracles and the
//! experiment harness.

use serde::Serialize;

/// Five-number summary. `None` entries fall on censored observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: Option<f64>,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub max: Option<f64>,
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of sorted data.
///
/// Censored observations (`None`) sort above every finite value; a quantile
/// whose interpolation touches one is `None`.
pub fn quantile_sorted(sorted: &[Option<f64>], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let a = sorted[lo]?;
    if lo == hi {
        return Some(a);
    }
    let b = sorted[hi]?;
    Some(a + (h - lo as f64) * (b - a))
}

pub fn sort_censored(values: &mut [Option<f64>]) {
    values.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
}

impl Quantiles {
    pub fn from_censored(values: &[Option<f64>]) -> Self {
        let mut v = values.to_vec();
        sort_censored(&mut v);
        Quantiles {
            min: quantile_sorted(&v, 0.0),
            q25: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q75: quantile_sorted(&v, 0.75),
            max: quantile_sorted(&v, 1.0),
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let v: Vec<Option<f64>> = values.iter().copied().map(Some).collect();
        Self::from_censored(&v)
    }
}

/// Frequency estimate of a Bernoulli mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl Estimate {
    pub fn from_successes(successes: usize, trials: usize) -> Self {
        let p = successes as f64 / trials as f64;
        Estimate {
            mean: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}
