use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::domain::ProbEstimate;

/// `successes` out of `trials` as a probability with binomial sd.
pub fn empirical_prob(successes: u64, trials: u64) -> Result<ProbEstimate, AnalyticsError> {
    if trials == 0 {
        return Err(AnalyticsError::EmptySample);
    }
    if successes > trials {
        return Err(AnalyticsError::InvalidCounts { successes, trials });
    }
    Ok(ProbEstimate::from_counts(successes, trials).expect("checked"))
}

/// How a difference of two probabilities is turned into sd units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdUnitsPolicy {
    /// (a - b) / sqrt(sd_a^2 + sd_b^2).
    #[default]
    Quadrature,
    /// Two-proportion z with the pooled proportion; both sides need counts.
    Pooled,
}

impl SdUnitsPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SdUnitsPolicy::Quadrature => "quadrature",
            SdUnitsPolicy::Pooled => "pooled_two_proportion",
        }
    }
}

/// Difference `a - b` in standard deviation units under the default policy.
pub fn sd_units(a: &ProbEstimate, b: &ProbEstimate) -> Result<f64, AnalyticsError> {
    sd_units_with(SdUnitsPolicy::Quadrature, a, b)
}

pub fn sd_units_with(policy: SdUnitsPolicy, a: &ProbEstimate, b: &ProbEstimate) -> Result<f64, AnalyticsError> {
    let diff = a.p - b.p;
    let sd = match policy {
        SdUnitsPolicy::Quadrature => a.sd.hypot(b.sd),
        SdUnitsPolicy::Pooled => {
            if a.n == 0 || b.n == 0 {
                return Err(AnalyticsError::EmptySample);
            }
            let (na, nb) = (a.n as f64, b.n as f64);
            let pooled = (a.p * na + b.p * nb) / (na + nb);
            (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt()
        }
    };
    if sd == 0.0 {
        if diff == 0.0 {
            return Ok(0.0);
        }
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok(diff / sd)
}

/// Type-7 quantile (linear interpolation between order statistics) of
/// already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub n: usize,
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        q1: quantile_sorted(&v, 0.25)?,
        q2: quantile_sorted(&v, 0.5)?,
        q3: quantile_sorted(&v, 0.75)?,
        n: v.len(),
    })
}

/// Ordinary least squares fit of y on x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub n: usize,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit, AnalyticsError> {
    assert_eq!(x.len(), y.len(), "x and y must have equal length");
    let n = x.len();
    if n < 3 {
        return Err(AnalyticsError::EmptySample);
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalyticsError::ZeroVariance);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (ssr / (nf - 2.0) / sxx).sqrt(),
        n,
    })
}
