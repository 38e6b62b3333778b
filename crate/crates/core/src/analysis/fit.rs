//! Maximum-likelihood fits with the location parameter fixed at 0.

use serde::{Deserialize, Serialize};

use super::special::{digamma, ln_gamma, trigamma};
use super::AnalysisError;

pub const GAMMA_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gamma,
    Lognormal,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gamma => "gamma",
            Family::Lognormal => "lognormal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub shape: f64,
    pub scale: f64,
    pub log_likelihood: f64,
    pub n: usize,
    /// Zero-variance sample; the log-likelihood is then `+inf`.
    pub degenerate: bool,
    /// False when the gamma Newton iteration did not converge and the
    /// method-of-moments estimate was returned instead.
    pub converged: bool,
}

fn check_samples(samples: &[f64]) -> Result<(), AnalysisError> {
    if samples.len() < 2 {
        return Err(AnalysisError::TooFewSamples { n: samples.len() });
    }
    for (index, &value) in samples.iter().enumerate() {
        if !value.is_finite() {
            return Err(AnalysisError::NonFinite { index });
        }
        if value <= 0.0 {
            return Err(AnalysisError::NonPositive { index, value });
        }
    }
    Ok(())
}

/// Log-likelihood of a lognormal with log-mean `ln(scale)` and log-sd `shape`.
pub fn lognormal_log_likelihood(samples: &[f64], shape: f64, scale: f64) -> f64 {
    let mu = scale.ln();
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    samples
        .iter()
        .map(|&x| {
            let z = (x.ln() - mu) / shape;
            -x.ln() - shape.ln() - half_ln_2pi - 0.5 * z * z
        })
        .sum()
}

pub fn gamma_log_likelihood(samples: &[f64], shape: f64, scale: f64) -> f64 {
    let norm = shape * scale.ln() + ln_gamma(shape);
    samples
        .iter()
        .map(|&x| (shape - 1.0) * x.ln() - x / scale - norm)
        .sum()
}

/// Closed-form lognormal MLE: `shape` is the population standard deviation of
/// the log-samples, `scale = exp(mean log)`.
pub fn fit_lognormal(samples: &[f64]) -> Result<FitResult, AnalysisError> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let mu = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / n;
    let shape = var.sqrt();
    let scale = mu.exp();
    let degenerate = shape == 0.0;
    let log_likelihood = if degenerate {
        f64::INFINITY
    } else {
        lognormal_log_likelihood(samples, shape, scale)
    };
    Ok(FitResult {
        family: Family::Lognormal,
        shape,
        scale,
        log_likelihood,
        n: samples.len(),
        degenerate,
        converged: true,
    })
}

/// Method-of-moments gamma estimate `(mean^2 / var, var / mean)`.
pub fn gamma_moments(samples: &[f64]) -> Result<(f64, f64), AnalysisError> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(AnalysisError::Degenerate("gamma fit of constant samples"));
    }
    Ok((mean * mean / var, var / mean))
}

/// Gamma MLE by Newton iteration on `ln k - psi(k) = ln(mean) - mean(ln x)`,
/// started from the method-of-moments shape.
pub fn fit_gamma(samples: &[f64]) -> Result<FitResult, AnalysisError> {
    let (k0, theta0) = gamma_moments(samples)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_log = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_log;

    let mut k = k0;
    let mut converged = false;
    if s > 0.0 {
        for _ in 0..GAMMA_MAX_ITER {
            let f = k.ln() - digamma(k) - s;
            let df = 1.0 / k - trigamma(k);
            let mut next = k - f / df;
            if !(next > 0.0) || !next.is_finite() {
                next = k / 2.0;
            }
            let done = (next - k).abs() <= 1e-12 * k;
            k = next;
            if done {
                converged = true;
                break;
            }
        }
    }
    let (shape, scale) = if converged {
        (k, mean / k)
    } else {
        log::warn!("gamma MLE did not converge; returning the method-of-moments estimate");
        (k0, theta0)
    };
    Ok(FitResult {
        family: Family::Gamma,
        shape,
        scale,
        log_likelihood: gamma_log_likelihood(samples, shape, scale),
        n: samples.len(),
        degenerate: false,
        converged,
    })
}

/// Adjusted Fisher-Pearson sample skewness.
pub fn sample_skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 3 {
        return f64::NAN;
    }
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let g1 = m3 / m2.powf(1.5);
    g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
}
