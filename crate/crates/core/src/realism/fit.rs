//! Maximum-likelihood fits and Kolmogorov-Smirnov distances.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Exp, Gamma, LogNormal, Weibull};
use statrs::function::gamma::digamma;
use std::collections::BTreeMap;
use thiserror::Error;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples must be positive and finite")]
    NonPositive,
    #[error("degenerate sample: zero variance")]
    Degenerate,
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub distribution: String,
    pub parameters: BTreeMap<String, f64>,
    /// Kolmogorov-Smirnov distance between the sample and the fit.
    pub ks_distance: f64,
    pub samples: usize,
}

impl FitReport {
    pub fn param(&self, name: &str) -> f64 {
        self.parameters.get(name).copied().unwrap_or(f64::NAN)
    }
}

fn report(name: &str, params: &[(&str, f64)], ks: f64, n: usize) -> FitReport {
    FitReport {
        distribution: name.into(),
        parameters: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        ks_distance: ks,
        samples: n,
    }
}

fn check_positive(x: &[f64], needed: usize) -> Result<(), FitError> {
    if x.len() < needed {
        return Err(FitError::TooFewSamples { needed, got: x.len() });
    }
    if x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(FitError::NonPositive);
    }
    Ok(())
}

/// `sup |F_n(x) - F(x)|`; independent of sample order.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d.clamp(0.0, 1.0)
}

/// psi'(x) by recurrence up to x >= 20 and the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x + x2 / 2.0 + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0)))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Gamma(shape k, scale theta) by Newton iteration on
/// `ln k - psi(k) = ln(mean) - mean(ln x)`, started from the moment estimate.
pub fn fit_gamma(x: &[f64]) -> Result<FitReport, FitError> {
    check_positive(x, 2)?;
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
    if var <= 0.0 {
        return Err(FitError::Degenerate);
    }
    let s = m.ln() - mean(&x.iter().map(|v| v.ln()).collect::<Vec<_>>());
    if s <= 0.0 {
        return Err(FitError::Degenerate);
    }
    let mut k = m * m / var;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let f = k.ln() - digamma(k) - s;
        let df = 1.0 / k - trigamma(k);
        let mut next = k - f / df;
        if next <= 0.0 {
            next = k / 2.0;
        }
        let done = (next - k).abs() <= TOLERANCE * k.max(1.0);
        k = next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged || !k.is_finite() {
        return Err(FitError::NoConvergence("gamma shape"));
    }
    let theta = m / k;
    let dist = Gamma::new(k, 1.0 / theta).map_err(|_| FitError::NoConvergence("gamma shape"))?;
    Ok(report("gamma", &[("shape", k), ("scale", theta)], ks_distance(x, |v| dist.cdf(v)), x.len()))
}

/// Log-normal from the mean and (population) standard deviation of `ln x`.
pub fn fit_lognormal(x: &[f64]) -> Result<FitReport, FitError> {
    check_positive(x, 2)?;
    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mu = mean(&logs);
    let sigma = (logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    if sigma <= 0.0 {
        return Err(FitError::Degenerate);
    }
    let dist = LogNormal::new(mu, sigma).map_err(|_| FitError::Degenerate)?;
    Ok(report("lognormal", &[("mu", mu), ("sigma", sigma)], ks_distance(x, |v| dist.cdf(v)), x.len()))
}

/// Exponential with rate `1 / mean`.
pub fn fit_exponential(x: &[f64]) -> Result<FitReport, FitError> {
    check_positive(x, 1)?;
    let rate = 1.0 / mean(x);
    let dist = Exp::new(rate).map_err(|_| FitError::NonPositive)?;
    Ok(report("exponential", &[("rate", rate)], ks_distance(x, |v| dist.cdf(v)), x.len()))
}

/// Weibull(shape k, scale lambda) by Newton iteration on the profile
/// likelihood equation `sum x^k ln x / sum x^k - 1/k - mean(ln x) = 0`.
pub fn fit_weibull(x: &[f64]) -> Result<FitReport, FitError> {
    check_positive(x, 2)?;
    // The shape is scale-free; work on x / max for numerical range.
    let top = x.iter().copied().fold(0.0, f64::max);
    let y: Vec<f64> = x.iter().map(|v| v / top).collect();
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mean_log = mean(&logs);
    let sd_log = (logs.iter().map(|l| (l - mean_log).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    if sd_log <= 0.0 {
        return Err(FitError::Degenerate);
    }
    let mut k = 1.2825 / sd_log;
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for (v, l) in y.iter().zip(&logs) {
            let p = v.powf(k);
            a += p;
            b += p * l;
            c += p * l * l;
        }
        let g = b / a - 1.0 / k - mean_log;
        let dg = (c * a - b * b) / (a * a) + 1.0 / (k * k);
        let mut next = k - g / dg;
        if next <= 0.0 {
            next = k / 2.0;
        }
        let done = (next - k).abs() <= TOLERANCE * k.max(1.0);
        k = next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged || !k.is_finite() {
        return Err(FitError::NoConvergence("weibull shape"));
    }
    let scale = top * mean(&y.iter().map(|v| v.powf(k)).collect::<Vec<_>>()).powf(1.0 / k);
    let dist = Weibull::new(k, scale).map_err(|_| FitError::NoConvergence("weibull shape"))?;
    Ok(report("weibull", &[("shape", k), ("scale", scale)], ks_distance(x, |v| dist.cdf(v)), x.len()))
}
