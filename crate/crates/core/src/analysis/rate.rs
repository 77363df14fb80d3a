//! Entanglement generation rate.

use super::{AnalysisError, Result};

/// `R = M p_h / (M/f + τ_ph + τ_c)` in Hz; times in seconds.
pub fn generation_rate(mode_number: usize, frequency: f64, p_h: f64, tau_ph: f64, tau_c: f64) -> Result<f64> {
    if mode_number == 0 {
        return Err(AnalysisError::InvalidParameter {
            name: "mode_number",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(AnalysisError::InvalidParameter {
            name: "frequency",
            value: frequency,
            reason: "must be positive",
        });
    }
    if !(0.0..=1.0).contains(&p_h) {
        return Err(AnalysisError::InvalidParameter {
            name: "p_h",
            value: p_h,
            reason: "must lie in [0, 1]",
        });
    }
    for (name, value) in [("tau_ph", tau_ph), ("tau_c", tau_c)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(AnalysisError::InvalidParameter {
                name,
                value,
                reason: "must be non-negative",
            });
        }
    }
    let m = mode_number as f64;
    Ok(m * p_h / (m / frequency + tau_ph + tau_c))
}

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(AnalysisError::NoSamples);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::RankDeficient);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}
