//! Learning-curve analytics over adjudicated trials: the per-trial success
//! series and a logistic regression of success on trial index.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::adjudicator::{CrossingOutcome, Verdict};
use crate::domain::DrivingStyle;
use crate::memory::{trials, Event};

pub const MAX_ITERATIONS: usize = 50;
pub const DEVIANCE_TOLERANCE: f64 = 1e-8;
/// Coefficient norm beyond which the fit is treated as diverging.
pub const SEPARATION_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("need at least 2 adjudicated trials, got {0}")]
    InsufficientData(usize),
    #[error("x has no spread; slope is not identifiable")]
    Singular,
}

/// One adjudicated trial in session order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPoint {
    /// 1-based position in the session.
    pub index: usize,
    pub trial_id: u32,
    pub style: DrivingStyle,
    pub success: bool,
    pub marginal: bool,
    pub tick: u64,
    pub cumulative_accuracy: f64,
}

pub fn accuracy_series(outcomes: &[CrossingOutcome]) -> Vec<TrialPoint> {
    let mut correct = 0usize;
    outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let success = o.verdict == Verdict::Correct;
            correct += success as usize;
            TrialPoint {
                index: i + 1,
                trial_id: o.trial_id,
                style: o.vehicle_style,
                success,
                marginal: o.marginal,
                tick: o.tick,
                cumulative_accuracy: correct as f64 / (i + 1) as f64,
            }
        })
        .collect()
}

/// Correct over total; 0 for an empty session.
pub fn accuracy(outcomes: &[CrossingOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.verdict == Verdict::Correct).count() as f64 / outcomes.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard errors and Wald p-value; absent when the data separate.
    pub se_intercept: Option<f64>,
    pub se_slope: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub deviance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Outcomes are perfectly separated by x; the estimates diverge and only
    /// the slope's sign is meaningful.
    pub separation: bool,
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn deviance(x: &[f64], y: &[bool], b: [f64; 2]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let mu = sigmoid(b[0] + b[1] * xi).clamp(1e-300, 1.0 - 1e-16);
            if yi {
                -2.0 * mu.ln()
            } else {
                -2.0 * (1.0 - mu).ln()
            }
        })
        .sum()
}

/// Whether some threshold on x splits successes from failures, allowing
/// ties at the threshold. A single-class sample counts as separated.
pub fn is_separable(x: &[f64], y: &[bool]) -> bool {
    let range = |want: bool| {
        x.iter()
            .zip(y)
            .filter(|(_, &yi)| yi == want)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&xi, _)| (lo.min(xi), hi.max(xi)))
    };
    let (s_lo, s_hi) = range(true);
    let (f_lo, f_hi) = range(false);
    if s_lo.is_infinite() || f_lo.is_infinite() {
        return true;
    }
    f_hi <= s_lo || s_hi <= f_lo
}

/// Maximum-likelihood fit of P(y) = logistic(b0 + b1 x) by iteratively
/// reweighted least squares.
pub fn fit_logistic(x: &[f64], y: &[bool]) -> Result<LogisticFit, AnalyticsError> {
    assert_eq!(x.len(), y.len(), "x and y must have equal length");
    if x.len() < 2 {
        return Err(AnalyticsError::InsufficientData(x.len()));
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return Err(AnalyticsError::Singular);
    }

    let mut b = [0.0f64; 2];
    let mut dev = deviance(x, y, b);
    let mut converged = false;
    let mut iterations = 0;
    let mut diverged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        // weighted normal equations X'WX b = X'Wz
        let (mut a00, mut a01, mut a11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let eta = b[0] + b[1] * xi;
            let mu = sigmoid(eta);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let z = eta + (yi as u8 as f64 - mu) / w;
            a00 += w;
            a01 += w * xi;
            a11 += w * xi * xi;
            r0 += w * z;
            r1 += w * z * xi;
        }
        let det = a00 * a11 - a01 * a01;
        if det.abs() < 1e-300 || !det.is_finite() {
            diverged = true;
            break;
        }
        let next = [(a11 * r0 - a01 * r1) / det, (a00 * r1 - a01 * r0) / det];
        if !next.iter().all(|v| v.is_finite()) {
            diverged = true;
            break;
        }
        b = next;
        let new_dev = deviance(x, y, b);
        let delta = (dev - new_dev).abs();
        dev = new_dev;
        if (b[0] * b[0] + b[1] * b[1]).sqrt() > SEPARATION_NORM {
            diverged = true;
            break;
        }
        if delta / (dev.abs() + 0.1) < DEVIANCE_TOLERANCE {
            converged = true;
            break;
        }
    }

    let separation = diverged || is_separable(x, y);
    let (se_intercept, se_slope, z, p_value) = if separation {
        (None, None, None, None)
    } else {
        // covariance is the inverse information at the final iterate
        let (mut a00, mut a01, mut a11) = (0.0, 0.0, 0.0);
        for &xi in x {
            let mu = sigmoid(b[0] + b[1] * xi);
            let w = mu * (1.0 - mu);
            a00 += w;
            a01 += w * xi;
            a11 += w * xi * xi;
        }
        let det = a00 * a11 - a01 * a01;
        let se0 = (a11 / det).sqrt();
        let se1 = (a00 / det).sqrt();
        let z = b[1] / se1;
        (Some(se0), Some(se1), Some(z), Some(erfc(z.abs() / std::f64::consts::SQRT_2)))
    };

    Ok(LogisticFit {
        intercept: b[0],
        slope: b[1],
        se_intercept,
        se_slope,
        z,
        p_value,
        deviance: dev,
        iterations,
        converged,
        separation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub series: Vec<TrialPoint>,
    pub accuracy: f64,
    pub fit: LogisticFit,
}

/// Success series and learning-curve fit for a journal.
pub fn export_analytics(events: &[Event]) -> Result<AnalyticsReport, AnalyticsError> {
    let outcomes = trials(events);
    let series = accuracy_series(&outcomes);
    let x: Vec<f64> = series.iter().map(|p| p.index as f64).collect();
    let y: Vec<bool> = series.iter().map(|p| p.success).collect();
    let fit = fit_logistic(&x, &y)?;
    Ok(AnalyticsReport {
        accuracy: accuracy(&outcomes),
        series,
        fit,
    })
}
