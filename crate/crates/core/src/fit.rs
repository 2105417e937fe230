//! Straight-line least squares for scaling experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Minimum number of points for a reported fit.
pub const MIN_POINTS: usize = 4;

/// A fit is accepted when its residual norm is below this fraction of the
/// range of the data.
pub const ACCEPT_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// 95% confidence interval for the slope.
    pub slope_ci: (f64, f64),
    pub r2: f64,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    pub data_range: f64,
    pub accepted: bool,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Invalid("x and y differ in length".into()));
    }
    let n = x.len();
    if n < MIN_POINTS {
        return Err(Error::FitPoints { needed: MIN_POINTS, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::FitDegenerate("non-finite data".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::FitDegenerate("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let s2 = sse / (nf - 2.0);
    let slope_stderr = (s2 / sxx).sqrt();
    let intercept_stderr = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0).map_err(|e| Error::FitDegenerate(e.to_string()))?.inverse_cdf(0.975);
    let residual_norm = sse.sqrt();
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let data_range = hi - lo;
    let accepted = if data_range > 0.0 { residual_norm < ACCEPT_FRACTION * data_range } else { residual_norm < 1e-12 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        slope_ci: (slope - t * slope_stderr, slope + t * slope_stderr),
        r2,
        residuals,
        residual_norm,
        data_range,
        accepted,
    })
}

/// Fit `log q ≈ a + s·log h`; all values must be positive.
pub fn fit_loglog(h: &[f64], q: &[f64]) -> Result<LinearFit> {
    if h.iter().chain(q).any(|v| !(*v > 0.0)) {
        return Err(Error::FitDegenerate("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = q.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14 && f.accepted);
        assert!(f.slope_ci.0 <= f.slope && f.slope <= f.slope_ci.1);
    }

    #[test]
    fn power_law() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let q: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powf(0.5)).collect();
        let f = fit_loglog(&h, &q).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_and_degenerate() {
        assert!(matches!(fit_line(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Err(Error::FitPoints { .. })));
        assert!(matches!(fit_line(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]), Err(Error::FitDegenerate(_))));
        assert!(fit_loglog(&[0.1, 0.2, 0.3, 0.4], &[1.0, -1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn confidence_interval_matches_textbook() {
        // Residuals ±0.1 alternating around y = x on x = 1..6.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [1.1, 1.9, 3.1, 3.9, 5.1, 4.9 + 1.0];
        let f = fit_line(&x, &y).unwrap();
        let t = 2.7764451051977987;
        assert!(((f.slope_ci.1 - f.slope) - t * f.slope_stderr).abs() < 1e-9);
    }
}
