//! Complex numbers stored as (log-magnitude, phase).
//!
//! Quantities of size `e^{±c/h}` are carried this way and only ratios are
//! exponentiated.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_mag: f64,
    pub phase: f64,
}

impl LogComplex {
    pub const ZERO: Self = Self { log_mag: f64::NEG_INFINITY, phase: 0.0 };

    pub fn new(log_mag: f64, phase: f64) -> Self {
        Self { log_mag, phase }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z == Complex64::new(0.0, 0.0) {
            Self::ZERO
        } else {
            Self { log_mag: z.norm().ln(), phase: z.arg() }
        }
    }

    /// `z·e^{shift}` for a complex `z` that was computed at a shifted scale.
    pub fn from_scaled(z: Complex64, shift: f64) -> Self {
        let mut l = Self::from_complex(z);
        l.log_mag += shift;
        l
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(self.log_mag.exp(), self.phase)
        }
    }

    /// Value times `e^{−shift}`, as an ordinary complex number.
    pub fn to_complex_scaled(&self, shift: f64) -> Complex64 {
        if self.is_zero() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar((self.log_mag - shift).exp(), self.phase)
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { log_mag: self.log_mag + other.log_mag, phase: self.phase + other.phase }
    }

    pub fn div(&self, other: &Self) -> Self {
        Self { log_mag: self.log_mag - other.log_mag, phase: self.phase - other.phase }
    }

    pub fn conj(&self) -> Self {
        Self { log_mag: self.log_mag, phase: -self.phase }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let m = self.log_mag.max(other.log_mag);
        let s = self.to_complex_scaled(m) + other.to_complex_scaled(m);
        Self::from_scaled(s, m)
    }

    /// Log of |z|².
    pub fn log_norm_sqr(&self) -> f64 {
        2.0 * self.log_mag
    }
}

/// Streaming sum of complex terms given in log form.
#[derive(Clone, Copy, Debug)]
pub struct LogSum {
    shift: f64,
    acc: Complex64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self { shift: f64::NEG_INFINITY, acc: Complex64::new(0.0, 0.0) }
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, term: LogComplex) {
        if term.is_zero() {
            return;
        }
        if term.log_mag > self.shift {
            if self.shift.is_finite() {
                self.acc *= (self.shift - term.log_mag).exp();
            }
            self.shift = term.log_mag;
        }
        self.acc += term.to_complex_scaled(self.shift);
    }

    /// Add a positive real term `e^{log_value}`.
    pub fn push_real_log(&mut self, log_value: f64) {
        self.push(LogComplex::new(log_value, 0.0));
    }

    pub fn value(&self) -> LogComplex {
        if !self.shift.is_finite() {
            LogComplex::ZERO
        } else {
            LogComplex::from_scaled(self.acc, self.shift)
        }
    }
}

/// `ln Σ e^{v_i}` computed stably.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let z = Complex64::new(-3.0, 4.0);
        let l = LogComplex::from_complex(z);
        assert!((l.to_complex() - z).norm() < 1e-14);
        assert!(LogComplex::from_complex(Complex64::new(0.0, 0.0)).is_zero());
    }

    #[test]
    fn huge_magnitudes_add() {
        let a = LogComplex::new(1000.0, 0.0);
        let b = LogComplex::new(1000.0 + 2f64.ln(), 0.0);
        let s = a.add(&b);
        assert!((s.log_mag - (1000.0 + 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn streaming_sum_matches_direct() {
        let terms = [1.5, -0.25, 7.0, 2.0];
        let mut acc = LogSum::new();
        for t in terms {
            acc.push(LogComplex::from_complex(Complex64::new(t, 0.5 * t)));
        }
        let direct: Complex64 = terms.iter().map(|t| Complex64::new(*t, 0.5 * t)).sum();
        assert!((acc.value().to_complex() - direct).norm() < 1e-13);
    }

    #[test]
    fn lse() {
        let v = [800.0, 800.0];
        assert!((log_sum_exp(&v) - (800.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
