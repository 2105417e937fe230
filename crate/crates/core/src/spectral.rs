//! Lattice-mode eigenfunctions of the flat Laplacian and their holomorphic
//! continuation to the tube.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{TubePoint, TWO_PI};
use crate::logspace::{LogComplex, LogSum};

const SHELL_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: [i64; 2],
    pub c: Complex64,
}

impl Mode {
    pub fn new(k: &[i64], c: Complex64) -> Self {
        let mut kk = [0i64; 2];
        kk[..k.len()].copy_from_slice(k);
        Self { k: kk, c }
    }

    fn kf(&self, j: usize) -> f64 {
        self.k[j] as f64
    }
}

/// `u(x) = Σ c_k e^{i⟨k,x⟩}` with every `|k| = 1/h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSum {
    h: f64,
    dim: usize,
    terms: Vec<Mode>,
}

/// Which function a [`Jet`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weight {
    /// `u^ℂ`.
    Holomorphic,
    /// `e^{−ρ/h} u^ℂ`.
    Weighted,
}

/// Extension of `u` off the real points. Only `Holomorphic` is the true
/// continuation; `Anti` (`x + iξ`) and `Trivial` (constant in ξ) serve as
/// negative controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuation {
    Holomorphic,
    Anti,
    Trivial,
}

impl Continuation {
    fn sigma(self) -> f64 {
        match self {
            Continuation::Holomorphic => 1.0,
            Continuation::Anti => -1.0,
            Continuation::Trivial => 0.0,
        }
    }
}

/// Value, gradient and Hessian at a point in flattened coordinates
/// `(x_1..x_n, ξ_1..ξ_n)`. Every entry is stored times `e^{−shift}`.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub dim: usize,
    pub shift: f64,
    pub value: Complex64,
    pub grad: [Complex64; 4],
    pub hess: [[Complex64; 4]; 4],
}

impl Jet {
    pub fn value_log(&self) -> LogComplex {
        LogComplex::from_scaled(self.value, self.shift)
    }

    /// Directional derivative along a flattened vector.
    pub fn deriv(&self, v: &[f64]) -> Complex64 {
        (0..2 * self.dim).map(|i| self.grad[i] * v[i]).sum()
    }

    /// Second derivative `∇²f(v, w)`.
    pub fn hess_form(&self, v: &[f64], w: &[f64]) -> Complex64 {
        let m = 2 * self.dim;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                s += self.hess[i][j] * v[i] * w[j];
            }
        }
        s
    }

    pub fn laplacian(&self) -> Complex64 {
        (0..2 * self.dim).map(|i| self.hess[i][i]).sum()
    }

    /// Rescale so that entries are stored times `e^{−new_shift}`.
    pub fn rescaled(&self, new_shift: f64) -> Self {
        let f = (self.shift - new_shift).exp();
        let mut out = *self;
        out.shift = new_shift;
        out.value *= f;
        for i in 0..4 {
            out.grad[i] *= f;
            for j in 0..4 {
                out.hess[i][j] *= f;
            }
        }
        out
    }
}

impl ModeSum {
    pub fn new(h: f64, dim: usize, terms: Vec<Mode>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        if !(h > 0.0) {
            return Err(Error::Invalid(format!("h must be positive, got {h}")));
        }
        for m in &terms {
            let norm = lattice_norm(&m.k);
            if (norm * h - 1.0).abs() > SHELL_RTOL {
                return Err(Error::OffShell { k: m.k, norm, expected: 1.0 / h });
            }
        }
        Ok(Self { h, dim, terms })
    }

    /// A sum whose `h` is not tied to the lattice vectors. Only the heat-kernel
    /// quadrature makes sense for such sums.
    pub fn with_formal_h(h: f64, dim: usize, terms: Vec<Mode>) -> Self {
        Self { h, dim, terms }
    }

    /// `e^{i⟨k,x⟩}` with unit coefficient and `h = 1/|k|`.
    pub fn plane_wave(k: &[i64]) -> Self {
        let m = Mode::new(k, Complex64::new(1.0, 0.0));
        let h = 1.0 / lattice_norm(&m.k);
        Self { h, dim: k.len(), terms: vec![m] }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Mode] {
        &self.terms
    }

    /// `(2π)^n Σ|c|²`, the squared L² norm on the base.
    pub fn l2_norm_sqr(&self) -> f64 {
        TWO_PI.powi(self.dim as i32) * self.terms.iter().map(|m| m.c.norm_sqr()).sum::<f64>()
    }

    pub fn normalized(&self) -> Self {
        let s = self.l2_norm_sqr().sqrt();
        let mut out = self.clone();
        if s > 0.0 {
            for m in &mut out.terms {
                m.c /= s;
            }
        }
        out
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for m in &mut out.terms {
            m.c *= s;
        }
        out
    }

    fn kx(&self, m: &Mode, x: &[f64; 2]) -> f64 {
        (0..self.dim).map(|j| m.kf(j) * x[j]).sum()
    }

    fn kxi(&self, m: &Mode, xi: &[f64; 2]) -> f64 {
        (0..self.dim).map(|j| m.kf(j) * xi[j]).sum()
    }

    pub fn eval_u(&self, x: &[f64]) -> Complex64 {
        let mut xx = [0.0; 2];
        xx[..x.len()].copy_from_slice(x);
        self.terms.iter().map(|m| m.c * Complex64::cis(self.kx(m, &xx))).sum()
    }

    /// `u^ℂ(x − iξ)` in log form; never overflows.
    pub fn eval_u_complex_log(&self, p: &TubePoint) -> LogComplex {
        let shift = self.terms.iter().map(|m| self.kxi(m, &p.xi)).fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return LogComplex::ZERO;
        }
        let s: Complex64 = self
            .terms
            .iter()
            .map(|m| m.c * Complex64::cis(self.kx(m, &p.x)) * (self.kxi(m, &p.xi) - shift).exp())
            .sum();
        LogComplex::from_scaled(s, shift)
    }

    pub fn eval_u_complex(&self, p: &TubePoint) -> Complex64 {
        self.eval_u_complex_log(p).to_complex()
    }

    /// Jet of `u^ℂ` or `e^{−ρ/h}u^ℂ` at `p`, stored relative to the largest term.
    pub fn jet(&self, p: &TubePoint, weight: Weight, cont: Continuation) -> Jet {
        let n = self.dim;
        let w = if weight == Weight::Weighted { 1.0 } else { 0.0 };
        let sigma = cont.sigma();
        let rho_term = w * 0.5 * p.xi_norm2() / self.h;
        let expo = |m: &Mode| sigma * self.kxi(m, &p.xi) - rho_term;
        let shift = self.terms.iter().map(expo).fold(f64::NEG_INFINITY, f64::max);
        let zero = Complex64::new(0.0, 0.0);
        let mut jet = Jet { dim: n, shift, value: zero, grad: [zero; 4], hess: [[zero; 4]; 4] };
        if !shift.is_finite() {
            jet.shift = 0.0;
            return jet;
        }
        for m in &self.terms {
            let t = m.c * Complex64::cis(self.kx(m, &p.x)) * (expo(m) - shift).exp();
            let mut g = [zero; 4];
            for j in 0..n {
                g[j] = Complex64::new(0.0, m.kf(j));
                g[n + j] = Complex64::new(sigma * m.kf(j) - w * p.xi[j] / self.h, 0.0);
            }
            jet.value += t;
            for a in 0..2 * n {
                jet.grad[a] += g[a] * t;
                for b in 0..2 * n {
                    jet.hess[a][b] += g[a] * g[b] * t;
                }
            }
            if w != 0.0 {
                for j in 0..n {
                    jet.hess[n + j][n + j] -= t / self.h;
                }
            }
        }
        jet
    }

    /// Partial derivative of `u^ℂ` (or `e^{−ρ/h}u^ℂ` when `weighted`) for a
    /// multi-index listing flattened coordinate slots, e.g. `[0, n]` for ∂_x∂_ξ.
    pub fn eval_derivative(&self, p: &TubePoint, alpha: &[usize], weighted: bool) -> Result<Complex64> {
        let weight = if weighted { Weight::Weighted } else { Weight::Holomorphic };
        let jet = self.jet(p, weight, Continuation::Holomorphic);
        let scaled = match alpha {
            [] => jet.value,
            [a] => jet.grad[*a],
            [a, b] => jet.hess[*a][*b],
            _ => return Err(Error::DerivativeOrder(alpha.len())),
        };
        Ok(LogComplex::from_scaled(scaled, jet.shift).to_complex())
    }

    /// `‖u‖²_{L²}` by the trapezoid rule on an `n_grid^n` grid.
    pub fn l2_norm_sqr_trapezoid(&self, n_grid: usize) -> f64 {
        let dx = TWO_PI / n_grid as f64;
        let mut acc = LogSum::new();
        let mut total = 0.0;
        match self.dim {
            1 => {
                for i in 0..n_grid {
                    total += self.eval_u(&[i as f64 * dx]).norm_sqr();
                }
                total * dx
            }
            _ => {
                for i in 0..n_grid {
                    for j in 0..n_grid {
                        let v = self.eval_u(&[i as f64 * dx, j as f64 * dx]).norm_sqr();
                        acc.push_real_log(v.ln());
                    }
                }
                acc.value().to_complex().re * dx * dx
            }
        }
    }
}

pub fn lattice_norm(k: &[i64; 2]) -> f64 {
    ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()
}

/// All lattice vectors with `|k|² = r2`, in a fixed order.
pub fn shell_points(dim: usize, r2: i64) -> Vec<[i64; 2]> {
    let mut out = Vec::new();
    if r2 < 0 {
        return out;
    }
    let r = (r2 as f64).sqrt().ceil() as i64 + 1;
    match dim {
        1 => {
            for a in -r..=r {
                if a * a == r2 {
                    out.push([a, 0]);
                }
            }
        }
        _ => {
            for a in -r..=r {
                for b in -r..=r {
                    if a * a + b * b == r2 {
                        out.push([a, b]);
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub dim: usize,
    pub r2: i64,
    pub draws: usize,
    pub seed: u64,
}

/// Random unit vectors of the coefficient space on a lattice shell.
///
/// Draw `j` uses its own ChaCha stream, so any subset of draws can be
/// regenerated independently.
pub fn make_shell_ensemble(spec: &EnsembleSpec) -> Result<Vec<ModeSum>> {
    if spec.dim != 1 && spec.dim != 2 {
        return Err(Error::Dimension(spec.dim));
    }
    let pts = shell_points(spec.dim, spec.r2);
    let needed = if spec.dim == 1 { 2 } else { 8 };
    if pts.len() < needed {
        return Err(Error::ShellTooThin { r2: spec.r2, dim: spec.dim, points: pts.len(), needed });
    }
    let h = 1.0 / (spec.r2 as f64).sqrt();
    let mut out = Vec::with_capacity(spec.draws);
    for draw in 0..spec.draws {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(draw as u64);
        let terms = pts
            .iter()
            .map(|k| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Mode { k: *k, c: Complex64::new(re, im) }
            })
            .collect();
        out.push(ModeSum { h, dim: spec.dim, terms }.normalized());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn circle_values() {
        let u = ModeSum::plane_wave(&[-1]);
        assert!((u.eval_u(&[0.0]) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((u.eval_u(&[PI / 2.0]) - c(0.0, -1.0)).norm() < 1e-15);
        let v = ModeSum::new(1.0, 1, vec![Mode::new(&[1], c(0.5, 0.0)), Mode::new(&[-1], c(0.5, 0.0))]).unwrap();
        assert!((v.eval_u(&[0.0]) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn continuation_values() {
        let u = ModeSum::plane_wave(&[-1]);
        let z = u.eval_u_complex(&TubePoint::circle(0.0, 0.7));
        assert!((z.norm() - (-0.7f64).exp()).abs() < 1e-15);
        let u = ModeSum::plane_wave(&[3, 4]);
        let z = u.eval_u_complex(&TubePoint::torus([0.0, 0.0], [0.1, 0.1]));
        assert!((z - c(0.7f64.exp(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn huge_continuation_is_finite_in_log_form() {
        let u = ModeSum::plane_wave(&[400, 0]);
        let l = u.eval_u_complex_log(&TubePoint::torus([0.3, 0.0], [1.9, 0.0]));
        assert!((l.log_mag - 760.0).abs() < 1e-10);
    }

    #[test]
    fn derivative_factors() {
        let u = ModeSum::plane_wave(&[-1]);
        let p = TubePoint::circle(0.4, -0.3);
        let v = u.eval_u_complex(&p);
        let dx = u.eval_derivative(&p, &[0], false).unwrap();
        let dxi = u.eval_derivative(&p, &[1], false).unwrap();
        let dxdxi = u.eval_derivative(&p, &[0, 1], false).unwrap();
        assert!((dx - c(0.0, -1.0) * v).norm() < 1e-14);
        assert!((dxi + v).norm() < 1e-14);
        assert!((dxdxi - c(0.0, 1.0) * v).norm() < 1e-14);
        assert!(u.eval_derivative(&p, &[0, 0, 1], false).is_err());
    }

    #[test]
    fn shell_enumeration() {
        let pts = shell_points(2, 25);
        assert_eq!(pts.len(), 12);
        assert!(pts.contains(&[-3, 4]) && pts.contains(&[5, 0]) && pts.contains(&[0, -5]));
        assert_eq!(shell_points(1, 1), vec![[-1, 0], [1, 0]]);
        let spec = EnsembleSpec { dim: 2, r2: 1, draws: 2, seed: 1 };
        assert!(matches!(make_shell_ensemble(&spec), Err(Error::ShellTooThin { .. })));
    }

    #[test]
    fn ensemble_is_deterministic_and_normalized() {
        let spec = EnsembleSpec { dim: 2, r2: 25, draws: 5, seed: 42 };
        let a = make_shell_ensemble(&spec).unwrap();
        let b = make_shell_ensemble(&spec).unwrap();
        assert_eq!(a, b);
        for u in &a {
            assert!((u.l2_norm_sqr() - 1.0).abs() < 1e-14);
            assert!((u.h() - 0.2).abs() < 1e-15);
        }
        assert_ne!(a[0], a[1]);
        let one = make_shell_ensemble(&EnsembleSpec { dim: 1, r2: 1, draws: 3, seed: 0 }).unwrap();
        assert_eq!(one[0].terms().len(), 2);
    }

    #[test]
    fn parseval_trapezoid() {
        let u = make_shell_ensemble(&EnsembleSpec { dim: 2, r2: 25, draws: 1, seed: 3 }).unwrap();
        assert!((u[0].l2_norm_sqr_trapezoid(16) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn off_shell_rejected() {
        assert!(ModeSum::new(0.2, 2, vec![Mode::new(&[3, 3], c(1.0, 0.0))]).is_err());
    }
}
