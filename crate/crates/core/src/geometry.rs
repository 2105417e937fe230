//! Flat Grauert tube over the circle or the 2-torus.
//!
//! Points of the tube chart are pairs `(x, ξ)` with `x` periodic of period 2π
//! and `|ξ| < τ`. Tangent vectors are written in block form `(a; b)`, the first
//! block along `∂_x` and the second along `∂_ξ`.
//!
//! The complex coordinate is `z = x − iξ`. The complex structure used
//! throughout is the one for which `z` is holomorphic:
//! `J∂_x = −∂_ξ`, `J∂_ξ = ∂_x`, i.e. `J(a; b) = (b; −a)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Default tube radius.
pub const DEFAULT_TAU: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    dim: usize,
    tau: f64,
}

impl ManifoldModel {
    pub fn new(dim: usize, tau: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        if !(tau > 1.0) || !tau.is_finite() {
            return Err(Error::TubeRadius(tau));
        }
        Ok(Self { dim, tau })
    }

    pub fn circle() -> Self {
        Self { dim: 1, tau: DEFAULT_TAU }
    }

    pub fn torus() -> Self {
        Self { dim: 2, tau: DEFAULT_TAU }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Volume of the base manifold, (2π)^n.
    pub fn volume(&self) -> f64 {
        TWO_PI.powi(self.dim as i32)
    }

    pub fn contains(&self, p: &TubePoint) -> bool {
        p.dim == self.dim && p.xi_norm() < self.tau
    }
}

/// A point of the tube chart. Unused trailing slots are zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubePoint {
    pub dim: usize,
    pub x: [f64; 2],
    pub xi: [f64; 2],
}

impl TubePoint {
    pub fn new(x: &[f64], xi: &[f64]) -> Self {
        assert!(x.len() == xi.len() && (1..=2).contains(&x.len()), "TubePoint needs matching x, xi of length 1 or 2");
        let mut p = Self { dim: x.len(), x: [0.0; 2], xi: [0.0; 2] };
        p.x[..x.len()].copy_from_slice(x);
        p.xi[..xi.len()].copy_from_slice(xi);
        p
    }

    pub fn circle(x: f64, xi: f64) -> Self {
        Self { dim: 1, x: [x, 0.0], xi: [xi, 0.0] }
    }

    pub fn torus(x: [f64; 2], xi: [f64; 2]) -> Self {
        Self { dim: 2, x, xi }
    }

    pub fn xi_norm2(&self) -> f64 {
        self.xi[0] * self.xi[0] + self.xi[1] * self.xi[1]
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi_norm2().sqrt()
    }

    /// The point displaced by `t·v`, without wrapping `x`.
    pub fn shifted(&self, v: &TangentVector, t: f64) -> Self {
        let mut q = *self;
        for j in 0..self.dim {
            q.x[j] += t * v.dx[j];
            q.xi[j] += t * v.dxi[j];
        }
        q
    }
}

/// A tangent vector of the chart, `(dx; dxi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub dim: usize,
    pub dx: [f64; 2],
    pub dxi: [f64; 2],
}

impl TangentVector {
    pub fn zero(dim: usize) -> Self {
        Self { dim, dx: [0.0; 2], dxi: [0.0; 2] }
    }

    pub fn new(dx: &[f64], dxi: &[f64]) -> Self {
        let p = TubePoint::new(dx, dxi);
        Self { dim: p.dim, dx: p.x, dxi: p.xi }
    }

    /// Component `i` of the flattened vector `(dx_1..dx_n, dxi_1..dxi_n)`.
    pub fn get(&self, i: usize) -> f64 {
        if i < self.dim {
            self.dx[i]
        } else {
            self.dxi[i - self.dim]
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        if i < self.dim {
            self.dx[i] = v;
        } else {
            self.dxi[i - self.dim] = v;
        }
    }

    pub fn components(&self) -> usize {
        2 * self.dim
    }

    pub fn dot(&self, other: &Self) -> f64 {
        (0..self.dim).map(|j| self.dx[j] * other.dx[j] + self.dxi[j] * other.dxi[j]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut v = *self;
        for j in 0..self.dim {
            v.dx[j] *= s;
            v.dxi[j] *= s;
        }
        v
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut v = *self;
        for j in 0..self.dim {
            v.dx[j] += other.dx[j];
            v.dxi[j] += other.dxi[j];
        }
        v
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn normalized(&self) -> Self {
        self.scale(1.0 / self.norm())
    }
}

/// Kähler potential ρ = ½|ξ|².
pub fn kahler_potential(p: &TubePoint) -> f64 {
    0.5 * p.xi_norm2()
}

/// Gradient of ρ, the vector field ξ·∂_ξ.
pub fn grad_rho(p: &TubePoint) -> TangentVector {
    TangentVector { dim: p.dim, dx: [0.0; 2], dxi: p.xi }
}

/// Flat Laplacian of ρ in the chart.
pub fn laplacian_rho(model: &ManifoldModel) -> f64 {
    model.dim() as f64
}

/// Complex structure `J(a; b) = (b; −a)`.
pub fn apply_j(v: &TangentVector) -> TangentVector {
    let mut w = TangentVector::zero(v.dim);
    for j in 0..v.dim {
        w.dx[j] = v.dxi[j];
        w.dxi[j] = -v.dx[j];
    }
    w
}

/// Hamilton field `H_f = J∇f` of a function with the given gradient.
pub fn hamilton_field(grad: &TangentVector) -> TangentVector {
    apply_j(grad)
}

/// `z = x − iξ` componentwise.
pub fn complexify(p: &TubePoint) -> Vec<Complex64> {
    (0..p.dim).map(|j| Complex64::new(p.x[j], -p.xi[j])).collect()
}

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_period(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// Representative of `d` modulo 2π in `[−π, π)`.
pub fn nearest_image(d: f64) -> f64 {
    (d + PI).rem_euclid(TWO_PI) - PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_values() {
        assert_eq!(kahler_potential(&TubePoint::torus([0.0, 0.0], [0.0, 0.0])), 0.0);
        assert_eq!(kahler_potential(&TubePoint::torus([1.3, 4.0], [1.0, 0.0])), 0.5);
        let p = TubePoint::torus([2.0, 0.1], [0.6, 0.8]);
        assert!((kahler_potential(&p) - 0.5).abs() < 1e-15);
        let g = grad_rho(&p);
        assert_eq!(g.dx, [0.0, 0.0]);
        assert_eq!(g.dxi, [0.6, 0.8]);
        assert!((g.norm().powi(2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn j_blocks() {
        let e = TangentVector::new(&[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(apply_j(&e), TangentVector::new(&[0.0, 0.0], &[-1.0, 0.0]));
        let v = TangentVector::new(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(apply_j(&apply_j(&v)), v.scale(-1.0));
        let g = grad_rho(&TubePoint::torus([0.0, 0.0], [1.0, 0.0]));
        assert_eq!(apply_j(&g), TangentVector::new(&[1.0, 0.0], &[0.0, 0.0]));
    }

    #[test]
    fn z_coordinate() {
        let z = complexify(&TubePoint::circle(PI, 1.0));
        assert_eq!(z, vec![Complex64::new(PI, -1.0)]);
        let z = complexify(&TubePoint::torus([1.0, 2.0], [0.5, -0.5]));
        assert_eq!(z, vec![Complex64::new(1.0, -0.5), Complex64::new(2.0, 0.5)]);
    }

    #[test]
    fn model_validation() {
        assert!(ManifoldModel::new(3, 2.0).is_err());
        assert!(ManifoldModel::new(2, 1.0).is_err());
        assert!(ManifoldModel::new(1, 1.5).is_ok());
    }

    #[test]
    fn images() {
        assert!((nearest_image(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_period(-0.5) - (TWO_PI - 0.5)).abs() < 1e-15);
    }
}
