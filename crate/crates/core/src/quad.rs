//! One-dimensional quadrature rules used to build tensor and surface grids.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().cloned().zip(self.weights.iter().cloned())
    }
}

/// Trapezoid rule on `[a, a + period)` with `n` equispaced nodes.
pub fn periodic(a: f64, period: f64, n: usize) -> Rule {
    let d = period / n as f64;
    Rule { nodes: (0..n).map(|i| a + i as f64 * d).collect(), weights: vec![d; n] }
}

/// Composite Gauss–Legendre rule over `[breaks[0], breaks[last]]`.
///
/// Every interval between consecutive breakpoints is split into equal
/// panels no wider than `max_width`, each carrying an `order`-point rule.
pub fn gauss_panels(breaks: &[f64], max_width: f64, order: usize) -> Result<Rule> {
    if breaks.len() < 2 || !(max_width > 0.0) {
        return Err(Error::Invalid("gauss_panels needs two breakpoints and a positive width".into()));
    }
    let order = NonZeroUsize::new(order).ok_or_else(|| Error::Invalid("order must be positive".into()))?;
    let gl = GaussLegendre::new(order);
    let pairs = gl.as_node_weight_pairs();
    let mut rule = Rule { nodes: Vec::new(), weights: Vec::new() };
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b < a {
            return Err(Error::Invalid("breakpoints must increase".into()));
        }
        if b == a {
            continue;
        }
        let panels = ((b - a) / max_width).ceil().max(1.0) as usize;
        let pw = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * pw;
            for (x, wt) in pairs {
                rule.nodes.push(lo + 0.5 * pw * (x + 1.0));
                rule.weights.push(0.5 * pw * wt);
            }
        }
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn periodic_is_spectral() {
        let r = periodic(0.3, 2.0 * PI, 16);
        let v = r.integrate(|x| (3.0 * x).cos().powi(2));
        assert!((v - PI).abs() < 1e-13);
    }

    #[test]
    fn panels_integrate_gaussian() {
        let r = gauss_panels(&[-6.0, 0.5, 6.0], 0.5, 8).unwrap();
        let v = r.integrate(|x| (-x * x).exp());
        assert!((v - PI.sqrt()).abs() < 1e-13);
    }
}
