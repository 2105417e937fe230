//! Browser bindings for three small `tubeqer` views: `|Tu|²` on the circle's
//! tube, the sign of `f(θ, φ)` on the admissible diamond, and restriction
//! norms of a lattice mode along an `h`-sweep.

use std::f64::consts::PI;

use tubeqer::fbi::eval_t_normalized;
use tubeqer::geometry::{ManifoldModel, TubePoint, DEFAULT_TAU};
use tubeqer::hypersurface::{
    admissible_check, condition_a_check, f_value, CurveResolution, HypersurfaceSpec, SurfaceGrid, SurfaceResolution,
    TrigPoly,
};
use tubeqer::qer::restriction_norm;
use tubeqer::spectral::ModeSum;
use wasm_bindgen::prelude::*;

fn js(e: tubeqer::Error) -> String {
    e.to_string()
}

/// `|h^{-1/4} Tu|²` for `u = e^{-ikx}` on an `nx × nxi` grid over
/// `[0, 2π) × [-τ, τ]`, row-major with ξ varying slowest. `h = 1/k`.
#[wasm_bindgen]
pub fn tu_heatmap(k: u32, nx: usize, nxi: usize) -> Result<Vec<f64>, String> {
    if k == 0 || nx == 0 || nxi < 2 {
        return Err("need k ≥ 1, nx ≥ 1 and nxi ≥ 2".into());
    }
    let u = ModeSum::plane_wave(&[-(k as i64)]).normalized();
    let mut out = Vec::with_capacity(nx * nxi);
    for j in 0..nxi {
        let xi = DEFAULT_TAU * (1.0 - 2.0 * j as f64 / (nxi - 1) as f64);
        for i in 0..nx {
            let x = 2.0 * PI * i as f64 / nx as f64;
            out.push(eval_t_normalized(&u, &TubePoint::circle(x, xi)).norm_sqr());
        }
    }
    Ok(out)
}

/// `f(θ, φ)` on an `n × n` grid over `[0, π]²` (θ along rows), `NaN`
/// outside the admissible diamond.
#[wasm_bindgen]
pub fn diamond_map(n: usize) -> Vec<f64> {
    let step = if n > 1 { PI / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let theta = i as f64 * step;
        for j in 0..n {
            let phi = j as f64 * step;
            out.push(if admissible_check(theta, phi) { f_value(theta, phi) } else { f64::NAN });
        }
    }
    out
}

fn surface(kind: &str, delta: f64) -> Result<HypersurfaceSpec, String> {
    match kind {
        "vertical" => HypersurfaceSpec::vertical(2, &[1, 0], 0.0).map_err(js),
        "graph" => HypersurfaceSpec::tube_graph(2, delta, TrigPoly::cos_x1()).map_err(js),
        other => Err(format!("unknown surface {other:?}")),
    }
}

/// Smallest `|cos θ|` over `Σ ∩ S*M`; zero means `Σ` meets `S*M` orthogonally
/// somewhere.
#[wasm_bindgen]
pub fn condition_a_margin(kind: &str, delta: f64) -> Result<f64, String> {
    let s = surface(kind, delta)?;
    Ok(condition_a_check(&s, 0.0, &CurveResolution::default()).map_err(js)?.1)
}

/// Restriction norms `‖h^{-1/2} T_Σ u‖` of the lattice mode `s·(a, b)` for
/// `s = 1, 2, …, steps`, with `h = 1/|s·(a, b)|`. Returns `[h₁, norm₁, h₂, …]`.
#[wasm_bindgen]
pub fn restriction_sweep(a: i32, b: i32, kind: &str, delta: f64, steps: u32) -> Result<Vec<f64>, String> {
    if a == 0 && b == 0 {
        return Err("the mode must be nonzero".into());
    }
    let s = surface(kind, delta)?;
    let model = ManifoldModel::torus();
    let mut out = Vec::new();
    for m in 1..=steps as i64 {
        let u = ModeSum::plane_wave(&[m * a as i64, m * b as i64]).normalized();
        let grid = SurfaceGrid::build(&s, &model, &SurfaceResolution::for_h(u.h(), &s)).map_err(js)?;
        out.push(u.h());
        out.push(restriction_norm(&u, &grid).map_err(js)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_peaks_on_the_shell() {
        let (nx, nxi) = (8, 81);
        let v = tu_heatmap(10, nx, nxi).unwrap();
        let row = (0..nxi).max_by(|&p, &q| v[p * nx].total_cmp(&v[q * nx])).unwrap();
        let xi = DEFAULT_TAU * (1.0 - 2.0 * row as f64 / (nxi - 1) as f64);
        assert!((xi + 1.0).abs() < 1e-12, "peak at ξ = {xi}");
        // A plane wave is uniform in x.
        assert!((v[row * nx] - v[row * nx + 3]).abs() < 1e-12 * v[row * nx]);
    }

    #[test]
    fn diamond_has_nan_outside() {
        let v = diamond_map(5);
        // θ = 0 admits only φ = π/2; the centre is inside.
        assert!(v[0].is_nan() && !v[2].is_nan() && !v[12].is_nan());
        assert!(v.iter().filter(|x| !x.is_nan()).all(|&x| x <= 0.0));
    }

    #[test]
    fn sweep_shapes() {
        let v = restriction_sweep(1, 0, "vertical", 0.0, 2).unwrap();
        assert_eq!(v.len(), 4);
        assert!((v[0] - 1.0).abs() < 1e-15 && (v[2] - 0.5).abs() < 1e-15);
        assert!(condition_a_margin("graph", 0.5).unwrap() > 0.97);
        assert!(condition_a_margin("vertical", 0.0).unwrap() < 1e-9);
    }
}
