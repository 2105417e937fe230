//! Cauchy-data restriction functional, its density `q`, the exact identities
//! behind it, the symbol of the test operator, restriction norms and the
//! h-scaling experiments.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbi::eval_t_log;
use crate::fit::{fit_loglog, LinearFit, MIN_POINTS};
use crate::geometry::{apply_j, grad_rho, laplacian_rho, ManifoldModel, TangentVector, TubePoint, TWO_PI};
use crate::hypersurface::{
    f_value, flat, intersect_sphere_bundle, local_condition_check, roots_x1, tangential_laplacian, CurveResolution,
    EnergyCurveGrid, HypersurfaceSpec, SurfaceGrid, SurfaceKind,
};
use crate::logspace::{LogComplex, LogSum};
use crate::quad;
use crate::spectral::{Continuation, ModeSum, Weight};

mod microlocal;

pub use microlocal::{
    distance_to_w_sigma, flow_out_set, multiplier_residual, wf_sigma_containment, FlowOutSet, FlowPoint,
    MultiplierReport, Profile, SeparableSymbol, SigmaChart, SigmaContainment, SymbolTerm, WfSigmaParams,
};

/// `|b₀|²` at `(x, −2ξ, x)` on flat models, fixed once by matching the
/// vertical leading term `−15ξ_n²` (see [`calibrate_b0_sq`]).
pub const B0_SQ: f64 = 1.0;

const SHELL_TOL: f64 = 1e-8;
const TANGENT_TOL: f64 = 1e-10;
/// Modes whose Gaussian factor `e^{−|ξ−hk|²/2h}` is below `e^{CUT}` at a node are
/// dropped there.
const CUT: f64 = -60.0;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `Σ|c| e^{expo − shift}` over the terms of `u`, the natural size of `u`'s
/// jet entries at `p`.
fn term_moduli(u: &ModeSum, p: &TubePoint, weight: Weight, cont: Continuation, shift: f64) -> f64 {
    let sigma = match cont {
        Continuation::Holomorphic => 1.0,
        Continuation::Anti => -1.0,
        Continuation::Trivial => 0.0,
    };
    let w = if weight == Weight::Weighted { 0.5 * p.xi_norm2() / u.h() } else { 0.0 };
    u.terms()
        .iter()
        .map(|m| {
            let kxi: f64 = (0..u.dim()).map(|j| m.k[j] as f64 * p.xi[j]).sum();
            m.c.norm() * (sigma * kxi - w - shift).exp()
        })
        .sum()
}

fn relative(resid: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        resid / scale
    }
}

/// `|Jν(u^ℂ) − i∂_ν u^ℂ|` relative to `|k|·Σ|c e^{⟨k,ξ⟩}|`.
pub fn cr_residual_with(u: &ModeSum, spec: &HypersurfaceSpec, p: &TubePoint, cont: Continuation) -> Result<f64> {
    let jet = u.jet(p, Weight::Holomorphic, cont);
    let nu = spec.normal(p)?;
    let x = apply_j(&nu);
    let lhs = jet.deriv(&flat(&x));
    let rhs = Complex64::i() * jet.deriv(&flat(&nu));
    let scale = term_moduli(u, p, Weight::Holomorphic, cont, jet.shift) / u.h();
    Ok(relative((lhs - rhs).norm(), scale))
}

pub fn cr_residual(u: &ModeSum, spec: &HypersurfaceSpec, p: &TubePoint) -> Result<f64> {
    cr_residual_with(u, spec, p, Continuation::Holomorphic)
}

/// `−h∂_ν(Tu) = (ihX + ∂_νρ − iXρ)Tu`, residual relative to the size of the
/// first-order terms. The constant `e^{−1/2h}` in `T` cancels.
pub fn r_identity_residual_with(
    u: &ModeSum,
    spec: &HypersurfaceSpec,
    p: &TubePoint,
    cont: Continuation,
) -> Result<f64> {
    let h = u.h();
    let jet = u.jet(p, Weight::Weighted, cont);
    let nu = spec.normal(p)?;
    let x = apply_j(&nu);
    let g = grad_rho(p);
    let lhs = -h * jet.deriv(&flat(&nu));
    let rhs = Complex64::i() * h * jet.deriv(&flat(&x)) + Complex64::new(g.dot(&nu), g.dot(&x)) * jet.value;
    let scale = term_moduli(u, p, Weight::Weighted, cont, jet.shift) * (1.0 + 2.0 * p.xi_norm());
    Ok(relative((lhs - rhs).norm(), scale))
}

pub fn r_identity_residual(u: &ModeSum, spec: &HypersurfaceSpec, p: &TubePoint) -> Result<f64> {
    r_identity_residual_with(u, spec, p, Continuation::Holomorphic)
}

/// Which closed form of `Y(e^{−ρ/h})e^{ρ/h}` to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum YForm {
    /// `(i|∇ρ|²cos θ cos φ − |∇ρ|² sin²θ)/h`, which follows from
    /// `(∇ρ)^T ρ = |∇ρ|² sin²θ`.
    Corrected,
    /// The variant with `sin θ` in place of `sin²θ`.
    Displayed,
}

pub fn y_commutator_coefficient(theta: f64, phi: f64, grad_norm: f64, h: f64, form: YForm) -> Complex64 {
    let g2 = grad_norm * grad_norm;
    let s = match form {
        YForm::Corrected => theta.sin().powi(2),
        YForm::Displayed => theta.sin(),
    };
    Complex64::new(-g2 * s, g2 * theta.cos() * phi.cos()) / h
}

/// `Y = −⟨∇ρ, ν⟩ iX + (∇ρ)^T` as a complex vector field in flattened form.
pub fn y_field(spec: &HypersurfaceSpec, p: &TubePoint) -> Result<[Complex64; 4]> {
    let nu = spec.normal(p)?;
    let x = apply_j(&nu);
    let g = grad_rho(p);
    let gn = g.dot(&nu);
    let tang = g.sub(&nu.scale(gn));
    let mut out = [c0(); 4];
    for (i, o) in out.iter_mut().enumerate().take(2 * p.dim) {
        *o = Complex64::new(tang.get(i), -gn * x.get(i));
    }
    Ok(out)
}

fn apply_field(field: &[Complex64; 4], grad: &[Complex64; 4]) -> Complex64 {
    field.iter().zip(grad).map(|(a, b)| a * b).sum()
}

/// Residual of `Y(e^{−ρ/h}u^ℂ) − e^{−ρ/h}Y(u^ℂ) = c(θ, φ) e^{−ρ/h}u^ℂ` with the
/// chosen closed form for `c`.
pub fn y_decomposition_residual_with(u: &ModeSum, spec: &HypersurfaceSpec, p: &TubePoint, form: YForm) -> Result<f64> {
    let h = u.h();
    let (theta, phi) = spec.angles(p)?;
    let field = y_field(spec, p)?;
    let jw = u.jet(p, Weight::Weighted, Continuation::Holomorphic);
    let rho_h = 0.5 * p.xi_norm2() / h;
    let ju = u.jet(p, Weight::Holomorphic, Continuation::Holomorphic).rescaled(jw.shift + rho_h);
    let coef = y_commutator_coefficient(theta, phi, p.xi_norm(), h, form);
    let lhs = apply_field(&field, &jw.grad) - apply_field(&field, &ju.grad);
    let rhs = coef * jw.value;
    let size = p.xi_norm() * (p.xi_norm() / h + 1.0 / h);
    let scale = term_moduli(u, p, Weight::Weighted, Continuation::Holomorphic, jw.shift) * size.max(1.0);
    Ok(relative((lhs - rhs).norm(), scale))
}

pub fn y_decomposition_residual(u: &ModeSum, spec: &HypersurfaceSpec, p: &TubePoint) -> Result<f64> {
    y_decomposition_residual_with(u, spec, p, YForm::Corrected)
}

fn check_resolution(grid: &SurfaceGrid, h: f64) -> Result<()> {
    let res = &grid.res;
    if res.radial_width > 0.5 * h.sqrt() {
        return Err(Error::Underresolved(format!(
            "radial panels of width {} exceed sqrt(h)/2 = {}",
            res.radial_width,
            0.5 * h.sqrt()
        )));
    }
    if grid.spec.dim == 2 && (res.angle as f64) < 8.0 / h.sqrt() {
        return Err(Error::Underresolved(format!("{} angular nodes; need at least 8/sqrt(h)", res.angle)));
    }
    Ok(())
}

/// The two inner products of the Cauchy-data functional, in log form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CauchyLhs {
    /// `⟨a(h²Δ_Σ + 2h∇ρ + hΔρ)w, w⟩`, `w = e^{−ρ/h}u^ℂ`.
    pub term1: LogComplex,
    /// `⟨a h∂_ν w, h∂_ν w⟩`.
    pub term2: LogComplex,
    pub total: LogComplex,
}

impl CauchyLhs {
    /// Multiply by `h^{−n/2}e^{−1/h}`, the factor that turns `w` into the
    /// normalized transform `h^{−n/4}Tu`.
    pub fn scaled(&self, h: f64, n: usize) -> [Complex64; 3] {
        let s = 1.0 / h + 0.5 * n as f64 * h.ln();
        [self.term1, self.term2, self.total].map(|v| v.to_complex_scaled(s))
    }
}

pub fn cauchy_lhs<A: Fn(&TubePoint) -> f64>(u: &ModeSum, grid: &SurfaceGrid, a: A) -> Result<CauchyLhs> {
    let h = u.h();
    check_resolution(grid, h)?;
    let n = u.dim();
    let delta_rho = laplacian_rho(&ManifoldModel::new(n, grid.tau)?);
    assert_eq!(delta_rho, n as f64, "flat charts have Δρ = n");
    let mut t1 = LogSum::new();
    let mut t2 = LogSum::new();
    let mut err = None;
    grid.for_each(|node| {
        let av = a(&node.p);
        if av == 0.0 || err.is_some() {
            return;
        }
        let jet = u.jet(&node.p, Weight::Weighted, Continuation::Holomorphic);
        let lap = match tangential_laplacian(&grid.spec, &node.p, &jet) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let op = h * h * lap + 2.0 * h * jet.deriv(&flat(&grad_rho(&node.p))) + h * delta_rho * jet.value;
        let dn = h * jet.deriv(&flat(&node.frame.normal));
        let wa = node.weight * av;
        t1.push(LogComplex::from_scaled(op * jet.value.conj() * wa, 2.0 * jet.shift));
        t2.push(LogComplex::from_scaled(Complex64::new(dn.norm_sqr() * wa, 0.0), 2.0 * jet.shift));
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let term1 = t1.value();
    let term2 = t2.value();
    Ok(CauchyLhs { term1, term2, total: term1.add(&term2) })
}

/// Ingredients of the density `q` at a node of `Σ ∩ S*M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityInputs {
    pub b0_sq: f64,
    /// `∂_β ϕ_FBI` at `(x, −2ξ, x)`.
    pub dphi_beta: f64,
    /// `∂_x β` at `(x, −2ξ)`.
    pub dx_beta: [f64; 2],
    /// Unit normal `∇β` on Σ.
    pub nu: TangentVector,
    /// `∂_β ρ`.
    pub rho_beta: f64,
}

/// `∂_x (F/|∇F|)` at an arbitrary chart point.
pub fn dx_beta(spec: &HypersurfaceSpec, q: &TubePoint) -> Result<[f64; 2]> {
    let g = spec.grad(q);
    let gn = g.norm();
    if gn < 1e-12 {
        return Err(Error::DegenerateNormal(gn));
    }
    let hm = spec.hessian(q);
    let f = raw_value(spec, q);
    let m = 2 * spec.dim;
    let mut out = [0.0; 2];
    for (j, o) in out.iter_mut().enumerate().take(spec.dim) {
        let dgn: f64 = (0..m).map(|a| g.get(a) * hm[a][j]).sum::<f64>() / gn;
        *o = g.dx[j] / gn - f * dgn / (gn * gn);
    }
    Ok(out)
}

/// `F` without reduction modulo the period.
fn raw_value(spec: &HypersurfaceSpec, p: &TubePoint) -> f64 {
    let n = spec.dim;
    match &spec.kind {
        SurfaceKind::Vertical { e, c } => (0..n).map(|j| e[j] as f64 * p.x[j]).sum::<f64>() - c,
        SurfaceKind::Tilted { a, c } => p.x[n - 1] - (0..n).map(|j| a[j] * p.xi[j]).sum::<f64>() - c,
        SurfaceKind::TubeGraph { .. } => spec.value(p),
    }
}

pub fn density_inputs(spec: &HypersurfaceSpec, p: &TubePoint, b0_sq: f64) -> Result<DensityInputs> {
    let r = p.xi_norm();
    if (r - 1.0).abs() > SHELL_TOL {
        return Err(Error::OffEnergyShell(r));
    }
    let g = spec.grad(p);
    let gn = g.norm();
    if gn < 1e-12 {
        return Err(Error::DegenerateNormal(gn));
    }
    let nu = g.scale(1.0 / gn);
    let n = spec.dim;
    // ϕ = i((x − y − iξ')²/2 + |ξ'|²/2): at y = x, ∂_x ϕ = ξ' and ∂_ξ' ϕ = 0.
    let dphi_beta: f64 = (0..n).map(|j| nu.dx[j] * (-2.0 * p.xi[j])).sum();
    let mut q = *p;
    for j in 0..n {
        q.xi[j] = -2.0 * p.xi[j];
    }
    let dxb = dx_beta(spec, &q)?;
    let rho_beta = (0..n).map(|j| nu.dxi[j] * p.xi[j]).sum();
    Ok(DensityInputs { b0_sq, dphi_beta, dx_beta: dxb, nu, rho_beta })
}

/// `(q₁, q₂)` with `q₁ = 8|b₀|² ∂_βϕ (ξ·∂_xβ)` and
/// `q₂ = (ξ·∂_βx)² − ρ_β (ξ·∂_βx)`.
pub fn density_parts(spec: &HypersurfaceSpec, p: &TubePoint, b0_sq: f64) -> Result<(f64, f64)> {
    let d = density_inputs(spec, p, b0_sq)?;
    let n = spec.dim;
    let xi_dxb: f64 = (0..n).map(|j| p.xi[j] * d.dx_beta[j]).sum();
    let xi_nux: f64 = (0..n).map(|j| p.xi[j] * d.nu.dx[j]).sum();
    let q1 = 8.0 * d.b0_sq * d.dphi_beta * xi_dxb;
    let q2 = xi_nux * xi_nux - d.rho_beta * xi_nux;
    Ok((q1, q2))
}

pub fn density_q(spec: &HypersurfaceSpec, p: &TubePoint) -> Result<f64> {
    let (q1, q2) = density_parts(spec, p, B0_SQ)?;
    Ok(q1 + q2)
}

/// Least-squares `|b₀|²` making `q₁ + q₂` match `target` over the nodes.
pub fn calibrate_b0_sq<T: Fn(&TubePoint) -> f64>(grid: &EnergyCurveGrid, target: T) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for node in &grid.nodes {
        let (q1, q2) = density_parts(&grid.spec, &node.p, 1.0)?;
        num += node.weight * q1 * (target(&node.p) - q2);
        den += node.weight * q1 * q1;
    }
    if den == 0.0 {
        return Err(Error::Degenerate("q1 vanishes identically".into()));
    }
    Ok(num / den)
}

/// `∫_{Σ∩S*M} a q dμ_Σ`.
pub fn qer_rhs<A: Fn(&TubePoint) -> f64>(grid: &EnergyCurveGrid, a: A) -> Result<f64> {
    if grid.nodes.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let mut s = 0.0;
    for node in &grid.nodes {
        let av = a(&node.p);
        if av != 0.0 {
            s += node.weight * av * density_q(&grid.spec, &node.p)?;
        }
    }
    Ok(s)
}

/// Liouville mass of `S*M`: `(2π)^n |S^{n−1}|`.
pub fn liouville_mass(dim: usize) -> f64 {
    let sphere = if dim == 1 { 2.0 } else { TWO_PI };
    TWO_PI.powi(dim as i32) * sphere
}

/// Points and arclength weights of `{x : F(x, ω) = 0}` for a fixed unit `ω`.
pub fn energy_slice(spec: &HypersurfaceSpec, omega: &[f64; 2], nodes: usize) -> Result<Vec<(TubePoint, f64)>> {
    let n = spec.dim;
    let mk = |x: [f64; 2]| {
        let mut p = TubePoint { dim: n, x, xi: [0.0; 2] };
        p.xi[..n].copy_from_slice(&omega[..n]);
        p
    };
    let per = quad::periodic(0.0, TWO_PI, nodes);
    let mut out = Vec::new();
    match (&spec.kind, n) {
        (SurfaceKind::Vertical { e, c }, 1) => {
            out.push((mk([crate::geometry::wrap_period(c / e[0] as f64), 0.0]), 1.0))
        }
        (SurfaceKind::Vertical { e, c }, _) => {
            let en2 = (e[0] * e[0] + e[1] * e[1]) as f64;
            let x0 = [c * e[0] as f64 / en2, c * e[1] as f64 / en2];
            for (s, w) in per.iter() {
                let x = [x0[0] - s * e[1] as f64, x0[1] + s * e[0] as f64];
                out.push((mk(x.map(crate::geometry::wrap_period)), en2.sqrt() * w));
            }
        }
        (SurfaceKind::Tilted { a, c }, 1) => {
            out.push((mk([crate::geometry::wrap_period(a[0] * omega[0] + c), 0.0]), 1.0));
        }
        (SurfaceKind::Tilted { a, c }, _) => {
            let x2 = crate::geometry::wrap_period(a[0] * omega[0] + a[1] * omega[1] + c);
            for (x1, w) in per.iter() {
                out.push((mk([x1, x2]), w));
            }
        }
        (SurfaceKind::TubeGraph { delta, g }, _) => {
            let r2: f64 = (0..n).map(|j| omega[j] * omega[j]).sum();
            if ((r2 - 1.0) / delta).abs() > 1e-12 {
                return Err(Error::Invalid("energy slices of tube graphs need |ω| = 1".into()));
            }
            if n == 1 {
                for r in roots_x1(g, 0.0, 4 * nodes)? {
                    out.push((mk([r, 0.0]), 1.0));
                }
            } else {
                for (x2, w) in per.iter() {
                    for r in roots_x1(g, x2, 4 * nodes)? {
                        let gg = g.grad(&[r, x2]);
                        let slope = gg[1] / gg[0];
                        out.push((mk([r, x2]), w * (1.0 + slope * slope).sqrt()));
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySlice);
    }
    Ok(out)
}

/// Reference value from the defect measure `Σ_k |c_k|² δ_{ξ=hk} ⊗ dx`:
/// `Σ_k |c_k|² ∫_{Σ ∩ {ξ = hk}} a q dℓ`.
pub fn qer_rhs_defect<A: Fn(&TubePoint) -> f64>(
    spec: &HypersurfaceSpec,
    a: A,
    u: &ModeSum,
    nodes: usize,
) -> Result<f64> {
    let h = u.h();
    let mut total = 0.0;
    for m in u.terms() {
        let omega = [h * m.k[0] as f64, h * m.k[1] as f64];
        let r = (omega[0] * omega[0] + omega[1] * omega[1]).sqrt();
        if (r - 1.0).abs() > SHELL_TOL {
            return Err(Error::OffEnergyShell(r));
        }
        let mut s = 0.0;
        for (p, w) in energy_slice(spec, &omega, nodes)? {
            let av = a(&p);
            if av != 0.0 {
                s += w * av * density_q(spec, &p)?;
            }
        }
        total += m.c.norm_sqr() * s;
    }
    Ok(total)
}

/// `∫ a q dμ_Σ` and whether it is nonzero relative to `μ_Σ(Σ∩S*M)`.
pub fn general_position_check_with<A: Fn(&TubePoint) -> f64>(grid: &EnergyCurveGrid, a: A) -> Result<(bool, f64)> {
    let v = qer_rhs(grid, a)?;
    Ok((v.abs() > 1e-6 * grid.total_measure, v))
}

pub fn general_position_check(spec: &HypersurfaceSpec, res: &CurveResolution) -> Result<(bool, f64)> {
    general_position_check_with(&intersect_sphere_bundle(spec, res)?, |_| 1.0)
}

fn tangent_check(spec: &HypersurfaceSpec, p: &TubePoint, eta: &TangentVector) -> Result<TangentVector> {
    let nu = spec.normal(p)?;
    let d = eta.dot(&nu);
    if d.abs() > TANGENT_TOL * eta.norm().max(1.0) {
        return Err(Error::Invalid(format!("η is not tangent to Σ (⟨η, ν⟩ = {d:e})")));
    }
    Ok(nu)
}

/// `σ(A) = −|η|² + (η·X)² + |∇ρ|² f(θ, φ)`.
pub fn symbol_a(spec: &HypersurfaceSpec, p: &TubePoint, eta: &TangentVector) -> Result<f64> {
    let nu = tangent_check(spec, p, eta)?;
    let x = apply_j(&nu);
    let (theta, phi) = spec.angles(p)?;
    let ex = eta.dot(&x);
    Ok(-eta.dot(eta) + ex * ex + p.xi_norm2() * f_value(theta, phi))
}

/// `σ(B) = 2η·(∇ρ)^T − |∇ρ|² cos θ cos φ`.
pub fn symbol_b(spec: &HypersurfaceSpec, p: &TubePoint, eta: &TangentVector) -> Result<f64> {
    let nu = tangent_check(spec, p, eta)?;
    let g = grad_rho(p);
    let tang = g.sub(&nu.scale(g.dot(&nu)));
    let (theta, phi) = spec.angles(p)?;
    Ok(2.0 * eta.dot(&tang) - p.xi_norm2() * theta.cos() * phi.cos())
}

/// Orthonormal basis of `T_pΣ` whose first vector is `X = Jν`.
pub fn tangent_basis(spec: &HypersurfaceSpec, p: &TubePoint) -> Result<Vec<TangentVector>> {
    let nu = spec.normal(p)?;
    let mut basis = vec![apply_j(&nu)];
    let m = 2 * spec.dim;
    for i in 0..m {
        let mut v = TangentVector::zero(spec.dim);
        v.set(i, 1.0);
        v = v.sub(&nu.scale(v.dot(&nu)));
        for b in &basis {
            v = v.sub(&b.scale(v.dot(b)));
        }
        if v.norm() > 1e-8 {
            basis.push(v.normalized());
        }
        if basis.len() == m - 1 {
            break;
        }
    }
    Ok(basis)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EllipticityScan {
    pub min_sigma: f64,
    pub max_sigma: f64,
    /// `max |∇ρ|² f(θ, φ)` over the nodes.
    pub max_f_term: f64,
    /// `−max σ(A)`.
    pub margin: f64,
    /// `(θ, φ)` where `σ(A)` is largest.
    pub worst_angles: (f64, f64),
    pub nodes: usize,
    pub samples: usize,
}

/// Scan `σ(A)` over `Σ ∩ S*M` times the η-ball of radius `eta_radius`.
/// With `require_local = Some(δ)` the local condition is checked first.
pub fn ellipticity_scan(
    spec: &HypersurfaceSpec,
    res: &CurveResolution,
    eta_radius: f64,
    n_dirs: usize,
    n_radii: usize,
    require_local: Option<f64>,
) -> Result<EllipticityScan> {
    if let Some(delta) = require_local {
        if !local_condition_check(spec, delta, res)? {
            return Err(Error::Degenerate(format!("local condition fails at δ = {delta}")));
        }
    }
    let grid = intersect_sphere_bundle(spec, res)?;
    let mut out = EllipticityScan {
        min_sigma: f64::INFINITY,
        max_sigma: f64::NEG_INFINITY,
        max_f_term: f64::NEG_INFINITY,
        margin: 0.0,
        worst_angles: (0.0, 0.0),
        nodes: grid.nodes.len(),
        samples: 0,
    };
    for node in &grid.nodes {
        let p = &node.p;
        let basis = tangent_basis(spec, p)?;
        let fterm = p.xi_norm2() * f_value(node.frame.theta, node.frame.phi);
        out.max_f_term = out.max_f_term.max(fterm);
        let mut etas = vec![TangentVector::zero(spec.dim)];
        for ir in 1..=n_radii {
            let r = eta_radius * ir as f64 / n_radii as f64;
            for e in &basis[1..] {
                for id in 0..n_dirs {
                    let b = std::f64::consts::PI * id as f64 / n_dirs as f64;
                    etas.push(basis[0].scale(r * b.cos()).add(&e.scale(r * b.sin())));
                }
            }
            if basis.len() == 1 {
                etas.push(basis[0].scale(r));
            }
        }
        for eta in &etas {
            let s = symbol_a(spec, p, eta)?;
            out.samples += 1;
            out.min_sigma = out.min_sigma.min(s);
            if s > out.max_sigma {
                out.max_sigma = s;
                out.worst_angles = (node.frame.theta, node.frame.phi);
            }
        }
    }
    out.margin = -out.max_sigma;
    Ok(out)
}

/// Which scale a restriction norm is reported in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormScale {
    /// `∫_Σ |Tu|² dσ`.
    Bare,
    /// `∫_Σ |h^{−n/4}Tu|² dσ`.
    Normalized,
}

/// `log ∫_Σ |T u|² dσ` in the requested scale.
pub fn restriction_norm_log_sq(u: &ModeSum, grid: &SurfaceGrid, scale: NormScale) -> Result<f64> {
    let mut acc = LogSum::new();
    grid.for_each_raw(|p, w| {
        let t = eval_t_log(u, &p);
        acc.push_real_log(t.log_norm_sqr() + w.ln());
    })?;
    let v = acc.value().log_mag;
    Ok(match scale {
        NormScale::Bare => v,
        NormScale::Normalized => v - 0.5 * u.dim() as f64 * u.h().ln(),
    })
}

/// `‖h^{−n/4} T_Σ u‖_{L²(Σ)}`.
pub fn restriction_norm(u: &ModeSum, grid: &SurfaceGrid) -> Result<f64> {
    Ok((0.5 * restriction_norm_log_sq(u, grid, NormScale::Normalized)?).exp())
}

/// `log ∫_Σ e^{−2ρ/h}|u^ℂ|² dσ`, computed from `u^ℂ` directly.
pub fn weighted_norm_log(u: &ModeSum, grid: &SurfaceGrid) -> Result<f64> {
    let h = u.h();
    let mut acc = LogSum::new();
    grid.for_each_raw(|p, w| {
        let v = u.eval_u_complex_log(&p);
        acc.push_real_log(v.log_norm_sqr() - p.xi_norm2() / h + w.ln());
    })?;
    Ok(acc.value().log_mag)
}

/// Sesquilinear forms on the span of a fixed set of lattice modes, built in
/// one pass over a surface grid. Entries are in the normalized scale, i.e.
/// for `u = Σ c_k e^{ikx}`: `‖h^{−n/4}T_Σu‖² = Σ c_k c̄_l gram[k][l]` and
/// the scaled Cauchy terms are `Σ c_k c̄_l lhs[k][l]`.
#[derive(Clone, Debug)]
pub struct ModeForms {
    pub ks: Vec<[i64; 2]>,
    pub h: f64,
    pub gram: Vec<Complex64>,
    pub lhs1: Option<Vec<Complex64>>,
    pub lhs2: Option<Vec<Complex64>>,
}

/// Values of the forms at one member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FormValues {
    pub norm_sq: f64,
    pub term1: Complex64,
    pub term2: Complex64,
}

impl ModeForms {
    pub fn compute<A: Fn(&TubePoint) -> f64>(
        ks: &[[i64; 2]],
        h: f64,
        grid: &SurfaceGrid,
        a: Option<A>,
    ) -> Result<Self> {
        check_resolution(grid, h)?;
        let n = grid.spec.dim;
        for k in ks {
            let norm = crate::spectral::lattice_norm(k);
            if (norm * h - 1.0).abs() > 1e-9 {
                return Err(Error::OffShell { k: *k, norm, expected: 1.0 / h });
            }
        }
        let m = ks.len();
        let with_lhs = a.is_some();
        let mut gram = vec![c0(); m * m];
        let mut l1 = vec![c0(); if with_lhs { m * m } else { 0 }];
        let mut l2 = vec![c0(); if with_lhs { m * m } else { 0 }];
        let pref = h.powf(-(n as f64) / 4.0);
        let nf = n as f64;
        let mut err = None;
        let mut active: Vec<(usize, Complex64, Complex64, Complex64)> = Vec::with_capacity(m);
        grid.for_each_raw(|p, w| {
            if err.is_some() {
                return;
            }
            active.clear();
            for (i, k) in ks.iter().enumerate() {
                let mut d2 = 0.0;
                let mut kx = 0.0;
                for j in 0..n {
                    let kj = k[j] as f64;
                    d2 += (p.xi[j] - h * kj).powi(2);
                    kx += kj * p.x[j];
                }
                let e = -d2 / (2.0 * h);
                if e < CUT {
                    continue;
                }
                let t = Complex64::from_polar(pref * e.exp(), kx);
                active.push((i, t, c0(), c0()));
            }
            if active.is_empty() {
                return;
            }
            for x in &active {
                for y in &active {
                    gram[x.0 * m + y.0] += x.1 * y.1.conj() * w;
                }
            }
            let Some(af) = a.as_ref() else { return };
            let av = af(&p);
            if av == 0.0 {
                return;
            }
            let (nu, hc) = match (grid.spec.normal(&p), grid.spec.mean_curvature(&p)) {
                (Ok(v), Ok(c)) => (v, c),
                (Err(e), _) | (_, Err(e)) => {
                    err = Some(e);
                    return;
                }
            };
            let nuf = flat(&nu);
            let nxi2: f64 = (0..n).map(|j| nu.dxi[j] * nu.dxi[j]).sum();
            for entry in active.iter_mut() {
                let k = ks[entry.0];
                // ∂w/w for w = e^{ikx} e^{⟨k,ξ⟩ − |ξ|²/2h}.
                let mut g = [c0(); 4];
                for j in 0..n {
                    g[j] = Complex64::new(0.0, k[j] as f64);
                    g[n + j] = Complex64::new(k[j] as f64 - p.xi[j] / h, 0.0);
                }
                let gsq: Complex64 = g[..2 * n].iter().map(|v| v * v).sum();
                let gnu: Complex64 = (0..2 * n).map(|i| g[i] * nuf[i]).sum();
                let grho: Complex64 = (0..n).map(|j| g[n + j] * p.xi[j]).sum();
                let lap_sigma = gsq - nf / h - (gnu * gnu - nxi2 / h) - hc * gnu;
                let op = h * h * lap_sigma + 2.0 * h * grho + h * nf;
                entry.2 = op * entry.1;
                entry.3 = h * gnu * entry.1;
            }
            let wa = w * av;
            for x in &active {
                for y in &active {
                    l1[x.0 * m + y.0] += x.2 * y.1.conj() * wa;
                    l2[x.0 * m + y.0] += x.3 * y.3.conj() * wa;
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(Self { ks: ks.to_vec(), h, gram, lhs1: with_lhs.then_some(l1), lhs2: with_lhs.then_some(l2) })
    }

    fn coefficients(&self, u: &ModeSum) -> Result<Vec<Complex64>> {
        let mut c = vec![c0(); self.ks.len()];
        for t in u.terms() {
            let i = self
                .ks
                .iter()
                .position(|k| *k == t.k)
                .ok_or_else(|| Error::Invalid(format!("mode {:?} not in the form basis", t.k)))?;
            c[i] += t.c;
        }
        Ok(c)
    }

    fn quad(&self, mat: &[Complex64], c: &[Complex64]) -> Complex64 {
        let m = c.len();
        let mut s = c0();
        for i in 0..m {
            for j in 0..m {
                s += c[i] * c[j].conj() * mat[i * m + j];
            }
        }
        s
    }

    pub fn member(&self, u: &ModeSum) -> Result<FormValues> {
        let c = self.coefficients(u)?;
        let norm_sq = self.quad(&self.gram, &c).re;
        let (term1, term2) = match (&self.lhs1, &self.lhs2) {
            (Some(a), Some(b)) => (self.quad(a, &c), self.quad(b, &c)),
            _ => (c0(), c0()),
        };
        Ok(FormValues { norm_sq, term1, term2 })
    }
}

/// One h-value of a scaling experiment. Every quantity is per unit `‖u‖²`
/// and averaged over the members of the family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QerRow {
    pub h: f64,
    pub members: usize,
    pub term1: Complex64,
    pub term2: f64,
    /// `h^{−n/2}e^{−1/h}·LHS`.
    pub scaled_lhs: Complex64,
    /// `log LHS` recovered from the scaled value.
    pub log_lhs: f64,
    pub rhs_defect: Option<f64>,
    /// `∫ a q dμ_Σ / μ_L(S*M)`.
    pub rhs_liouville: f64,
    /// `|Re scaled_lhs / reference − 1|` against the defect reference when
    /// present, else the Liouville one.
    pub gap: f64,
    pub norm_mean: f64,
    pub norm_min: f64,
    pub norm_max: f64,
    /// `log ∫_Σ e^{−2ρ/h}|u^ℂ|²` of the mean member, from the restriction
    /// norm through `e^{1/h}‖T_Σu‖²`.
    pub log_weighted_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QerFits {
    pub gap: Option<LinearFit>,
    pub norm: Option<LinearFit>,
    pub lower_bound_witness: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QERReport {
    pub surface: HypersurfaceSpec,
    pub rows: Vec<QerRow>,
    pub fits: QerFits,
}

impl QERReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "h,members,term1_re,term1_im,term2,lhs_re,lhs_im,log_lhs,rhs_defect,rhs_liouville,gap,norm_mean,norm_min,norm_max,log_weighted_norm"
        )?;
        for r in &self.rows {
            let cells = [
                r.h,
                r.members as f64,
                r.term1.re,
                r.term1.im,
                r.term2,
                r.scaled_lhs.re,
                r.scaled_lhs.im,
                r.log_lhs,
                r.rhs_defect.unwrap_or(f64::NAN),
                r.rhs_liouville,
                r.gap,
                r.norm_mean,
                r.norm_min,
                r.norm_max,
                r.log_weighted_norm,
            ];
            let s: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 1 { format!("{}", *c as usize) } else { format!("{c:.17e}") })
                .collect();
            writeln!(w, "{}", s.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingOptions {
    /// Compute the Cauchy-data functional (needs normals at every node).
    pub lhs: bool,
    /// Compute the defect-measure reference for every member.
    pub defect: bool,
}

/// Run the functional and the norms over families sharing one `h` each.
pub fn scaling_experiment<A, R>(
    spec: &HypersurfaceSpec,
    model: &ManifoldModel,
    a: A,
    families: &[Vec<ModeSum>],
    res: R,
    curve: &CurveResolution,
    opts: ScalingOptions,
) -> Result<QERReport>
where
    A: Fn(&TubePoint) -> f64 + Copy,
    R: Fn(f64) -> crate::hypersurface::SurfaceResolution,
{
    let n = model.dim();
    let curve_grid = intersect_sphere_bundle(spec, curve)?;
    let rhs_liouville = qer_rhs(&curve_grid, a)? / liouville_mass(n);
    let mut rows = Vec::new();
    for fam in families {
        let first = fam.first().ok_or_else(|| Error::Invalid("empty family".into()))?;
        let h = first.h();
        if fam.iter().any(|u| (u.h() - h).abs() > 1e-15 || u.dim() != n) {
            return Err(Error::Invalid("a family must share h and the dimension".into()));
        }
        let mut ks: Vec<[i64; 2]> = Vec::new();
        for u in fam {
            for t in u.terms() {
                if !ks.contains(&t.k) {
                    ks.push(t.k);
                }
            }
        }
        let grid = SurfaceGrid::build(spec, model, &res(h))?;
        let forms = ModeForms::compute(&ks, h, &grid, opts.lhs.then_some(a))?;
        let mut term1 = c0();
        let mut term2 = 0.0;
        let mut defect = 0.0;
        let mut norms = Vec::new();
        for u in fam {
            let mass = u.l2_norm_sqr();
            let v = forms.member(u)?;
            term1 += v.term1 / mass;
            term2 += v.term2.re / mass;
            norms.push((v.norm_sq / mass).sqrt());
            if opts.defect {
                defect += qer_rhs_defect(spec, a, u, 4 * curve.periodic)? / mass;
            }
        }
        let nm = fam.len() as f64;
        let term1 = term1 / nm;
        let term2 = term2 / nm;
        let scaled = term1 + term2;
        let rhs_defect = opts.defect.then_some(defect / nm);
        let reference = rhs_defect.unwrap_or(rhs_liouville);
        let norm_mean = norms.iter().sum::<f64>() / nm;
        let half_n_log_h = 0.5 * n as f64 * h.ln();
        rows.push(QerRow {
            h,
            members: fam.len(),
            term1,
            term2,
            scaled_lhs: scaled,
            log_lhs: scaled.norm().ln() + 1.0 / h + half_n_log_h,
            rhs_defect,
            rhs_liouville,
            gap: (scaled.re / reference - 1.0).abs(),
            norm_mean,
            norm_min: norms.iter().cloned().fold(f64::INFINITY, f64::min),
            norm_max: norms.iter().cloned().fold(0.0, f64::max),
            log_weighted_norm: 1.0 / h + 2.0 * norm_mean.ln() + half_n_log_h,
        });
    }
    rows.sort_by(|a, b| b.h.partial_cmp(&a.h).unwrap());
    let mut notes = Vec::new();
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let fit_or_note = |q: Vec<f64>, what: &str, notes: &mut Vec<String>| {
        if rows.len() < MIN_POINTS {
            notes.push(format!("{what}: fewer than {MIN_POINTS} h values"));
            return None;
        }
        match fit_loglog(&hs, &q) {
            Ok(f) => Some(f),
            Err(e) => {
                notes.push(format!("{what}: {e}"));
                None
            }
        }
    };
    let gap = if opts.lhs { fit_or_note(rows.iter().map(|r| r.gap).collect(), "gap", &mut notes) } else { None };
    let norm = fit_or_note(rows.iter().map(|r| r.norm_mean).collect(), "norm", &mut notes);
    let lower_bound_witness = rows.iter().map(|r| r.norm_min).fold(f64::INFINITY, f64::min);
    Ok(QERReport { surface: spec.clone(), rows, fits: QerFits { gap, norm, lower_bound_witness, notes } })
}

#[cfg(test)]
mod tests;
