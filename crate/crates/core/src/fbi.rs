//! The FBI transform `Tu = e^{−1/2h} e^{−ρ/h} u^ℂ` on the tube, its heat-kernel
//! quadrature, phase-space integrals and windowed semiclassical Fourier
//! transforms used to locate the wavefront set.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ManifoldModel, TubePoint, TWO_PI};
use crate::logspace::{LogComplex, LogSum};
use crate::quad;
use crate::spectral::{Continuation, ModeSum, Weight};

/// `e^{−1/2h}e^{−ρ/h}u^ℂ` in log form.
///
/// Each term is `c e^{i⟨k,x⟩} e^{−|ξ−hk|²/2h}` up to the off-shell correction
/// `(1 − h²|k|²)/2h`, which vanishes for eigenfunctions.
pub fn eval_t_log(u: &ModeSum, p: &TubePoint) -> LogComplex {
    let h = u.h();
    let n = u.dim();
    let mut acc = LogSum::new();
    for m in u.terms() {
        let mut d2 = 0.0;
        let mut k2 = 0.0;
        let mut kx = 0.0;
        for j in 0..n {
            let kj = m.k[j] as f64;
            let d = p.xi[j] - h * kj;
            d2 += d * d;
            k2 += kj * kj;
            kx += kj * p.x[j];
        }
        let expo = -d2 / (2.0 * h) + (1.0 - h * h * k2) / (2.0 * h);
        let c = LogComplex::from_complex(m.c);
        acc.push(c.mul(&LogComplex::new(expo, kx)));
    }
    acc.value()
}

pub fn eval_t(u: &ModeSum, p: &TubePoint) -> Complex64 {
    eval_t_log(u, p).to_complex()
}

/// `h^{−n/4}·Tu`, the normalization under which `‖Tu‖` is h-independent.
pub fn eval_t_normalized(u: &ModeSum, p: &TubePoint) -> Complex64 {
    eval_t(u, p) * u.h().powf(-(u.dim() as f64) / 4.0)
}

/// Nodes per period needed by [`eval_t_heat`]: the integrand oscillates at
/// frequency up to `(1 + τ)/h` under a Gaussian of width √h.
pub fn heat_nodes_required(h: f64, tau: f64) -> usize {
    let n = ((1.0 + tau) / h + 12.0 / h.sqrt()).ceil() as usize;
    n + n % 2
}

/// Heat-kernel form of the transform,
/// `h^{−n/4} ∫ (2πh)^{−n/2} e^{[−r²_ℂ(z,y)/2 − ρ(z)]/h} u(y) dy`,
/// by the trapezoid rule on the period cell centred at `x`, with
/// nearest-image differences.
pub fn eval_t_heat(u: &ModeSum, p: &TubePoint, tau: f64, nodes: usize) -> Result<Complex64> {
    let h = u.h();
    let need = heat_nodes_required(h, tau);
    if nodes < need {
        return Err(Error::Underresolved(format!(
            "heat quadrature needs {need} nodes per period at h = {h}, got {nodes}"
        )));
    }
    let n = u.dim();
    let dy = TWO_PI / nodes as f64;
    let ds: Vec<f64> = (0..nodes).map(|i| -PI + i as f64 * dy).collect();
    // After completing the square, −r²_ℂ/2 − ρ = −d²/2 + i d·ξ with d = x − y.
    let kernel = |d: f64, xi: f64| Complex64::from_polar((-d * d / (2.0 * h)).exp(), d * xi / h);
    let mut sum = Complex64::new(0.0, 0.0);
    match n {
        1 => {
            for &d in &ds {
                let y = p.x[0] - d;
                sum += kernel(d, p.xi[0]) * u.eval_u(&[y]);
            }
        }
        _ => {
            let k1: Vec<Complex64> = ds.iter().map(|&d| kernel(d, p.xi[0])).collect();
            let k2: Vec<Complex64> = ds.iter().map(|&d| kernel(d, p.xi[1])).collect();
            for (i, &d1) in ds.iter().enumerate() {
                if k1[i].norm() < 1e-300 {
                    continue;
                }
                for (j, &d2) in ds.iter().enumerate() {
                    sum += k1[i] * k2[j] * u.eval_u(&[p.x[0] - d1, p.x[1] - d2]);
                }
            }
        }
    }
    let pref = (TWO_PI * h).powf(-(n as f64) / 2.0) * h.powf(-(n as f64) / 4.0) * dy.powi(n as i32);
    Ok(sum * pref)
}

/// The constant `eval_t_heat / eval_t` measured once on the circle mode
/// `e^{−ikx}`, `k = 1/h`, at `(x, ξ) = (0, −1)`.
pub fn calibrate_heat_constant(h: f64, tau: f64) -> Result<Complex64> {
    let k = (1.0 / h).round() as i64;
    if ((k as f64) * h - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("calibration needs 1/h integral, got h = {h}")));
    }
    let u = ModeSum::plane_wave(&[-k]);
    let p = TubePoint::circle(0.0, -1.0);
    let heat = eval_t_heat(&u, &p, tau, heat_nodes_required(h, tau))?;
    Ok(heat / eval_t(&u, &p))
}

/// `|h²Δ_{x,ξ}(e^{ρ/h}·f)| / |f|` for `f` the weighted extension of `u`, i.e.
/// the flat Laplacian applied to the chosen continuation. The holomorphic
/// continuation is harmonic; the denominator is the sum of term moduli so
/// cancellation in `u^ℂ(p)` cannot inflate the ratio.
pub fn holomorphy_residual_with(u: &ModeSum, p: &TubePoint, cont: Continuation) -> f64 {
    let jet = u.jet(p, Weight::Holomorphic, cont);
    let sigma = match cont {
        Continuation::Holomorphic => 1.0,
        Continuation::Anti => -1.0,
        Continuation::Trivial => 0.0,
    };
    let scale: f64 = u
        .terms()
        .iter()
        .map(|m| {
            let kxi: f64 = (0..u.dim()).map(|j| sigma * m.k[j] as f64 * p.xi[j]).sum();
            m.c.norm() * (kxi - jet.shift).exp()
        })
        .sum();
    if scale == 0.0 {
        return 0.0;
    }
    let h = u.h();
    (h * h * jet.laplacian()).norm() / scale
}

pub fn holomorphy_residual(u: &ModeSum, p: &TubePoint) -> f64 {
    holomorphy_residual_with(u, p, Continuation::Holomorphic)
}

/// Quadrature nodes over the fibre ball `|ξ| < τ`.
///
/// For n = 2 this is polar: composite Gauss–Legendre in the radius (with the
/// requested radii as panel breaks) times the trapezoid rule in angle.
#[derive(Clone, Debug)]
pub struct XiRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

pub fn xi_rule(model: &ManifoldModel, h: f64, radii: &[f64]) -> Result<XiRule> {
    let tau = model.tau();
    let mut rb: Vec<f64> = radii.iter().cloned().filter(|r| *r > 0.0 && *r < tau).collect();
    rb.push(1.0);
    let width = 0.5 * h.sqrt();
    let mut out = XiRule { points: Vec::new(), weights: Vec::new() };
    match model.dim() {
        1 => {
            let mut breaks: Vec<f64> = rb.iter().flat_map(|r| [-r, *r]).collect();
            breaks.extend([-tau, tau]);
            sort_dedup(&mut breaks);
            let r = quad::gauss_panels(&breaks, width, 10)?;
            for (x, w) in r.iter() {
                out.points.push([x, 0.0]);
                out.weights.push(w);
            }
        }
        _ => {
            let mut breaks = rb;
            breaks.extend([0.0, tau]);
            sort_dedup(&mut breaks);
            let r = quad::gauss_panels(&breaks, width, 10)?;
            let na = ((24.0 / h.sqrt()).ceil() as usize).max(64);
            let ang = quad::periodic(0.0, TWO_PI, na);
            for (s, ws) in r.iter() {
                for (a, wa) in ang.iter() {
                    out.points.push([s * a.cos(), s * a.sin()]);
                    out.weights.push(s * ws * wa);
                }
            }
        }
    }
    Ok(out)
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
}

/// Coefficients grouped by lattice vector.
fn grouped(u: &ModeSum) -> Vec<([i64; 2], Complex64)> {
    let mut m: BTreeMap<[i64; 2], Complex64> = BTreeMap::new();
    for t in u.terms() {
        *m.entry(t.k).or_insert(Complex64::new(0.0, 0.0)) += t.c;
    }
    m.into_iter().collect()
}

/// `∫_{T^n} |h^{−n/4}Tu(x, ξ)|² dx`, exact by Parseval since distinct lattice
/// modes are orthogonal.
pub fn x_marginal(u: &ModeSum, xi: &[f64; 2]) -> f64 {
    let h = u.h();
    let n = u.dim();
    let vol = TWO_PI.powi(n as i32);
    grouped(u)
        .iter()
        .map(|(k, c)| {
            let mut d2 = 0.0;
            let mut k2 = 0.0;
            for j in 0..n {
                let d = xi[j] - h * k[j] as f64;
                d2 += d * d;
                k2 += (k[j] * k[j]) as f64;
            }
            c.norm_sqr() * (-d2 / h + (1.0 - h * h * k2) / h).exp()
        })
        .sum::<f64>()
        * vol
        * h.powf(-(n as f64) / 2.0)
}

/// `∫∫ a(ξ) |h^{−n/4}Tu|² dx dξ` over the chart.
pub fn phase_space_integral<A: Fn(&[f64; 2]) -> f64>(
    u: &ModeSum,
    model: &ManifoldModel,
    a: A,
    radii: &[f64],
) -> Result<f64> {
    let rule = xi_rule(model, u.h(), radii)?;
    Ok(rule.points.iter().zip(&rule.weights).map(|(xi, w)| w * a(xi) * x_marginal(u, xi)).sum())
}

/// `‖h^{−n/4}Tu‖_{L²(B*_τ M)}`.
pub fn ambient_norm(u: &ModeSum, model: &ManifoldModel) -> Result<f64> {
    Ok(phase_space_integral(u, model, |_| 1.0, &[])?.sqrt())
}

/// Fraction of `∫|Tu|²` carried by `{ ||ξ| − 1| > ε }`.
pub fn energy_mass_off_shell(u: &ModeSum, model: &ManifoldModel, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < model.tau() - 1.0) {
        return Err(Error::Invalid(format!("need 0 < eps < tau - 1, got {eps}")));
    }
    let radii = [1.0 - eps, 1.0 + eps];
    let rule = xi_rule(model, u.h(), &radii)?;
    let mut off = 0.0;
    let mut total = 0.0;
    for (xi, w) in rule.points.iter().zip(&rule.weights) {
        let v = w * x_marginal(u, xi);
        total += v;
        let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        // Nodes never sit on a panel break, so the indicator is unambiguous.
        if (r - 1.0).abs() > eps {
            off += v;
        }
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(off / total)
}

/// Phase-space average of `a(ξ)` against `|Tu|²` next to the mode-space
/// average `Σ|c_k|² a(hk) / Σ|c_k|²`.
pub fn anti_wick_pair<A: Fn(&[f64; 2]) -> f64>(u: &ModeSum, model: &ManifoldModel, a: A) -> Result<(f64, f64)> {
    let num = phase_space_integral(u, model, &a, &[])?;
    let den = phase_space_integral(u, model, |_| 1.0, &[])?;
    let h = u.h();
    let g = grouped(u);
    let w: f64 = g.iter().map(|(_, c)| c.norm_sqr()).sum();
    let modal: f64 = g.iter().map(|(k, c)| c.norm_sqr() * a(&[h * k[0] as f64, h * k[1] as f64])).sum::<f64>() / w;
    Ok((num / den, modal))
}

/// Coordinate carried by a grid axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X(usize),
    Xi(usize),
}

impl Axis {
    pub fn label(&self) -> String {
        match self {
            Axis::X(j) => format!("x{}", j + 1),
            Axis::Xi(j) => format!("xi{}", j + 1),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        if let Some(r) = s.strip_prefix("xi") {
            r.parse::<usize>().ok().map(|j| Axis::Xi(j - 1))
        } else if let Some(r) = s.strip_prefix('x') {
            r.parse::<usize>().ok().map(|j| Axis::X(j - 1))
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisGrid {
    pub axis: Axis,
    pub start: f64,
    pub step: f64,
    pub len: usize,
    pub periodic: bool,
}

impl AxisGrid {
    /// Full period of an `x` coordinate.
    pub fn periodic_x(j: usize, len: usize) -> Self {
        Self { axis: Axis::X(j), start: 0.0, step: TWO_PI / len as f64, len, periodic: true }
    }

    /// `[−τ+ε, τ−ε]` for a `ξ` coordinate, endpoints included.
    pub fn chart_xi(j: usize, tau: f64, eps: f64, len: usize) -> Self {
        let a = -tau + eps;
        Self { axis: Axis::Xi(j), start: a, step: 2.0 * (tau - eps) / (len - 1) as f64, len, periodic: false }
    }

    /// Uniform grid on `[a, b]`, endpoints included.
    pub fn interval(axis: Axis, a: f64, b: f64, len: usize) -> Self {
        Self { axis, start: a, step: (b - a) / (len - 1) as f64, len, periodic: false }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.coord(i)).collect()
    }

    pub fn end(&self) -> f64 {
        self.coord(self.len - 1)
    }
}

/// Window for the semiclassical Fourier transform along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Window {
    /// The whole (periodic) axis with unit weight.
    Full,
    /// `1` on `|s − c| ≤ plateau`, a C^∞ taper to `0` at `plateau + taper`.
    Bump { plateau: f64, taper: f64 },
}

impl Window {
    /// Pure bump of the given support radius.
    pub fn bump(radius: f64) -> Self {
        Window::Bump { plateau: 0.0, taper: radius }
    }

    pub fn weight(&self, offset: f64) -> f64 {
        match *self {
            Window::Full => 1.0,
            Window::Bump { plateau, taper } => {
                let a = offset.abs();
                if a <= plateau {
                    1.0
                } else if a >= plateau + taper {
                    0.0
                } else {
                    1.0 - smooth_step((a - plateau) / taper)
                }
            }
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match *self {
            Window::Full => None,
            Window::Bump { plateau, taper } => Some(plateau + taper),
        }
    }
}

/// C^∞ transition from 0 at `t ≤ 0` to 1 at `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// One-axis plan: which samples enter, with what weights, and the dual grid.
#[derive(Clone, Debug)]
struct AxisPlan {
    src: Vec<usize>,
    weights: Vec<f64>,
    s0: f64,
    step: f64,
    m: usize,
    duals: Vec<f64>,
    /// FFT bin for each entry of `duals` (which is sorted increasingly).
    bins: Vec<usize>,
}

fn plan_axis(grid: &AxisGrid, window: &Window, center: f64, h: f64, dual_step: f64) -> Result<AxisPlan> {
    let (i0, i1): (i64, i64) = match window.radius() {
        None => {
            if !grid.periodic {
                return Err(Error::Window("a full window needs a periodic axis".into()));
            }
            (0, grid.len as i64 - 1)
        }
        Some(r) => {
            let lo = ((center - r - grid.start) / grid.step).ceil() as i64;
            let hi = ((center + r - grid.start) / grid.step).floor() as i64;
            if !grid.periodic && (lo < 0 || hi >= grid.len as i64) {
                return Err(Error::Window(format!(
                    "window [{}, {}] leaves the chart [{}, {}] on {}",
                    center - r,
                    center + r,
                    grid.start,
                    grid.end(),
                    grid.axis.label()
                )));
            }
            if grid.periodic && (hi - lo + 1) as usize > grid.len {
                return Err(Error::Window("window longer than the period".into()));
            }
            (lo, hi)
        }
    };
    if grid.step > PI * h {
        return Err(Error::Underresolved(format!(
            "grid step {} on {} is coarser than pi*h",
            grid.step,
            grid.axis.label()
        )));
    }
    let l = (i1 - i0 + 1) as usize;
    let mut src = Vec::with_capacity(l);
    let mut weights = Vec::with_capacity(l);
    for i in i0..=i1 {
        let s = grid.start + i as f64 * grid.step;
        src.push(i.rem_euclid(grid.len as i64) as usize);
        weights.push(window.weight(s - center));
    }
    let want = (TWO_PI * h / (grid.step * dual_step)).ceil() as usize;
    let m = want.max(l).next_power_of_two();
    let half = (m / 2) as i64;
    let mut duals = Vec::with_capacity(m);
    let mut bins = Vec::with_capacity(m);
    for j in -half..half {
        duals.push(TWO_PI * h * j as f64 / (m as f64 * grid.step));
        bins.push(j.rem_euclid(m as i64) as usize);
    }
    Ok(AxisPlan { src, weights, s0: grid.start + i0 as f64 * grid.step, step: grid.step, m, duals, bins })
}

/// Apply the windowed transform along one axis of a row-major array.
fn transform_axis(
    planner: &mut FftPlanner<f64>,
    data: &[Complex64],
    shape: &[usize],
    axis: usize,
    plan: &AxisPlan,
    h: f64,
) -> (Vec<Complex64>, Vec<usize>) {
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let m = plan.m;
    let mut new_shape = shape.to_vec();
    new_shape[axis] = m;
    let mut out = vec![Complex64::new(0.0, 0.0); outer * m * inner];
    let fft = planner.plan_fft_forward(m);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let phases: Vec<Complex64> = plan.duals.iter().map(|d| Complex64::cis(-plan.s0 * d / h) * plan.step).collect();
    for o in 0..outer {
        for i in 0..inner {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for (t, (&s, &w)) in plan.src.iter().zip(&plan.weights).enumerate() {
                buf[t] = data[(o * len + s) * inner + i] * w;
            }
            fft.process(&mut buf);
            for (j, &bin) in plan.bins.iter().enumerate() {
                out[(o * m + j) * inner + i] = buf[bin] * phases[j];
            }
        }
    }
    (out, new_shape)
}

/// Samples of a function on a tensor grid of the chart.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceField {
    pub h: f64,
    pub dim: usize,
    pub axes: Vec<AxisGrid>,
    /// Row-major, first axis slowest.
    pub samples: Vec<Complex64>,
}

impl PhaseSpaceField {
    /// `Tu` on the grid `x ∈` period cell (`nx` nodes), `ξ ∈ [−τ+ε, τ−ε]`
    /// (`nxi` nodes), axes ordered `x_1..x_n, ξ_1..ξ_n`.
    pub fn sample_t(u: &ModeSum, model: &ManifoldModel, nx: usize, nxi: usize, eps: f64) -> Result<Self> {
        let n = model.dim();
        if u.dim() != n {
            return Err(Error::Dimension(u.dim()));
        }
        let mut axes = Vec::new();
        for j in 0..n {
            axes.push(AxisGrid::periodic_x(j, nx));
        }
        for j in 0..n {
            axes.push(AxisGrid::chart_xi(j, model.tau(), eps, nxi));
        }
        Self::sample_fn(u.h(), n, axes, |p| eval_t(u, p))
    }

    /// Sample an arbitrary function of `(x, ξ)` on the given axes, which must
    /// list each of `x_1..x_n, ξ_1..ξ_n` exactly once.
    pub fn sample_fn<F: Fn(&TubePoint) -> Complex64>(h: f64, dim: usize, axes: Vec<AxisGrid>, f: F) -> Result<Self> {
        if axes.len() != 2 * dim {
            return Err(Error::Invalid("a phase-space field needs 2n axes".into()));
        }
        for a in &axes {
            if let Axis::X(_) = a.axis {
                if a.step >= PI * h {
                    return Err(Error::Underresolved(format!("x spacing {} is not below pi*h = {}", a.step, PI * h)));
                }
            }
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.len).collect();
        let total: usize = shape.iter().product();
        let mut samples = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..total {
            let mut p = TubePoint { dim, x: [0.0; 2], xi: [0.0; 2] };
            for (a, &i) in axes.iter().zip(&idx) {
                match a.axis {
                    Axis::X(j) => p.x[j] = a.coord(i),
                    Axis::Xi(j) => p.xi[j] = a.coord(i),
                }
            }
            let v = f(&p);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Invalid("non-finite sample".into()));
            }
            samples.push(v);
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Self { h, dim, axes, samples })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    /// CSV dump: `#`-prefixed header with `n`, `h` and one line per axis,
    /// then one `re,im` row per sample in row-major order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# n={} h={:.17e}", self.dim, self.h)?;
        for a in &self.axes {
            writeln!(
                w,
                "# axis={} start={:.17e} step={:.17e} len={} periodic={}",
                a.axis.label(),
                a.start,
                a.step,
                a.len,
                a.periodic
            )?;
        }
        writeln!(w, "re,im")?;
        for s in &self.samples {
            writeln!(w, "{:.17e},{:.17e}", s.re, s.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: &str| Error::Invalid(format!("malformed field dump: {m}"));
        let mut dim = 0;
        let mut h = 0.0;
        let mut axes = Vec::new();
        let mut samples = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            if let Some(head) = line.strip_prefix("# ") {
                let kv: BTreeMap<&str, &str> = head.split_whitespace().filter_map(|t| t.split_once('=')).collect();
                if let Some(a) = kv.get("axis") {
                    let get = |k: &str| kv.get(k).ok_or_else(|| bad(k));
                    axes.push(AxisGrid {
                        axis: Axis::parse(a).ok_or_else(|| bad("axis label"))?,
                        start: get("start")?.parse().map_err(|_| bad("start"))?,
                        step: get("step")?.parse().map_err(|_| bad("step"))?,
                        len: get("len")?.parse().map_err(|_| bad("len"))?,
                        periodic: get("periodic")?.parse().map_err(|_| bad("periodic"))?,
                    });
                } else {
                    dim = kv.get("n").and_then(|v| v.parse().ok()).ok_or_else(|| bad("n"))?;
                    h = kv.get("h").and_then(|v| v.parse().ok()).ok_or_else(|| bad("h"))?;
                }
            } else if line == "re,im" || line.is_empty() {
                continue;
            } else {
                let (a, b) = line.split_once(',').ok_or_else(|| bad("sample row"))?;
                samples.push(Complex64::new(a.parse().map_err(|_| bad("re"))?, b.parse().map_err(|_| bad("im"))?));
            }
        }
        let expect: usize = axes.iter().map(|a| a.len).product();
        if samples.len() != expect {
            return Err(bad("sample count"));
        }
        Ok(Self { h, dim, axes, samples })
    }
}

/// Windowed transform of one window placement: values on the tensor grid
/// of dual variables, row-major in the field's axis order.
#[derive(Clone, Debug)]
pub struct DualSlice {
    pub centers: Vec<f64>,
    pub duals: Vec<Vec<f64>>,
    pub values: Vec<Complex64>,
}

impl DualSlice {
    pub fn shape(&self) -> Vec<usize> {
        self.duals.iter().map(|d| d.len()).collect()
    }

    fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        for d in (0..shape.len()).rev() {
            idx[d] = flat % shape[d];
            flat /= shape[d];
        }
        idx
    }

    /// Index and modulus of the largest value.
    pub fn peak(&self) -> (Vec<usize>, f64) {
        let (i, v) =
            self.values
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        (self.unravel(i), v)
    }

    /// Moduli along `axis` with every other index fixed at `at`.
    pub fn line(&self, axis: usize, at: &[usize]) -> Vec<f64> {
        let shape = self.shape();
        let mut idx = at.to_vec();
        (0..shape[axis])
            .map(|i| {
                idx[axis] = i;
                let flat = idx.iter().zip(&shape).fold(0, |acc, (i, s)| acc * s + i);
                self.values[flat].norm()
            })
            .collect()
    }
}

/// `∫ e^{−i(x·x* + ξ·ξ*)/h} w(x − x_c, ξ − ξ_c) f(x, ξ) dx dξ` on a dual grid
/// whose spacing is at most `dual_step` along every windowed axis.
pub fn semiclassical_ft(
    field: &PhaseSpaceField,
    centers: &[f64],
    windows: &[Window],
    dual_step: f64,
) -> Result<DualSlice> {
    if centers.len() != field.axes.len() || windows.len() != field.axes.len() {
        return Err(Error::Invalid("one center and window per axis required".into()));
    }
    let mut planner = FftPlanner::new();
    let mut data = field.samples.clone();
    let mut shape = field.shape();
    let mut duals = Vec::new();
    for (a, grid) in field.axes.iter().enumerate() {
        let plan = plan_axis(grid, &windows[a], centers[a], field.h, dual_step)?;
        let (d, s) = transform_axis(&mut planner, &data, &shape, a, &plan, field.h);
        data = d;
        shape = s;
        duals.push(plan.duals.clone());
    }
    Ok(DualSlice { centers: centers.to_vec(), duals, values: data })
}

/// A product `coef · Π_a f_a(s_a)` of one-dimensional samples.
#[derive(Clone, Debug)]
pub struct SeparableField {
    pub h: f64,
    pub axes: Vec<AxisGrid>,
    pub factors: Vec<Vec<Complex64>>,
    pub coef: Complex64,
}

impl SeparableField {
    /// `Tu` for a single lattice mode, which factors as
    /// `c Π_j e^{ik_j x_j} e^{−(ξ_j − hk_j)²/2h}`.
    pub fn single_mode(u: &ModeSum, model: &ManifoldModel, nx: usize, nxi: usize, eps: f64) -> Result<Self> {
        if u.terms().len() != 1 {
            return Err(Error::Invalid("separable sampling needs a single mode".into()));
        }
        let m = u.terms()[0];
        let h = u.h();
        let n = model.dim();
        let mut axes = Vec::new();
        let mut factors = Vec::new();
        for j in 0..n {
            let g = AxisGrid::periodic_x(j, nx);
            factors.push(g.coords().iter().map(|x| Complex64::cis(m.k[j] as f64 * x)).collect());
            axes.push(g);
        }
        for j in 0..n {
            let g = AxisGrid::chart_xi(j, model.tau(), eps, nxi);
            let c = h * m.k[j] as f64;
            factors
                .push(g.coords().iter().map(|xi| Complex64::new((-(xi - c).powi(2) / (2.0 * h)).exp(), 0.0)).collect());
            axes.push(g);
        }
        Ok(Self { h, axes, factors, coef: m.c })
    }

    pub fn value(&self, idx: &[usize]) -> Complex64 {
        self.factors.iter().zip(idx).fold(self.coef, |acc, (f, &i)| acc * f[i])
    }
}

/// One placement along one axis of a separable transform.
#[derive(Clone, Debug)]
pub struct AxisSlice {
    pub center: f64,
    pub duals: Vec<f64>,
    pub values: Vec<Complex64>,
}

#[derive(Clone, Debug)]
enum DiagData {
    Dense(Vec<DualSlice>),
    Separable { coef: f64, per_axis: Vec<Vec<AxisSlice>> },
}

/// A point `(center; dual)` of a windowed transform above threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct WfPoint {
    pub base: Vec<f64>,
    pub dual: Vec<f64>,
    pub magnitude: f64,
}

/// Windowed transforms over a family of window placements.
#[derive(Clone, Debug)]
pub struct WfDiagnostic {
    pub axes: Vec<Axis>,
    pub threshold: f64,
    pub peak: f64,
    pub peak_point: Option<WfPoint>,
    data: DiagData,
}

impl WfDiagnostic {
    /// Transforms of a dense field for every combination of the per-axis
    /// window centers.
    pub fn dense(
        field: &PhaseSpaceField,
        centers: &[Vec<f64>],
        windows: &[Window],
        dual_step: f64,
        threshold: f64,
    ) -> Result<Self> {
        check_threshold(threshold)?;
        let combos = cartesian(centers);
        let mut slices = Vec::with_capacity(combos.len());
        for c in combos {
            slices.push(semiclassical_ft(field, &c, windows, dual_step)?);
        }
        let mut diag = Self {
            axes: field.axes.iter().map(|a| a.axis).collect(),
            threshold,
            peak: 0.0,
            peak_point: None,
            data: DiagData::Dense(slices),
        };
        diag.locate_peak();
        Ok(diag)
    }

    /// Transforms of a separable field; each axis is handled independently.
    pub fn separable(
        field: &SeparableField,
        centers: &[Vec<f64>],
        windows: &[Window],
        dual_step: f64,
        threshold: f64,
    ) -> Result<Self> {
        check_threshold(threshold)?;
        if centers.len() != field.axes.len() || windows.len() != field.axes.len() {
            return Err(Error::Invalid("one center list and window per axis required".into()));
        }
        let mut planner = FftPlanner::new();
        let mut per_axis = Vec::new();
        for (a, grid) in field.axes.iter().enumerate() {
            let mut slices = Vec::new();
            for &c in &centers[a] {
                let plan = plan_axis(grid, &windows[a], c, field.h, dual_step)?;
                let (values, _) = transform_axis(&mut planner, &field.factors[a], &[grid.len], 0, &plan, field.h);
                slices.push(AxisSlice { center: c, duals: plan.duals.clone(), values });
            }
            per_axis.push(slices);
        }
        let mut diag = Self {
            axes: field.axes.iter().map(|a| a.axis).collect(),
            threshold,
            peak: 0.0,
            peak_point: None,
            data: DiagData::Separable { coef: field.coef.norm(), per_axis },
        };
        diag.locate_peak();
        Ok(diag)
    }

    pub fn empty(axes: Vec<Axis>, threshold: f64) -> Self {
        Self { axes, threshold, peak: 0.0, peak_point: None, data: DiagData::Dense(Vec::new()) }
    }

    fn locate_peak(&mut self) {
        match &self.data {
            DiagData::Dense(slices) => {
                for s in slices {
                    let (idx, v) = s.peak();
                    if v > self.peak {
                        self.peak = v;
                        self.peak_point = Some(WfPoint {
                            base: s.centers.clone(),
                            dual: idx.iter().enumerate().map(|(a, &i)| s.duals[a][i]).collect(),
                            magnitude: v,
                        });
                    }
                }
            }
            DiagData::Separable { coef, per_axis } => {
                let mut base = Vec::new();
                let mut dual = Vec::new();
                let mut mag = *coef;
                for slices in per_axis {
                    let mut best = (0.0, 0.0, -1.0);
                    for s in slices {
                        for (d, v) in s.duals.iter().zip(&s.values) {
                            if v.norm() > best.2 {
                                best = (s.center, *d, v.norm());
                            }
                        }
                    }
                    base.push(best.0);
                    dual.push(best.1);
                    mag *= best.2.max(0.0);
                }
                if !per_axis.is_empty() && mag > 0.0 {
                    self.peak = mag;
                    self.peak_point = Some(WfPoint { base, dual, magnitude: mag });
                }
            }
        }
    }

    /// The dense slices, if any.
    pub fn slices(&self) -> &[DualSlice] {
        match &self.data {
            DiagData::Dense(s) => s,
            DiagData::Separable { .. } => &[],
        }
    }

    /// Visit every point whose modulus is at least `rel·peak`.
    pub fn for_each_above<F: FnMut(&[f64], &[f64], f64)>(&self, rel: f64, mut f: F) {
        if self.peak <= 0.0 {
            return;
        }
        let cut = rel * self.peak;
        match &self.data {
            DiagData::Dense(slices) => {
                for s in slices {
                    for (flat, v) in s.values.iter().enumerate() {
                        let m = v.norm();
                        if m >= cut {
                            let idx = s.unravel(flat);
                            let dual: Vec<f64> = idx.iter().enumerate().map(|(a, &i)| s.duals[a][i]).collect();
                            f(&s.centers, &dual, m);
                        }
                    }
                }
            }
            DiagData::Separable { coef, per_axis } => {
                // Per-axis candidates sorted by modulus; a branch is cut as soon
                // as even the best completion drops below threshold.
                let mut cands: Vec<Vec<(f64, f64, f64)>> = Vec::new();
                for slices in per_axis {
                    let mut c: Vec<(f64, f64, f64)> = slices
                        .iter()
                        .flat_map(|s| s.duals.iter().zip(&s.values).map(move |(d, v)| (s.center, *d, v.norm())))
                        .collect();
                    c.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
                    cands.push(c);
                }
                let best: Vec<f64> = cands.iter().map(|c| c.first().map(|t| t.2).unwrap_or(0.0)).collect();
                let mut tail = vec![1.0; best.len() + 1];
                for a in (0..best.len()).rev() {
                    tail[a] = tail[a + 1] * best[a];
                }
                let k = cands.len();
                let mut base = vec![0.0; k];
                let mut dual = vec![0.0; k];
                #[allow(clippy::too_many_arguments)]
                fn rec<F: FnMut(&[f64], &[f64], f64)>(
                    a: usize,
                    running: f64,
                    cands: &[Vec<(f64, f64, f64)>],
                    tail: &[f64],
                    cut: f64,
                    base: &mut Vec<f64>,
                    dual: &mut Vec<f64>,
                    f: &mut F,
                ) {
                    if a == cands.len() {
                        f(base, dual, running);
                        return;
                    }
                    for &(c, d, m) in &cands[a] {
                        if running * m * tail[a + 1] < cut {
                            break;
                        }
                        base[a] = c;
                        dual[a] = d;
                        rec(a + 1, running * m, cands, tail, cut, base, dual, f);
                    }
                }
                rec(0, *coef, &cands, &tail, cut, &mut base, &mut dual, &mut f);
            }
        }
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("threshold must lie in (0, 1), got {t}")))
    }
}

fn cartesian(lists: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for l in lists {
        let mut next = Vec::with_capacity(out.len() * l.len());
        for prefix in &out {
            for &v in l {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

pub type DistanceFn<'a> = dyn Fn(&[Axis], &[f64], &[f64]) -> f64 + 'a;

/// Reference sets for containment statistics.
pub enum ModelSet<'a> {
    /// `{|ξ| = 1, ξ* = 0, x* = ξ}`.
    W,
    /// `{|ξ| = 1, ξ* = 0, |x*| = 1}`.
    Crude,
    /// Any distance function of `(axes, base, dual)`.
    Custom(&'a DistanceFn<'a>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContainmentStats {
    pub points: usize,
    pub max_distance: f64,
    pub mean_distance: f64,
    pub worst: Option<(Vec<f64>, Vec<f64>)>,
}

fn split_axes(axes: &[Axis], base: &[f64], dual: &[f64]) -> ([f64; 2], [f64; 2], [f64; 2], usize) {
    let mut xi = [0.0; 2];
    let mut xs = [0.0; 2];
    let mut xis = [0.0; 2];
    let mut n = 0;
    for (a, ax) in axes.iter().enumerate() {
        match *ax {
            Axis::X(j) => {
                xs[j] = dual[a];
                n = n.max(j + 1);
            }
            Axis::Xi(j) => {
                xi[j] = base[a];
                xis[j] = dual[a];
                n = n.max(j + 1);
            }
        }
    }
    (xi, xs, xis, n)
}

/// Distance from `(ξ; x*, ξ*)` to `W`; `x` is unconstrained.
///
/// With `m = (ξ + x*)/2` the minimum over unit `ω` of `|ξ−ω|² + |x*−ω|²`
/// is `2(|m| − 1)² + |ξ − x*|²/2`.
pub fn distance_to_w(axes: &[Axis], base: &[f64], dual: &[f64]) -> f64 {
    let (xi, xs, xis, n) = split_axes(axes, base, dual);
    let mut m2 = 0.0;
    let mut diff2 = 0.0;
    let mut s2 = 0.0;
    for j in 0..n {
        let m = 0.5 * (xi[j] + xs[j]);
        m2 += m * m;
        diff2 += (xi[j] - xs[j]).powi(2);
        s2 += xis[j] * xis[j];
    }
    (2.0 * (m2.sqrt() - 1.0).powi(2) + 0.5 * diff2 + s2).sqrt()
}

pub fn distance_to_crude(axes: &[Axis], base: &[f64], dual: &[f64]) -> f64 {
    let (xi, xs, xis, n) = split_axes(axes, base, dual);
    let norm = |v: &[f64; 2]| (0..n).map(|j| v[j] * v[j]).sum::<f64>().sqrt();
    let s2: f64 = (0..n).map(|j| xis[j] * xis[j]).sum();
    ((norm(&xi) - 1.0).powi(2) + (norm(&xs) - 1.0).powi(2) + s2).sqrt()
}

/// Largest and mean distance from the super-threshold points to a model set.
pub fn wf_containment(diag: &WfDiagnostic, model: &ModelSet<'_>) -> ContainmentStats {
    wf_containment_at(diag, model, diag.threshold)
}

pub fn wf_containment_at(diag: &WfDiagnostic, model: &ModelSet<'_>, rel: f64) -> ContainmentStats {
    let mut stats = ContainmentStats { points: 0, max_distance: 0.0, mean_distance: 0.0, worst: None };
    let mut sum = 0.0;
    diag.for_each_above(rel, |base, dual, _| {
        let d = match model {
            ModelSet::W => distance_to_w(&diag.axes, base, dual),
            ModelSet::Crude => distance_to_crude(&diag.axes, base, dual),
            ModelSet::Custom(f) => f(&diag.axes, base, dual),
        };
        stats.points += 1;
        sum += d;
        if d > stats.max_distance || stats.worst.is_none() {
            stats.max_distance = d;
            stats.worst = Some((base.to_vec(), dual.to_vec()));
        }
    });
    if stats.points > 0 {
        stats.mean_distance = sum / stats.points as f64;
    }
    stats
}

/// Window centers `c, c ± step, …` covering `[lo, hi]`.
pub fn centers_between(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi < lo {
        return Vec::new();
    }
    let n = ((hi - lo) / step).floor() as usize;
    let off = 0.5 * ((hi - lo) - n as f64 * step);
    (0..=n).map(|i| lo + off + i as f64 * step).collect()
}
