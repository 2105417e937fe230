//! Microlocal side of the restriction problem: coordinates on Σ, the flow-out
//! `W_Σ`, windowed transforms of `T_Σu` and the multiplier property.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbi::{
    centers_between, wf_containment, Axis, AxisGrid, ContainmentStats, ModelSet, SeparableField, WfDiagnostic, Window,
};
use crate::geometry::{wrap_period, ManifoldModel, TubePoint, TWO_PI};
use crate::hypersurface::{intersect_sphere_bundle, CurveResolution, HypersurfaceSpec, SurfaceKind};
use crate::spectral::ModeSum;

#[derive(Clone, Debug, PartialEq, Serialize)]
enum ChartKind {
    /// `x_axis = x0`.
    Vertical { axis: usize, x0: f64 },
    /// `x_n = ⟨a, ξ⟩ + c`.
    Tilted { a: [f64; 2], c: f64 },
}

/// Global coordinates on Σ for the flat members of the catalog: the free
/// `x` coordinates followed by `ξ_1..ξ_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaChart {
    pub dim: usize,
    pub axes: Vec<Axis>,
    kind: ChartKind,
}

impl SigmaChart {
    pub fn new(spec: &HypersurfaceSpec) -> Result<Self> {
        let n = spec.dim;
        let (kind, fixed) = match &spec.kind {
            SurfaceKind::Vertical { e, c } => {
                let nz: Vec<usize> = (0..n).filter(|&j| e[j] != 0).collect();
                if nz.len() != 1 || e[nz[0]].abs() != 1 {
                    return Err(Error::UnsupportedSurface(format!(
                        "vertical surface with e = {e:?} is not a coordinate slice"
                    )));
                }
                let i = nz[0];
                (ChartKind::Vertical { axis: i, x0: wrap_period(c / e[i] as f64) }, i)
            }
            SurfaceKind::Tilted { a, c } => (ChartKind::Tilted { a: *a, c: *c }, n - 1),
            SurfaceKind::TubeGraph { .. } => {
                return Err(Error::UnsupportedSurface("tube graphs have no flat Σ chart".into()))
            }
        };
        let mut axes: Vec<Axis> = (0..n).filter(|&j| j != fixed).map(Axis::X).collect();
        axes.extend((0..n).map(Axis::Xi));
        Ok(Self { dim: n, axes, kind })
    }

    fn fixed_axis(&self) -> usize {
        match self.kind {
            ChartKind::Vertical { axis, .. } => axis,
            ChartKind::Tilted { .. } => self.dim - 1,
        }
    }

    pub fn embed(&self, y: &[f64]) -> TubePoint {
        let mut p = TubePoint { dim: self.dim, x: [0.0; 2], xi: [0.0; 2] };
        for (ax, &v) in self.axes.iter().zip(y) {
            match *ax {
                Axis::X(j) => p.x[j] = v,
                Axis::Xi(j) => p.xi[j] = v,
            }
        }
        let f = self.fixed_axis();
        p.x[f] = match self.kind {
            ChartKind::Vertical { x0, .. } => x0,
            ChartKind::Tilted { a, c } => wrap_period((0..self.dim).map(|j| a[j] * p.xi[j]).sum::<f64>() + c),
        };
        p
    }

    pub fn coords(&self, p: &TubePoint) -> Vec<f64> {
        self.axes
            .iter()
            .map(|ax| match *ax {
                Axis::X(j) => p.x[j],
                Axis::Xi(j) => p.xi[j],
            })
            .collect()
    }

    /// Pull an ambient covector `(x*, ξ*)` back to Σ coordinates.
    pub fn pullback(&self, xs: &[f64; 2], xis: &[f64; 2]) -> Vec<f64> {
        let f = self.fixed_axis();
        self.axes
            .iter()
            .map(|ax| match *ax {
                Axis::X(j) => xs[j],
                Axis::Xi(j) => match self.kind {
                    ChartKind::Vertical { .. } => xis[j],
                    ChartKind::Tilted { a, .. } => xis[j] + xs[f] * a[j],
                },
            })
            .collect()
    }

    /// Σ-duals of the point of `W` over `ξ = ω`: the pullback of `(ω, 0)`.
    pub fn w_duals(&self, omega: &[f64; 2]) -> Vec<f64> {
        self.pullback(omega, &[0.0; 2])
    }

    /// The `W_Σ` dual of axis `a` as `scale · y_src`, or `None` when it is 0.
    fn w_source(&self, a: usize) -> Option<(usize, f64)> {
        let xi_index = |j: usize| self.axes.iter().position(|ax| *ax == Axis::Xi(j)).unwrap();
        match (self.axes[a], &self.kind) {
            (Axis::X(j), _) => Some((xi_index(j), 1.0)),
            (Axis::Xi(_), ChartKind::Vertical { .. }) => None,
            (Axis::Xi(j), ChartKind::Tilted { a, .. }) => Some((xi_index(self.dim - 1), a[j])),
        }
    }

    /// Constant factor of `T_Σ e^{i⟨k,x⟩}` (without the coefficient).
    pub fn mode_const(&self, k: &[i64; 2]) -> Complex64 {
        match self.kind {
            ChartKind::Vertical { axis, x0 } => Complex64::cis(k[axis] as f64 * x0),
            ChartKind::Tilted { c, .. } => Complex64::cis(k[self.dim - 1] as f64 * c),
        }
    }

    /// One-dimensional factor of `T_Σ e^{i⟨k,x⟩}` along axis `a`.
    pub fn mode_factor(&self, k: &[i64; 2], h: f64, a: usize, s: f64) -> Complex64 {
        match self.axes[a] {
            Axis::X(j) => Complex64::cis(k[j] as f64 * s),
            Axis::Xi(j) => {
                let g = (-(s - h * k[j] as f64).powi(2) / (2.0 * h)).exp();
                match self.kind {
                    ChartKind::Vertical { .. } => Complex64::new(g, 0.0),
                    ChartKind::Tilted { a, .. } => Complex64::from_polar(g, k[self.dim - 1] as f64 * a[j] * s),
                }
            }
        }
    }
}

/// Distance from a Σ-chart point `(y; η)` to `W_Σ`, minimizing
/// `|ξ − ω|² + |η − η_W(ω)|²` over unit `ω`.
pub fn distance_to_w_sigma(chart: &SigmaChart, base: &[f64], dual: &[f64]) -> f64 {
    let mut xi = [0.0; 2];
    for (ax, &v) in chart.axes.iter().zip(base) {
        if let Axis::Xi(j) = *ax {
            xi[j] = v;
        }
    }
    // η_W is linear in ω, so the cost is a quadratic form on the circle.
    let m0 = chart.w_duals(&[1.0, 0.0]);
    let m1 = chart.w_duals(&[0.0, 1.0]);
    let (mut q00, mut q01, mut q11) = (1.0, 0.0, 1.0);
    let (mut b0, mut b1) = (xi[0], xi[1]);
    let mut c = xi[0] * xi[0] + xi[1] * xi[1];
    for ((d, a0), a1) in dual.iter().zip(&m0).zip(&m1) {
        q00 += a0 * a0;
        q01 += a0 * a1;
        q11 += a1 * a1;
        b0 += d * a0;
        b1 += d * a1;
        c += d * d;
    }
    let cost = |om: [f64; 2]| {
        c + q00 * om[0] * om[0] + 2.0 * q01 * om[0] * om[1] + q11 * om[1] * om[1] - 2.0 * (b0 * om[0] + b1 * om[1])
    };
    if chart.dim == 1 {
        return cost([1.0, 0.0]).min(cost([-1.0, 0.0])).sqrt();
    }
    let at = |t: f64| cost([t.cos(), t.sin()]);
    let steps = 90;
    let dt = TWO_PI / steps as f64;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..steps {
        let t = i as f64 * dt;
        let v = at(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let (mut lo, mut hi) = (best.0 - dt, best.0 + dt);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - gr * (hi - lo);
        let b = lo + gr * (hi - lo);
        if at(a) < at(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    at(0.5 * (lo + hi)).min(best.1).max(0.0).sqrt()
}

/// A point of the flow-out `exp(tX_F)π_Σ(W)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowPoint {
    pub t: f64,
    pub point: TubePoint,
    /// `(x*, ξ*)` in ambient coordinates, `x*` first.
    pub ambient_dual: Vec<f64>,
    pub sigma_coords: Vec<f64>,
    pub sigma_duals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowOutSet {
    pub times: Vec<f64>,
    pub base: Vec<FlowPoint>,
    pub points: Vec<FlowPoint>,
}

/// Sample `W_Σ`. The Hamilton flow of `F` moves only the covector, by
/// `−t∇F`, which pulls back to zero on Σ; the Σ-duals are therefore the
/// same for every flow time.
pub fn flow_out_set(spec: &HypersurfaceSpec, res: &CurveResolution, n_times: usize) -> Result<FlowOutSet> {
    if n_times < 2 {
        return Err(Error::Invalid("need at least two flow times".into()));
    }
    let chart = SigmaChart::new(spec)?;
    let grid = intersect_sphere_bundle(spec, res)?;
    let n = spec.dim;
    let times: Vec<f64> = (0..n_times).map(|i| -1.0 + 2.0 * i as f64 / (n_times - 1) as f64).collect();
    let make = |p: &TubePoint, t: f64| {
        let g = spec.grad(p);
        let mut xs = [0.0; 2];
        let mut xis = [0.0; 2];
        for j in 0..n {
            xs[j] = p.xi[j] - t * g.dx[j];
            xis[j] = -t * g.dxi[j];
        }
        let mut amb = xs[..n].to_vec();
        amb.extend_from_slice(&xis[..n]);
        FlowPoint {
            t,
            point: *p,
            ambient_dual: amb,
            sigma_coords: chart.coords(p),
            sigma_duals: chart.pullback(&xs, &xis),
        }
    };
    let base: Vec<FlowPoint> = grid.nodes.iter().map(|nd| make(&nd.p, 0.0)).collect();
    let mut points = Vec::with_capacity(base.len() * n_times);
    for nd in &grid.nodes {
        for &t in &times {
            points.push(make(&nd.p, t));
        }
    }
    Ok(FlowOutSet { times, base, points })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WfSigmaParams {
    /// Nodes per period on free `x` axes.
    pub nx: usize,
    /// Nodes on each `ξ` axis over `[−τ+ε, τ−ε]`.
    pub nxi: usize,
    pub eps: f64,
    /// Support radius of the `ξ` windows.
    pub window_radius: f64,
    pub center_step: f64,
    pub dual_step: f64,
    pub threshold: f64,
}

impl WfSigmaParams {
    /// Windows of radius `2.5√h` stepped by `√h/4`, grids fine enough for `πh`.
    pub fn for_h(h: f64, tau: f64) -> Self {
        let eps = 0.02;
        let step = h.min(h.sqrt() / 8.0);
        Self {
            nx: ((4.0 / h).ceil() as usize).max(64),
            nxi: (2.0 * (tau - eps) / step).ceil() as usize + 1,
            eps,
            window_radius: 2.5 * h.sqrt(),
            center_step: 0.25 * h.sqrt(),
            dual_step: 0.25 * h.sqrt(),
            threshold: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaContainment {
    pub stats: ContainmentStats,
    /// Largest `||ξ| − 1|` over super-threshold window centers.
    pub max_shell_distance: f64,
    pub peak: f64,
}

/// Windowed transforms of `T_Σu` for a single mode and their distance to
/// `W_Σ`.
pub fn wf_sigma_containment(
    u: &ModeSum,
    spec: &HypersurfaceSpec,
    model: &ManifoldModel,
    params: &WfSigmaParams,
) -> Result<SigmaContainment> {
    if u.terms().len() != 1 {
        return Err(Error::Invalid("Σ containment is computed for single modes".into()));
    }
    let chart = SigmaChart::new(spec)?;
    let h = u.h();
    let m = u.terms()[0];
    let mut axes = Vec::new();
    let mut factors = Vec::new();
    let mut centers = Vec::new();
    let mut windows = Vec::new();
    let r = params.window_radius;
    for (a, ax) in chart.axes.iter().enumerate() {
        let g = match *ax {
            Axis::X(j) => {
                centers.push(vec![0.0]);
                windows.push(Window::Full);
                AxisGrid::periodic_x(j, params.nx)
            }
            Axis::Xi(j) => {
                let g = AxisGrid::chart_xi(j, model.tau(), params.eps, params.nxi);
                centers.push(centers_between(g.start + r, g.end() - r, params.center_step));
                windows.push(Window::bump(r));
                g
            }
        };
        factors.push(g.coords().iter().map(|&s| chart.mode_factor(&m.k, h, a, s)).collect());
        axes.push(g);
    }
    let field = SeparableField { h, axes, factors, coef: m.c * chart.mode_const(&m.k) };
    let diag = WfDiagnostic::separable(&field, &centers, &windows, params.dual_step, params.threshold)?;
    let dist = |_: &[Axis], base: &[f64], dual: &[f64]| distance_to_w_sigma(&chart, base, dual);
    let stats = wf_containment(&diag, &ModelSet::Custom(&dist));
    let mut shell: f64 = 0.0;
    diag.for_each_above(params.threshold, |base, _, _| {
        let r2: f64 =
            chart.axes.iter().zip(base).filter_map(|(ax, v)| matches!(ax, Axis::Xi(_)).then_some(v * v)).sum();
        shell = shell.max((r2.sqrt() - 1.0).abs());
    });
    Ok(SigmaContainment { stats, max_shell_distance: shell, peak: diag.peak })
}

/// A smooth one-dimensional profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    One,
    /// `1 + amp·cos(freq·t)`.
    Cos {
        amp: f64,
        freq: f64,
    },
    /// `exp(1 − 1/(1 − ((t−c)/r)²))` inside the support, else 0.
    Bump {
        center: f64,
        radius: f64,
    },
    /// `exp(−((t−c)/w)²/2)`.
    Gaussian {
        center: f64,
        width: f64,
    },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::One => 1.0,
            Profile::Cos { amp, freq } => 1.0 + amp * (freq * t).cos(),
            Profile::Bump { center, radius } => {
                let s = (t - center) / radius;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
            Profile::Gaussian { center, width } => (-0.5 * ((t - center) / width).powi(2)).exp(),
        }
    }
}

/// `coef · Π_a position_a(y_a) dual_a(η_a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolTerm {
    pub coef: f64,
    pub position: Vec<Profile>,
    pub dual: Vec<Profile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableSymbol {
    pub terms: Vec<SymbolTerm>,
}

impl SeparableSymbol {
    pub fn one(axes: usize) -> Self {
        Self {
            terms: vec![SymbolTerm { coef: 1.0, position: vec![Profile::One; axes], dual: vec![Profile::One; axes] }],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MultiplierReport {
    pub h: f64,
    /// `‖Q(h)T_Σu − q_Σ T_Σu‖ / ‖T_Σu‖`.
    pub residual: f64,
    /// `‖T_Σu‖` over the Σ chart (fibre axes extended to the line).
    pub norm: f64,
}

struct AxisOps {
    nodes: Vec<f64>,
    weight: f64,
    /// Dual variable `η` for each FFT bin of the padded length.
    etas: Vec<f64>,
    pad: usize,
}

impl AxisOps {
    fn periodic(h: f64) -> Self {
        let n = ((4.0 / h) as usize + 64).next_power_of_two();
        let nodes = (0..n).map(|i| TWO_PI * i as f64 / n as f64).collect();
        let etas = (0..n).map(|j| h * signed_bin(j, n) as f64).collect();
        Self { nodes, weight: TWO_PI / n as f64, etas, pad: n }
    }

    fn line(h: f64) -> Self {
        let half = 1.0 + 14.0 * h.sqrt();
        let step = (0.5 * h).min(h.sqrt() / 8.0);
        let n = (2.0 * half / step).ceil() as usize + 1;
        let nodes: Vec<f64> = (0..n).map(|i| -half + i as f64 * step).collect();
        let pad = (2 * n).next_power_of_two();
        let etas = (0..pad).map(|j| TWO_PI * h * signed_bin(j, pad) as f64 / (pad as f64 * step)).collect();
        Self { nodes, weight: step, etas, pad }
    }

    fn apply(&self, planner: &mut FftPlanner<f64>, f: &[Complex64], b: &Profile) -> Vec<Complex64> {
        if *b == Profile::One {
            return f.to_vec();
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.pad];
        buf[..f.len()].copy_from_slice(f);
        planner.plan_fft_forward(self.pad).process(&mut buf);
        for (v, eta) in buf.iter_mut().zip(&self.etas) {
            *v *= b.eval(*eta);
        }
        planner.plan_fft_inverse(self.pad).process(&mut buf);
        let s = 1.0 / self.pad as f64;
        buf[..f.len()].iter().map(|v| v * s).collect()
    }
}

fn signed_bin(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Residual of `Q(h)T_Σu ≈ q_Σ T_Σu` for a separable symbol under left
/// quantization `a(y)b(hD_y)` in the Σ chart, with `q_Σ` the symbol evaluated
/// at the `W_Σ` duals. The `ξ` axes are extended to the whole line, where
/// `T_Σu` is Gaussian.
pub fn multiplier_residual(u: &ModeSum, spec: &HypersurfaceSpec, symbol: &SeparableSymbol) -> Result<MultiplierReport> {
    let chart = SigmaChart::new(spec)?;
    let d = chart.axes.len();
    for t in &symbol.terms {
        if t.position.len() != d || t.dual.len() != d {
            return Err(Error::Invalid(format!("symbol terms need {d} position and dual profiles")));
        }
    }
    let h = u.h();
    let ops: Vec<AxisOps> = chart
        .axes
        .iter()
        .map(|ax| match ax {
            Axis::X(_) => AxisOps::periodic(h),
            Axis::Xi(_) => AxisOps::line(h),
        })
        .collect();
    let mut planner = FftPlanner::new();
    // Separable vectors: (coefficient, per-axis samples).
    let mut residual_terms: Vec<(Complex64, Vec<Vec<Complex64>>)> = Vec::new();
    let mut v_terms: Vec<(Complex64, Vec<Vec<Complex64>>)> = Vec::new();
    for m in u.terms() {
        let base: Vec<Vec<Complex64>> =
            (0..d).map(|a| ops[a].nodes.iter().map(|&s| chart.mode_factor(&m.k, h, a, s)).collect()).collect();
        let c = m.c * chart.mode_const(&m.k);
        v_terms.push((c, base.clone()));
        for t in &symbol.terms {
            let mut q_factors = Vec::with_capacity(d);
            for a in 0..d {
                let bf = ops[a].apply(&mut planner, &base[a], &t.dual[a]);
                q_factors.push(ops[a].nodes.iter().zip(bf).map(|(&s, v)| v * t.position[a].eval(s)).collect());
            }
            residual_terms.push((c * t.coef, q_factors));
            let mut coef = c * t.coef;
            let mut s_factors: Vec<Vec<Complex64>> = (0..d)
                .map(|a| ops[a].nodes.iter().zip(&base[a]).map(|(&s, v)| v * t.position[a].eval(s)).collect())
                .collect();
            for b in 0..d {
                match chart.w_source(b) {
                    None => coef *= t.dual[b].eval(0.0),
                    Some((src, scale)) => {
                        for (v, &s) in s_factors[src].iter_mut().zip(&ops[src].nodes) {
                            *v *= t.dual[b].eval(scale * s);
                        }
                    }
                }
            }
            residual_terms.push((-coef, s_factors));
        }
    }
    let norm_sq = separable_norm_sq(&v_terms, &ops);
    if !(norm_sq > 0.0) {
        return Err(Error::Degenerate("T_Σu vanishes".into()));
    }
    let res_sq = separable_norm_sq(&residual_terms, &ops).max(0.0);
    Ok(MultiplierReport { h, residual: (res_sq / norm_sq).sqrt(), norm: norm_sq.sqrt() })
}

fn separable_norm_sq(terms: &[(Complex64, Vec<Vec<Complex64>>)], ops: &[AxisOps]) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (ci, fi) in terms {
        for (cj, fj) in terms {
            let mut prod = ci * cj.conj();
            for (a, op) in ops.iter().enumerate() {
                let ip: Complex64 = fi[a].iter().zip(&fj[a]).map(|(x, y)| x * y.conj()).sum();
                prod *= ip * op.weight;
            }
            s += prod;
        }
    }
    s.re
}
