//! Catalog hypersurfaces `Σ = {F = 0}` of the tube chart, their normal data,
//! and quadrature grids on `Σ` and on `Σ ∩ S*M`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{apply_j, grad_rho, nearest_image, wrap_period, ManifoldModel, TangentVector, TubePoint, TWO_PI};
use crate::quad;
use crate::spectral::Jet;

const GRAD_EPS: f64 = 1e-12;
const TANGENCY_EPS: f64 = 1e-8;
const DIAMOND_TOL: f64 = 1e-12;

/// `Σ_m (a_m cos⟨m,x⟩ + b_m sin⟨m,x⟩)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub terms: Vec<TrigTerm>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub m: [i64; 2],
    pub cos: f64,
    pub sin: f64,
}

impl TrigPoly {
    pub fn cos_x1() -> Self {
        Self { terms: vec![TrigTerm { m: [1, 0], cos: 1.0, sin: 0.0 }] }
    }

    fn phase(t: &TrigTerm, x: &[f64; 2]) -> f64 {
        t.m[0] as f64 * x[0] + t.m[1] as f64 * x[1]
    }

    pub fn value(&self, x: &[f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let s = Self::phase(t, x);
                t.cos * s.cos() + t.sin * s.sin()
            })
            .sum()
    }

    pub fn grad(&self, x: &[f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for t in &self.terms {
            let s = Self::phase(t, x);
            let d = -t.cos * s.sin() + t.sin * s.cos();
            g[0] += t.m[0] as f64 * d;
            g[1] += t.m[1] as f64 * d;
        }
        g
    }

    pub fn hess(&self, x: &[f64; 2]) -> [[f64; 2]; 2] {
        let mut hm = [[0.0; 2]; 2];
        for t in &self.terms {
            let s = Self::phase(t, x);
            let d2 = -(t.cos * s.cos() + t.sin * s.sin());
            for i in 0..2 {
                for j in 0..2 {
                    hm[i][j] += (t.m[i] * t.m[j]) as f64 * d2;
                }
            }
        }
        hm
    }

    /// Upper bound for `|g|`.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.abs() + t.sin.abs()).sum()
    }

    /// Upper bound for `|∇g|`.
    pub fn grad_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.cos.abs() + t.sin.abs()) * ((t.m[0] * t.m[0] + t.m[1] * t.m[1]) as f64).sqrt())
            .sum()
    }

    fn depends_on_x2(&self) -> bool {
        self.terms.iter().any(|t| t.m[1] != 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurfaceKind {
    /// `F = ⟨e, x⟩ − c`.
    Vertical { e: [i64; 2], c: f64 },
    /// `F = x_n − ⟨a, ξ⟩ − c`.
    Tilted { a: [f64; 2], c: f64 },
    /// `F = |ξ|² − 1 − δ g(x)`.
    TubeGraph { delta: f64, g: TrigPoly },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypersurfaceSpec {
    pub dim: usize,
    pub kind: SurfaceKind,
    /// `+1`: ν points towards increasing F.
    pub orientation: f64,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl HypersurfaceSpec {
    pub fn vertical(dim: usize, e: &[i64], c: f64) -> Result<Self> {
        let mut ee = [0i64; 2];
        if e.len() != dim {
            return Err(Error::Invalid("e must have n components".into()));
        }
        ee[..dim].copy_from_slice(e);
        if gcd(ee[0], ee[1]) != 1 {
            return Err(Error::Degenerate(format!("e = {ee:?} must be a primitive lattice vector")));
        }
        Self::checked(dim, SurfaceKind::Vertical { e: ee, c })
    }

    pub fn tilted(dim: usize, a: &[f64], c: f64) -> Result<Self> {
        let mut aa = [0.0; 2];
        if a.len() != dim {
            return Err(Error::Invalid("a must have n components".into()));
        }
        aa[..dim].copy_from_slice(a);
        Self::checked(dim, SurfaceKind::Tilted { a: aa, c })
    }

    pub fn tube_graph(dim: usize, delta: f64, g: TrigPoly) -> Result<Self> {
        if delta.abs() >= 1.0 || delta.abs() * g.sup_bound() >= 1.0 {
            return Err(Error::Degenerate("need |δ g| < 1 so that the graph stays off the zero section".into()));
        }
        if dim == 1 && g.depends_on_x2() {
            return Err(Error::Invalid("g depends on x2 on the circle".into()));
        }
        Self::checked(dim, SurfaceKind::TubeGraph { delta, g })
    }

    fn checked(dim: usize, kind: SurfaceKind) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        Ok(Self { dim, kind, orientation: 1.0 })
    }

    pub fn with_orientation(mut self, sign: f64) -> Self {
        self.orientation = sign.signum();
        self
    }

    /// A random point of `Σ`, uniform in the natural parameters. The fiber
    /// radius is drawn from `radii` wherever `Σ` does not fix it.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, radii: (f64, f64)) -> TubePoint {
        let r: f64 = rng.random_range(radii.0..radii.1);
        let a: f64 = rng.random_range(0.0..TWO_PI);
        let s: f64 = rng.random_range(0.0..TWO_PI);
        let t: f64 = rng.random_range(0.0..TWO_PI);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        match (&self.kind, self.dim) {
            (SurfaceKind::Vertical { e, c }, 1) => TubePoint::circle(wrap_period(c / e[0] as f64), sign * r),
            (SurfaceKind::Vertical { e, c }, _) => {
                let en2 = (e[0] * e[0] + e[1] * e[1]) as f64;
                let x = [c * e[0] as f64 / en2 - s * e[1] as f64, c * e[1] as f64 / en2 + s * e[0] as f64];
                TubePoint::torus([wrap_period(x[0]), wrap_period(x[1])], [r * a.cos(), r * a.sin()])
            }
            (SurfaceKind::Tilted { a: tilt, c }, 1) => {
                let xi = sign * r;
                TubePoint::circle(wrap_period(tilt[0] * xi + c), xi)
            }
            (SurfaceKind::Tilted { a: tilt, c }, _) => {
                let xi = [r * a.cos(), r * a.sin()];
                TubePoint::torus([s, wrap_period(tilt[0] * xi[0] + tilt[1] * xi[1] + c)], xi)
            }
            (SurfaceKind::TubeGraph { delta, g }, 1) => {
                TubePoint::circle(s, sign * (1.0 + delta * g.value(&[s, 0.0])).sqrt())
            }
            (SurfaceKind::TubeGraph { delta, g }, _) => {
                let rr = (1.0 + delta * g.value(&[s, t])).sqrt();
                TubePoint::torus([s, t], [rr * a.cos(), rr * a.sin()])
            }
        }
    }

    /// `F(p)`, with periodic kinds reduced to the nearest image.
    pub fn value(&self, p: &TubePoint) -> f64 {
        let n = self.dim;
        match &self.kind {
            SurfaceKind::Vertical { e, c } => nearest_image((0..n).map(|j| e[j] as f64 * p.x[j]).sum::<f64>() - c),
            SurfaceKind::Tilted { a, c } => nearest_image(p.x[n - 1] - (0..n).map(|j| a[j] * p.xi[j]).sum::<f64>() - c),
            SurfaceKind::TubeGraph { delta, g } => p.xi_norm2() - 1.0 - delta * g.value(&p.x),
        }
    }

    pub fn grad(&self, p: &TubePoint) -> TangentVector {
        let n = self.dim;
        let mut v = TangentVector::zero(n);
        match &self.kind {
            SurfaceKind::Vertical { e, .. } => {
                for j in 0..n {
                    v.dx[j] = e[j] as f64;
                }
            }
            SurfaceKind::Tilted { a, .. } => {
                v.dx[n - 1] = 1.0;
                for j in 0..n {
                    v.dxi[j] = -a[j];
                }
            }
            SurfaceKind::TubeGraph { delta, g } => {
                let gg = g.grad(&p.x);
                for j in 0..n {
                    v.dx[j] = -delta * gg[j];
                    v.dxi[j] = 2.0 * p.xi[j];
                }
            }
        }
        v
    }

    /// Hessian of F in flattened coordinates.
    pub fn hessian(&self, p: &TubePoint) -> [[f64; 4]; 4] {
        let n = self.dim;
        let mut hm = [[0.0; 4]; 4];
        if let SurfaceKind::TubeGraph { delta, g } = &self.kind {
            let gh = g.hess(&p.x);
            for i in 0..n {
                for j in 0..n {
                    hm[i][j] = -delta * gh[i][j];
                }
                hm[n + i][n + i] = 2.0;
            }
        }
        hm
    }

    pub fn normal(&self, p: &TubePoint) -> Result<TangentVector> {
        let g = self.grad(p);
        let norm = g.norm();
        if norm < GRAD_EPS {
            return Err(Error::DegenerateNormal(norm));
        }
        Ok(g.scale(self.orientation / norm))
    }

    /// `X = Jν`.
    pub fn j_normal(&self, p: &TubePoint) -> Result<TangentVector> {
        Ok(apply_j(&self.normal(p)?))
    }

    /// `(θ, φ)` with `cos θ = ⟨∇ρ, ν⟩/|∇ρ|`, `cos φ = ⟨∇ρ, Jν⟩/|∇ρ|`.
    pub fn angles(&self, p: &TubePoint) -> Result<(f64, f64)> {
        let g = grad_rho(p);
        let gn = g.norm();
        if gn == 0.0 {
            return Err(Error::ZeroSection);
        }
        let nu = self.normal(p)?;
        let x = apply_j(&nu);
        let ct = (g.dot(&nu) / gn).clamp(-1.0, 1.0);
        let cp = (g.dot(&x) / gn).clamp(-1.0, 1.0);
        Ok((ct.acos(), cp.acos()))
    }

    /// `div ν`, i.e. `s(ΔF − ∇²F(n̂, n̂))/|∇F|` with `n̂ = ∇F/|∇F|`.
    pub fn mean_curvature(&self, p: &TubePoint) -> Result<f64> {
        let g = self.grad(p);
        let norm = g.norm();
        if norm < GRAD_EPS {
            return Err(Error::DegenerateNormal(norm));
        }
        let hm = self.hessian(p);
        let m = 2 * self.dim;
        let lap: f64 = (0..m).map(|i| hm[i][i]).sum();
        let mut quad_form = 0.0;
        for i in 0..m {
            for j in 0..m {
                quad_form += hm[i][j] * g.get(i) * g.get(j);
            }
        }
        Ok(self.orientation * (lap - quad_form / (norm * norm)) / norm)
    }

    /// `|P_{T S*M} ν|`, the length of the unit normal after removing its
    /// component along the radial fibre direction.
    pub fn projected_normal(&self, p: &TubePoint) -> Result<f64> {
        let nu = self.normal(p)?;
        let r = p.xi_norm();
        if r == 0.0 {
            return Err(Error::ZeroSection);
        }
        let radial: f64 = (0..self.dim).map(|j| nu.dxi[j] * p.xi[j] / r).sum();
        Ok((1.0 - radial * radial).max(0.0).sqrt())
    }
}

/// Membership in the admissible diamond
/// `|φ − π/2| ≤ π/2 − |θ − π/2|`.
pub fn admissible_check(theta: f64, phi: f64) -> bool {
    (phi - FRAC_PI_2).abs() <= FRAC_PI_2 - (theta - FRAC_PI_2).abs() + DIAMOND_TOL
}

/// `cos²θ − 2 + cos²φ + sin θ`.
pub fn f_value(theta: f64, phi: f64) -> f64 {
    let ct = theta.cos();
    let cp = phi.cos();
    ct * ct - 2.0 + cp * cp + theta.sin()
}

/// `Δ_Σ f = Δf − ∇²f(ν, ν) − H ∂_ν f` for the function described by `jet`.
pub fn tangential_laplacian(spec: &HypersurfaceSpec, p: &TubePoint, jet: &Jet) -> Result<Complex64> {
    let nu = spec.normal(p)?;
    let h = spec.mean_curvature(p)?;
    let v = flat(&nu);
    Ok(jet.laplacian() - jet.hess_form(&v, &v) - jet.deriv(&v) * h)
}

/// Flattened components of a tangent vector, padded to four slots.
pub fn flat(v: &TangentVector) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..2 * v.dim {
        out[i] = v.get(i);
    }
    out
}

/// Per-node data shared by both grid types.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeFrame {
    pub normal: TangentVector,
    pub jnormal: TangentVector,
    pub theta: f64,
    pub phi: f64,
    pub grad_norm: f64,
    pub mean_curvature: f64,
}

impl NodeFrame {
    pub fn at(spec: &HypersurfaceSpec, p: &TubePoint) -> Result<Self> {
        let normal = spec.normal(p)?;
        let (theta, phi) = spec.angles(p)?;
        Ok(Self {
            normal,
            jnormal: apply_j(&normal),
            theta,
            phi,
            grad_norm: spec.grad(p).norm(),
            mean_curvature: spec.mean_curvature(p)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurfaceNode {
    pub p: TubePoint,
    pub weight: f64,
    pub frame: NodeFrame,
}

/// Resolution of a surface grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceResolution {
    /// Nodes per period for periodic position parameters.
    pub periodic: usize,
    /// Nodes on the fibre circle (n = 2).
    pub angle: usize,
    /// Largest radial Gauss–Legendre panel.
    pub radial_width: f64,
    pub radial_order: usize,
}

impl SurfaceResolution {
    /// Enough resolution for `|Tu|²`-type integrands of lattice modes with
    /// `|k| = 1/h`: products carry x-frequencies up to `2/h` and Gaussians of
    /// width √h in ξ.
    pub fn for_h(h: f64, spec: &HypersurfaceSpec) -> Self {
        let extra = match &spec.kind {
            SurfaceKind::TubeGraph { delta, g } => 6.0 * delta.abs() * g.grad_bound(),
            SurfaceKind::Tilted { a, .. } => 2.0 * (a[0].abs() + a[1].abs()),
            _ => 0.0,
        };
        let periodic = ((2.0 + extra) / h).ceil() as usize + 24;
        Self {
            periodic: periodic + periodic % 2,
            angle: ((28.0 / h.sqrt()).ceil() as usize).max(64),
            radial_width: 0.4 * h.sqrt(),
            radial_order: 10,
        }
    }
}

/// Quadrature on `Σ ∩ B*_τM` for the induced measure `dσ`. Nodes are
/// generated on demand, so fine grids cost no memory.
#[derive(Clone, Debug, Serialize)]
pub struct SurfaceGrid {
    pub spec: HypersurfaceSpec,
    pub tau: f64,
    pub res: SurfaceResolution,
}

impl SurfaceGrid {
    pub fn build(spec: &HypersurfaceSpec, model: &ManifoldModel, res: &SurfaceResolution) -> Result<Self> {
        if spec.dim != model.dim() {
            return Err(Error::Dimension(spec.dim));
        }
        if res.periodic == 0 || res.angle == 0 || res.radial_order == 0 || !(res.radial_width > 0.0) {
            return Err(Error::Invalid(format!("bad surface resolution {res:?}")));
        }
        Ok(Self { spec: spec.clone(), tau: model.tau(), res: *res })
    }

    /// Visit `(point, weight)` pairs.
    pub fn for_each_raw<F: FnMut(TubePoint, f64)>(&self, mut f: F) -> Result<()> {
        let spec = &self.spec;
        let res = &self.res;
        let tau = self.tau;
        let radial = || quad::gauss_panels(&[0.0, 1.0, tau], res.radial_width, res.radial_order);
        let signed = || quad::gauss_panels(&[-tau, -1.0, 0.0, 1.0, tau], res.radial_width, res.radial_order);
        let per = quad::periodic(0.0, TWO_PI, res.periodic);
        let ang = quad::periodic(0.0, TWO_PI, res.angle);
        let circle: Vec<(f64, f64, f64)> = ang.iter().map(|(a, w)| (a.cos(), a.sin(), w)).collect();
        match (&spec.kind, spec.dim) {
            (SurfaceKind::Vertical { e, c }, 1) => {
                let x = wrap_period(c / e[0] as f64);
                for (xi, w) in signed()?.iter() {
                    f(TubePoint::circle(x, xi), w);
                }
            }
            (SurfaceKind::Vertical { e, c }, _) => {
                let en2 = (e[0] * e[0] + e[1] * e[1]) as f64;
                let x0 = [c * e[0] as f64 / en2, c * e[1] as f64 / en2];
                let dir = [-e[1] as f64, e[0] as f64];
                let len = en2.sqrt();
                let rr = radial()?;
                for (s, ws) in per.iter() {
                    let x = [wrap_period(x0[0] + s * dir[0]), wrap_period(x0[1] + s * dir[1])];
                    for (r, wr) in rr.iter() {
                        for &(ca, sa, wa) in &circle {
                            f(TubePoint::torus(x, [r * ca, r * sa]), len * ws * r * wr * wa);
                        }
                    }
                }
            }
            (SurfaceKind::Tilted { a, c }, 1) => {
                let jac = (1.0 + a[0] * a[0]).sqrt();
                for (xi, w) in signed()?.iter() {
                    f(TubePoint::circle(wrap_period(a[0] * xi + c), xi), jac * w);
                }
            }
            (SurfaceKind::Tilted { a, c }, _) => {
                let jac = (1.0 + a[0] * a[0] + a[1] * a[1]).sqrt();
                let rr = radial()?;
                for (x1, w1) in per.iter() {
                    for (r, wr) in rr.iter() {
                        for &(ca, sa, wa) in &circle {
                            let xi = [r * ca, r * sa];
                            let x2 = wrap_period(a[0] * xi[0] + a[1] * xi[1] + c);
                            f(TubePoint::torus([x1, x2], xi), jac * w1 * r * wr * wa);
                        }
                    }
                }
            }
            (SurfaceKind::TubeGraph { delta, g }, 1) => {
                for (x, w) in per.iter() {
                    let xx = [x, 0.0];
                    let r = (1.0 + delta * g.value(&xx)).sqrt();
                    let dr = delta * g.grad(&xx)[0] / (2.0 * r);
                    let jac = (1.0 + dr * dr).sqrt();
                    for sgn in [1.0, -1.0] {
                        f(TubePoint::circle(x, sgn * r), jac * w);
                    }
                }
            }
            (SurfaceKind::TubeGraph { delta, g }, _) => {
                for (x1, w1) in per.iter() {
                    for (x2, w2) in per.iter() {
                        let xx = [x1, x2];
                        let r = (1.0 + delta * g.value(&xx)).sqrt();
                        let gg = g.grad(&xx);
                        let dr2 = (delta / (2.0 * r)).powi(2) * (gg[0] * gg[0] + gg[1] * gg[1]);
                        let jac = r * (1.0 + dr2).sqrt();
                        for &(ca, sa, wa) in &circle {
                            f(TubePoint::torus(xx, [r * ca, r * sa]), jac * w1 * w2 * wa);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Visit nodes with their normal frames.
    pub fn for_each<F: FnMut(&SurfaceNode)>(&self, mut f: F) -> Result<()> {
        let mut err = None;
        self.for_each_raw(|p, weight| {
            if err.is_some() {
                return;
            }
            match NodeFrame::at(&self.spec, &p) {
                Ok(frame) => f(&SurfaceNode { p, weight, frame }),
                Err(e) => err = Some(e),
            }
        })?;
        err.map_or(Ok(()), Err)
    }

    pub fn nodes(&self) -> Result<Vec<SurfaceNode>> {
        let mut out = Vec::new();
        self.for_each(|n| out.push(*n))?;
        Ok(out)
    }

    pub fn node_count(&self) -> Result<usize> {
        let mut n = 0;
        self.for_each_raw(|_, _| n += 1)?;
        Ok(n)
    }

    pub fn area(&self) -> Result<f64> {
        let mut a = 0.0;
        self.for_each_raw(|_, w| a += w)?;
        Ok(a)
    }

    /// Largest `|F|` over the nodes.
    pub fn residual(&self) -> Result<f64> {
        let mut r: f64 = 0.0;
        self.for_each_raw(|p, _| r = r.max(self.spec.value(&p).abs()))?;
        Ok(r)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let nodes = self.nodes()?;
        write_nodes_csv(w, self.spec.dim, nodes.iter().map(|n| (n.p, n.weight, n.frame)))
            .map_err(|e| Error::Invalid(e.to_string()))
    }
}

fn write_nodes_csv<W: Write, I: Iterator<Item = (TubePoint, f64, NodeFrame)>>(
    mut w: W,
    n: usize,
    rows: I,
) -> std::io::Result<()> {
    let mut head: Vec<String> = Vec::new();
    for j in 1..=n {
        head.push(format!("x{j}"));
    }
    for j in 1..=n {
        head.push(format!("xi{j}"));
    }
    head.push("weight".into());
    for v in ["nu", "X"] {
        for j in 1..=n {
            head.push(format!("{v}_x{j}"));
        }
        for j in 1..=n {
            head.push(format!("{v}_xi{j}"));
        }
    }
    head.push("theta".into());
    head.push("phi".into());
    writeln!(w, "{}", head.join(","))?;
    for (p, weight, f) in rows {
        let mut cells: Vec<f64> = Vec::new();
        cells.extend(&p.x[..n]);
        cells.extend(&p.xi[..n]);
        cells.push(weight);
        for v in [f.normal, f.jnormal] {
            cells.extend(&v.dx[..n]);
            cells.extend(&v.dxi[..n]);
        }
        cells.push(f.theta);
        cells.push(f.phi);
        let s: Vec<String> = cells.iter().map(|c| format!("{c:.17e}")).collect();
        writeln!(w, "{}", s.join(","))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurveNode {
    pub p: TubePoint,
    /// Weight for `dμ_Σ`.
    pub weight: f64,
    pub frame: NodeFrame,
    /// `|P_{T S*M} ν|`.
    pub projected_normal: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveResolution {
    pub periodic: usize,
    pub angle: usize,
}

impl Default for CurveResolution {
    fn default() -> Self {
        Self { periodic: 128, angle: 128 }
    }
}

/// Quadrature on `Σ ∩ S*M` for the measure `dμ_Σ = dA / |P_{T S*M} ν|`,
/// `dA` the induced Riemannian measure of the intersection.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyCurveGrid {
    pub spec: HypersurfaceSpec,
    pub nodes: Vec<CurveNode>,
    pub total_measure: f64,
}

impl EnergyCurveGrid {
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_nodes_csv(w, self.spec.dim, self.nodes.iter().map(|n| (n.p, n.weight, n.frame)))
    }
}

/// Zeros of `x ↦ g(x, x2)` on the period, by sign-change scan and bisection.
pub(crate) fn roots_x1(g: &TrigPoly, x2: f64, scan: usize) -> Result<Vec<f64>> {
    let f = |x: f64| g.value(&[x, x2]);
    let dx = TWO_PI / scan as f64;
    let mut roots = Vec::new();
    for i in 0..scan {
        let a = i as f64 * dx;
        let b = a + dx;
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 || hi - lo < 1e-15 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    for r in &roots {
        let gx = g.grad(&[*r, x2])[0];
        if gx.abs() < 1e-8 {
            return Err(Error::Degenerate(format!("zero set of g is not a graph over x2 near x1 = {r}")));
        }
    }
    Ok(roots)
}

pub fn intersect_sphere_bundle(spec: &HypersurfaceSpec, res: &CurveResolution) -> Result<EnergyCurveGrid> {
    let n = spec.dim;
    let mut raw: Vec<(TubePoint, f64)> = Vec::new();
    let per = quad::periodic(0.0, TWO_PI, res.periodic);
    let ang = quad::periodic(0.0, TWO_PI, res.angle);
    match (&spec.kind, n) {
        (SurfaceKind::Vertical { e, c }, 1) => {
            let x = wrap_period(c / e[0] as f64);
            raw.push((TubePoint::circle(x, 1.0), 1.0));
            raw.push((TubePoint::circle(x, -1.0), 1.0));
        }
        (SurfaceKind::Vertical { e, c }, _) => {
            let en2 = (e[0] * e[0] + e[1] * e[1]) as f64;
            let x0 = [c * e[0] as f64 / en2, c * e[1] as f64 / en2];
            let dir = [-e[1] as f64, e[0] as f64];
            for (s, ws) in per.iter() {
                let x = [wrap_period(x0[0] + s * dir[0]), wrap_period(x0[1] + s * dir[1])];
                for (a, wa) in ang.iter() {
                    raw.push((TubePoint::torus(x, [a.cos(), a.sin()]), en2.sqrt() * ws * wa));
                }
            }
        }
        (SurfaceKind::Tilted { a, c }, 1) => {
            for xi in [1.0, -1.0] {
                raw.push((TubePoint::circle(wrap_period(a[0] * xi + c), xi), 1.0));
            }
        }
        (SurfaceKind::Tilted { a, c }, _) => {
            for (x1, w1) in per.iter() {
                for (al, wa) in ang.iter() {
                    let om = [al.cos(), al.sin()];
                    let dom = [-al.sin(), al.cos()];
                    let x2 = wrap_period(a[0] * om[0] + a[1] * om[1] + c);
                    let da = (1.0 + (a[0] * dom[0] + a[1] * dom[1]).powi(2)).sqrt();
                    raw.push((TubePoint::torus([x1, x2], om), da * w1 * wa));
                }
            }
        }
        (SurfaceKind::TubeGraph { g, .. }, 1) => {
            for r in roots_x1(g, 0.0, 4 * res.periodic)? {
                for xi in [1.0, -1.0] {
                    raw.push((TubePoint::circle(r, xi), 1.0));
                }
            }
        }
        (SurfaceKind::TubeGraph { g, .. }, _) => {
            let scan = 4 * res.periodic;
            let base = roots_x1(g, 0.0, scan)?;
            for (x2, w2) in per.iter() {
                let rs = roots_x1(g, x2, scan)?;
                if rs.len() != base.len() {
                    return Err(Error::Degenerate("zero set of g changes branch count".into()));
                }
                for r in rs {
                    let gg = g.grad(&[r, x2]);
                    let slope = -gg[1] / gg[0];
                    let dl = (1.0 + slope * slope).sqrt();
                    for (al, wa) in ang.iter() {
                        raw.push((TubePoint::torus([r, x2], [al.cos(), al.sin()]), dl * w2 * wa));
                    }
                }
            }
        }
    }
    if raw.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let mut nodes = Vec::with_capacity(raw.len());
    for (p, da) in raw {
        let pn = spec.projected_normal(&p)?;
        if pn < TANGENCY_EPS {
            return Err(Error::Tangency(pn));
        }
        nodes.push(CurveNode { p, weight: da / pn, frame: NodeFrame::at(spec, &p)?, projected_normal: pn });
    }
    let total_measure = nodes.iter().map(|n| n.weight).sum();
    Ok(EnergyCurveGrid { spec: spec.clone(), nodes, total_measure })
}

/// Condition (a): `Σ` never meets `S*M` orthogonally. Returns the verdict and
/// `min |cos θ|` over the intersection.
pub fn condition_a_check(spec: &HypersurfaceSpec, tol: f64, res: &CurveResolution) -> Result<(bool, f64)> {
    let grid = intersect_sphere_bundle(spec, res)?;
    let margin = grid.nodes.iter().map(|n| n.frame.theta.cos().abs()).fold(f64::INFINITY, f64::min);
    Ok((margin > tol, margin))
}

/// Smallest distance from `(θ, φ)` to the diamond corners `(π/2, 0)`, `(π/2, π)`.
pub fn corner_distance(theta: f64, phi: f64) -> f64 {
    let d0 = ((theta - FRAC_PI_2).powi(2) + phi.powi(2)).sqrt();
    let d1 = ((theta - FRAC_PI_2).powi(2) + (phi - PI).powi(2)).sqrt();
    d0.min(d1)
}

/// The local condition: `(θ, φ)` stays farther than `delta` from both corners.
pub fn local_condition_check(spec: &HypersurfaceSpec, delta: f64, res: &CurveResolution) -> Result<bool> {
    let grid = intersect_sphere_bundle(spec, res)?;
    Ok(grid.nodes.iter().all(|n| corner_distance(n.frame.theta, n.frame.phi) > delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Continuation, Mode, ModeSum, Weight};

    fn torus_vertical() -> HypersurfaceSpec {
        HypersurfaceSpec::vertical(2, &[1, 0], 0.0).unwrap()
    }

    fn graph(delta: f64) -> HypersurfaceSpec {
        HypersurfaceSpec::tube_graph(2, delta, TrigPoly::cos_x1()).unwrap()
    }

    #[test]
    fn normals() {
        let s = torus_vertical();
        let p = TubePoint::torus([0.0, 1.0], [0.3, 0.2]);
        assert_eq!(s.normal(&p).unwrap(), TangentVector::new(&[1.0, 0.0], &[0.0, 0.0]));
        let x = s.j_normal(&p).unwrap();
        assert_eq!(x, TangentVector::new(&[0.0, 0.0], &[-1.0, 0.0]));
        let q = TubePoint::torus([1.0, 2.0], [0.6, 0.8]);
        let nu = graph(0.0).normal(&q).unwrap();
        assert!((nu.dxi[0] - 0.6).abs() < 1e-15 && (nu.dxi[1] - 0.8).abs() < 1e-15);
        let x = graph(0.0).j_normal(&q).unwrap();
        assert!((x.dx[0] - 0.6).abs() < 1e-15 && (x.dx[1] - 0.8).abs() < 1e-15);
        let t = HypersurfaceSpec::tilted(2, &[0.3, 0.0], 0.0).unwrap();
        let nu = t.normal(&TubePoint::torus([0.0, 0.0], [0.0, 0.0])).unwrap();
        let r = 1.09f64.sqrt();
        assert!((nu.dx[1] - 1.0 / r).abs() < 1e-15 && (nu.dxi[0] + 0.3 / r).abs() < 1e-15);
    }

    #[test]
    fn angle_examples() {
        let (t, f) = torus_vertical().angles(&TubePoint::torus([0.0, 0.0], [1.0, 0.0])).unwrap();
        assert!((t - FRAC_PI_2).abs() < 1e-15);
        // J∂_x = −∂_ξ, so Jν = −∂_{ξ1} and ∇ρ = ∂_{ξ1} gives φ = π.
        assert!((f - PI).abs() < 1e-15);
        let (t, f) = graph(0.0).angles(&TubePoint::torus([0.5, 0.1], [0.6, 0.8])).unwrap();
        assert!(t.abs() < 1e-7 && (f - FRAC_PI_2).abs() < 1e-15);
        let s = graph(0.5);
        for &x1 in &[0.3, 1.0, 2.5] {
            let p = TubePoint::torus([x1, 0.0], [1.0, 0.0]);
            let (t, _) = s.angles(&p).unwrap();
            let expect = 2.0 / (4.0 + 0.25 * x1.sin().powi(2)).sqrt();
            assert!((t.cos() - expect).abs() < 1e-14);
        }
        assert!(matches!(s.angles(&TubePoint::torus([0.0, 0.0], [0.0, 0.0])), Err(Error::ZeroSection)));
    }

    #[test]
    fn diamond_and_f() {
        assert!(admissible_check(FRAC_PI_2, 0.0));
        assert!(admissible_check(0.0, FRAC_PI_2));
        assert!(!admissible_check(0.0, 0.0));
        assert!(admissible_check(PI, FRAC_PI_2));
        assert_eq!(f_value(FRAC_PI_2, 0.0), 0.0);
        assert_eq!(f_value(FRAC_PI_2, PI), 0.0);
        assert!((f_value(0.0, FRAC_PI_2) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn vertical_grid_area_and_curve_measure() {
        let model = ManifoldModel::torus();
        let s = torus_vertical();
        let res = SurfaceResolution { periodic: 16, angle: 32, radial_width: 0.25, radial_order: 8 };
        let g = SurfaceGrid::build(&s, &model, &res).unwrap();
        assert!((g.area().unwrap() - TWO_PI * PI * 4.0).abs() < 1e-10);
        assert!(g.residual().unwrap() < 1e-10);
        let c = intersect_sphere_bundle(&s, &CurveResolution { periodic: 32, angle: 32 }).unwrap();
        assert!((c.total_measure - TWO_PI * TWO_PI).abs() < 1e-10);
        let d =
            intersect_sphere_bundle(&HypersurfaceSpec::vertical(1, &[1], 0.0).unwrap(), &CurveResolution::default())
                .unwrap();
        assert_eq!(d.nodes.len(), 2);
    }

    #[test]
    fn tilted_area() {
        let model = ManifoldModel::torus();
        let s = HypersurfaceSpec::tilted(2, &[0.3, -0.2], 0.4).unwrap();
        let res = SurfaceResolution { periodic: 8, angle: 32, radial_width: 0.25, radial_order: 8 };
        let g = SurfaceGrid::build(&s, &model, &res).unwrap();
        let expect = (1.0f64 + 0.09 + 0.04).sqrt() * TWO_PI * PI * 4.0;
        assert!((g.area().unwrap() - expect).abs() < 1e-10 * expect);
        assert!(g.residual().unwrap() < 1e-10);
    }

    #[test]
    fn tube_graph_curve() {
        let s = graph(0.5);
        let c = intersect_sphere_bundle(&s, &CurveResolution { periodic: 16, angle: 16 }).unwrap();
        for n in &c.nodes {
            assert!((n.p.x[0] - FRAC_PI_2).abs() < 1e-12 || (n.p.x[0] - 1.5 * PI).abs() < 1e-12);
            assert!((n.p.xi_norm() - 1.0).abs() < 1e-12 && s.value(&n.p).abs() < 1e-10);
        }
        // |Pν| = δ/√(δ² + 4) at cos x1 = 0; two circles of x2 times the fibre circle.
        let expect = 2.0 * TWO_PI * TWO_PI * (0.25f64 + 4.0).sqrt() / 0.5;
        assert!((c.total_measure - expect).abs() < 1e-10 * expect);
        let (ok, margin) = condition_a_check(&s, 0.5, &CurveResolution::default()).unwrap();
        assert!(ok && margin >= 2.0 / 4.25f64.sqrt() - 1e-12);
        assert!(local_condition_check(&s, 0.1, &CurveResolution::default()).unwrap());
        assert!(matches!(intersect_sphere_bundle(&graph(0.0), &CurveResolution::default()), Err(Error::Tangency(_))));
    }

    #[test]
    fn vertical_fails_conditions() {
        let s = torus_vertical();
        let (ok, margin) = condition_a_check(&s, 1e-6, &CurveResolution::default()).unwrap();
        assert!(!ok && margin < 1e-12);
        assert!(!local_condition_check(&s, 0.05, &CurveResolution::default()).unwrap());
    }

    #[test]
    fn mean_curvature_of_shell() {
        let s = graph(0.0);
        let p = TubePoint::torus([0.0, 0.0], [0.6, 0.8]);
        assert!((s.mean_curvature(&p).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(torus_vertical().mean_curvature(&p).unwrap(), 0.0);
    }

    #[test]
    fn tangential_laplacian_on_flat_slice() {
        // f = ξ1²/2 written as a jet by hand: Δ_Σ f = 1 on {x1 = 0}.
        let z = Complex64::new(0.0, 0.0);
        let mut jet = Jet { dim: 2, shift: 0.0, value: z, grad: [z; 4], hess: [[z; 4]; 4] };
        jet.hess[2][2] = Complex64::new(1.0, 0.0);
        let p = TubePoint::torus([0.0, 0.3], [0.2, 0.1]);
        let v = tangential_laplacian(&torus_vertical(), &p, &jet).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        jet.hess[2][2] = z;
        jet.value = Complex64::new(1.0, 0.0);
        assert_eq!(tangential_laplacian(&torus_vertical(), &p, &jet).unwrap(), z);
    }

    #[test]
    fn tangential_laplacian_matches_finite_differences_on_graph() {
        // Intrinsic Laplacian on a TubeGraph patch parametrized by (x1, x2, α):
        // metric G = diag-block [I + ∇r∇rᵀ, r²]; Δ_Σ f = |G|^{-1/2} ∂_i(|G|^{1/2} G^{ij} ∂_j f).
        let s = graph(0.4);
        let u = ModeSum::new(
            0.2,
            2,
            vec![Mode::new(&[3, 4], Complex64::new(0.7, 0.2)), Mode::new(&[0, -5], Complex64::new(-0.3, 0.5))],
        )
        .unwrap();
        let delta = 0.4;
        let emb = |q: [f64; 3]| {
            let r = (1.0 + delta * q[0].cos()).sqrt();
            TubePoint::torus([q[0], q[1]], [r * q[2].cos(), r * q[2].sin()])
        };
        let f = |q: [f64; 3]| {
            let j = u.jet(&emb(q), Weight::Weighted, Continuation::Holomorphic);
            j.value * j.shift.exp()
        };
        let metric = |q: [f64; 3]| -> ([[f64; 3]; 3], f64) {
            let r = (1.0 + delta * q[0].cos()).sqrt();
            let dr = -delta * q[0].sin() / (2.0 * r);
            let g = [[1.0 + dr * dr, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, r * r]];
            let det = g[0][0] * g[2][2];
            (g, det.sqrt())
        };
        let q0 = [0.7, 1.3, 0.9];
        let hstep = 1e-3;
        let grad_f = |q: [f64; 3], i: usize| {
            let mut a = q;
            let mut b = q;
            a[i] += hstep;
            b[i] -= hstep;
            (f(a) - f(b)) / (2.0 * hstep)
        };
        let flux = |q: [f64; 3], i: usize| {
            let (g, sq) = metric(q);
            grad_f(q, i) * (sq / g[i][i])
        };
        let mut div = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            let mut a = q0;
            let mut b = q0;
            a[i] += hstep;
            b[i] -= hstep;
            div += (flux(a, i) - flux(b, i)) / (2.0 * hstep);
        }
        let fd = div / metric(q0).1;
        let p = emb(q0);
        let jet = u.jet(&p, Weight::Weighted, Continuation::Holomorphic);
        let exact = tangential_laplacian(&s, &p, &jet).unwrap() * jet.shift.exp();
        assert!((fd - exact).norm() < 1e-4 * exact.norm(), "fd {fd} exact {exact}");
    }

    #[test]
    fn grid_invariants() {
        let model = ManifoldModel::torus();
        for s in [torus_vertical(), graph(0.5), HypersurfaceSpec::tilted(2, &[0.2, 0.1], 0.0).unwrap()] {
            let res = SurfaceResolution { periodic: 8, angle: 8, radial_width: 0.5, radial_order: 4 };
            let g = SurfaceGrid::build(&s, &model, &res).unwrap();
            for n in &g.nodes().unwrap() {
                assert!((n.frame.normal.norm() - 1.0).abs() < 1e-14);
                assert!(n.frame.normal.dot(&n.frame.jnormal).abs() < 1e-14);
                assert!(admissible_check(n.frame.theta, n.frame.phi));
                let tang = grad_rho(&n.p).sub(&n.frame.normal.scale(grad_rho(&n.p).dot(&n.frame.normal)));
                assert!(
                    (tang.norm() - n.p.xi_norm() * n.frame.theta.sin()).abs() < 1e-7,
                    "{:?} {} {}",
                    n.p,
                    tang.norm(),
                    n.frame.theta
                );
            }
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = HypersurfaceSpec::vertical(1, &[1], 0.0).unwrap();
        let c = intersect_sphere_bundle(&s, &CurveResolution::default()).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x1,xi1,weight,nu_x1,nu_xi1,X_x1,X_xi1,theta,phi\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
