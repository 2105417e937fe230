//! General position: the sign of `∫ q dμ_Σ` and the shape of `q` on Vertical Σ.

use serde_json::json;
use tubeqer::hypersurface::{intersect_sphere_bundle, CurveResolution, HypersurfaceSpec};
use tubeqer::qer::{calibrate_b0_sq, density_parts, qer_rhs};

use crate::config::{ConfigError, Resolved};
use crate::report::{num, Check, Outcome, Table};

const TILTS: [f64; 5] = [0.01, 0.02, 0.05, 0.1, 0.2];
const SMALL_TILT: f64 = 0.1;

pub fn run(cfg: &Resolved) -> Result<Outcome, ConfigError> {
    let res = CurveResolution { periodic: 64, angle: cfg.resolution };
    let spec = cfg.surface()?;
    let grid = intersect_sphere_bundle(&spec, &res)?;
    let integral = qer_rhs(&grid, |_| 1.0)?;
    let target = |p: &tubeqer::geometry::TubePoint| -15.0 * p.xi[0] * p.xi[0];
    let b0 = calibrate_b0_sq(&grid, target)?;
    let (mut e2, mut t2) = (0.0, 0.0);
    let mut shape = Table::new("density", &["x1", "x2", "xi1", "xi2", "q", "target"]);
    for node in &grid.nodes {
        let (q1, q2) = density_parts(&spec, &node.p, b0)?;
        let q = q1 + q2;
        let t = target(&node.p);
        e2 += node.weight * (q - t).powi(2);
        t2 += node.weight * t * t;
        shape.push(vec![num(node.p.x[0]), num(node.p.x[1]), num(node.p.xi[0]), num(node.p.xi[1]), num(q), num(t)]);
    }
    let rel = (e2 / t2).sqrt();

    let mut sweep = Table::new("tilt_sweep", &["tilt", "integral"]);
    sweep.push(vec![num(0.0), num(integral)]);
    let mut small_negative = true;
    let mut tilts = Vec::new();
    for &t in &TILTS {
        let s = HypersurfaceSpec::tilted(2, &[t, t], 0.0)?;
        let v = qer_rhs(&intersect_sphere_bundle(&s, &res)?, |_| 1.0)?;
        if t <= SMALL_TILT {
            small_negative &= v < 0.0;
        }
        sweep.push(vec![num(t), num(v)]);
        tilts.push(json!({"tilt": t, "integral": v}));
    }
    let checks = vec![
        Check::new(
            "7",
            "negative integral",
            integral < 0.0,
            format!("integral of q over Sigma and S*M = {integral:.6e}"),
        ),
        Check::new(
            "7",
            "shape of q",
            rel < 0.05,
            format!("relative L2 error {rel:.2e} against -15 xi1^2 after calibrating |b0|^2 = {b0:.6}"),
        ),
        Check::new("7", "tilt stability", small_negative, format!("integral negative for tilts up to {SMALL_TILT}")),
    ];
    let data = json!({"integral": integral, "b0_sq": b0, "shape_error": rel, "tilts": tilts});
    Ok(Outcome { checks, tables: vec![sweep, shape], data })
}
