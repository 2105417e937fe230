//! The sign of `f(θ, φ)` on the admissible diamond and the symbol scan of `A(h)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde_json::json;
use tubeqer::hypersurface::{admissible_check, f_value, CurveResolution, HypersurfaceSpec};
use tubeqer::qer::{ellipticity_scan, EllipticityScan};

use crate::config::{ConfigError, Resolved};
use crate::report::{int, num, Check, Outcome, Table};

const F_GRID: usize = 2000;
const MAP_GRID: usize = 101;
const LOCAL_DELTA: f64 = 0.1;

struct Diamond {
    hits: usize,
    stray: usize,
    near: [bool; 2],
}

/// Grid points of the diamond where `f ≥ 0`, sorted into corner cells and the rest.
fn diamond_scan(n: usize) -> Diamond {
    let step = PI / (n - 1) as f64;
    let mut d = Diamond { hits: 0, stray: 0, near: [false; 2] };
    for i in 0..n {
        let theta = i as f64 * step;
        for j in 0..n {
            let phi = j as f64 * step;
            if !admissible_check(theta, phi) || f_value(theta, phi) < 0.0 {
                continue;
            }
            d.hits += 1;
            let in_theta = (theta - FRAC_PI_2).abs() <= step;
            if in_theta && phi <= step {
                d.near[0] = true;
            } else if in_theta && PI - phi <= step {
                d.near[1] = true;
            } else {
                d.stray += 1;
            }
        }
    }
    d
}

fn scan_row(name: &str, s: &EllipticityScan) -> Vec<String> {
    vec![
        name.to_string(),
        num(s.max_sigma),
        num(s.min_sigma),
        num(s.margin),
        num(s.max_f_term),
        num(s.worst_angles.0),
        num(s.worst_angles.1),
        int(s.samples),
    ]
}

pub fn run(cfg: &Resolved) -> Result<Outcome, ConfigError> {
    let mut checks = Vec::new();
    let d = diamond_scan(F_GRID);
    let corners = [(FRAC_PI_2, 0.0), (FRAC_PI_2, PI)];
    let exact = corners.iter().all(|&(t, p)| f_value(t, p) == 0.0 && admissible_check(t, p));
    checks.push(Check::new(
        "3",
        "f on the diamond",
        d.stray == 0 && exact,
        format!(
            "{} grid points with f >= 0 on a {F_GRID}x{F_GRID} grid, {} outside the corner cells; f at corners exactly 0: {exact}",
            d.hits, d.stray
        ),
    ));
    let mut map = Table::new("f_map", &["theta", "phi", "f", "admissible"]);
    for i in 0..MAP_GRID {
        for j in 0..MAP_GRID {
            let (t, p) = (i as f64 * PI / (MAP_GRID - 1) as f64, j as f64 * PI / (MAP_GRID - 1) as f64);
            map.push(vec![num(t), num(p), num(f_value(t, p)), int(admissible_check(t, p) as usize)]);
        }
    }

    let res = CurveResolution { periodic: cfg.resolution / 2, angle: cfg.resolution };
    let graph = cfg.surface()?;
    let g = ellipticity_scan(&graph, &res, 1.0, 8, 3, Some(LOCAL_DELTA))?;
    checks.push(Check::new(
        "11",
        "ellipticity under condition (a)",
        g.max_sigma < 0.0 && g.margin >= 0.5 * g.max_f_term.abs(),
        format!(
            "max sigma(A) = {:.4e}, margin {:.4e} >= 0.5 |max f-term| = {:.4e}",
            g.max_sigma,
            g.margin,
            0.5 * g.max_f_term.abs()
        ),
    ));
    let vertical = HypersurfaceSpec::vertical(2, &[1, 0], 0.0)?;
    let v = ellipticity_scan(&vertical, &res, 1.0, 8, 3, None)?;
    checks.push(Check::new(
        "11",
        "vertical sharpness",
        v.margin.abs() < 1e-9,
        format!(
            "vertical margin {:.2e} at (theta, phi) = ({:.4}, {:.4})",
            v.margin, v.worst_angles.0, v.worst_angles.1
        ),
    ));
    let mut scans = Table::new(
        "ellipticity",
        &["surface", "max_sigma", "min_sigma", "margin", "max_f_term", "worst_theta", "worst_phi", "samples"],
    );
    scans.push(scan_row("configured", &g));
    scans.push(scan_row("vertical-x1", &v));
    let data = json!({
        "diamond": {"grid": F_GRID, "hits": d.hits, "outside_corner_cells": d.stray, "corner_cells_hit": d.near, "corners_exact": exact},
        "configured": {"max_sigma": g.max_sigma, "margin": g.margin, "max_f_term": g.max_f_term},
        "vertical": {"max_sigma": v.max_sigma, "margin": v.margin},
    });
    Ok(Outcome { checks, tables: vec![scans, map], data })
}
