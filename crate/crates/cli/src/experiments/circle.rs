//! The flat-circle example: `u = e^{−ikx}`, `h = 1/k`.

use num_complex::Complex64;
use serde_json::json;
use tubeqer::fbi::{eval_t, semiclassical_ft, AxisGrid, PhaseSpaceField, Window};

use super::{frequency, single};
use crate::config::{ConfigError, Resolved};
use crate::report::{int, num, Check, Outcome, Table};

const EPS: f64 = 0.02;
const TAPER: f64 = 0.1;

pub fn run(cfg: &Resolved) -> Result<Outcome, ConfigError> {
    let n = cfg.resolution;
    let tau = cfg.tau;
    let mut summary = Table::new(
        "circle",
        &["k", "max_rel_error", "peak_xstar", "peak_xistar", "cell_xstar", "cell_xistar", "shape_error"],
    );
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    let mut rows = Vec::new();
    for &h in &cfg.h_list {
        let k = frequency(h);
        let u = single(h, 1, &[-k])?;
        let axes = vec![AxisGrid::periodic_x(0, n), AxisGrid::chart_xi(0, tau, EPS, n)];
        let field = PhaseSpaceField::sample_fn(h, 1, axes.clone(), |p| eval_t(&u, p))?;
        let kf = k as f64;
        let closed = |x: f64, xi: f64| (-0.5 * kf * (xi + 1.0).powi(2)).exp() * Complex64::cis(-kf * x);
        let mut tu = Table::new(&format!("tu_k{k}"), &["x", "xi", "re", "im", "closed_re", "closed_im"]);
        let mut max_err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (x, xi) = (axes[0].coord(i), axes[1].coord(j));
                let v = field.samples[i * n + j];
                let c = closed(x, xi);
                max_err = max_err.max((v - c).norm() / c.norm());
                tu.push(vec![num(x), num(xi), num(v.re), num(v.im), num(c.re), num(c.im)]);
            }
        }
        tables.push(tu);

        // Window on ξ centred at −1 with a flat top reaching close to the chart edge.
        let plateau = tau - 1.0 - EPS - TAPER - 0.03;
        let windows = [Window::Full, Window::Bump { plateau, taper: TAPER }];
        let slice = semiclassical_ft(&field, &[0.0, -1.0], &windows, h.sqrt() / 8.0)?;
        let (idx, _) = slice.peak();
        let xs = slice.duals[0][idx[0]];
        let xis = slice.duals[1][idx[1]];
        let cell = |d: &[f64], i: usize| {
            let j = if i + 1 < d.len() { i + 1 } else { i - 1 };
            (d[j] - d[i]).abs()
        };
        let (cx, cxi) = (cell(&slice.duals[0], idx[0]), cell(&slice.duals[1], idx[1]));
        let profile = slice.line(1, &idx);
        let top = profile.iter().cloned().fold(0.0, f64::max);
        let (mut num2, mut den2) = (0.0, 0.0);
        for (v, eta) in profile.iter().zip(&slice.duals[1]) {
            let g = (-eta * eta / (2.0 * h)).exp();
            num2 += (v / top - g).powi(2);
            den2 += g * g;
        }
        let shape = (num2 / den2).sqrt();
        summary.push(vec![int(k as usize), num(max_err), num(xs), num(xis), num(cx), num(cxi), num(shape)]);
        rows.push(
            json!({"k": k, "max_rel_error": max_err, "peak": [xs, xis], "cell": [cx, cxi], "shape_error": shape}),
        );
        let peak_ok = (xs + 1.0).abs() <= cx && xis.abs() <= cxi;
        checks.push(Check::new(
            "1",
            &format!("closed form, k = {k}"),
            max_err < 1e-12,
            format!("max relative error {max_err:.2e} on {n}x{n} grid (tolerance 1e-12)"),
        ));
        checks.push(Check::new(
            "1",
            &format!("FT peak, k = {k}"),
            peak_ok,
            format!("peak at (x*, xi*) = ({xs:.4}, {xis:.4}), cells ({cx:.4}, {cxi:.4}), target (-1, 0)"),
        ));
        checks.push(Check::new(
            "1",
            &format!("xi* profile, k = {k}"),
            shape < 0.02,
            format!("relative L2 shape error {shape:.3e} against exp(-xi*^2/2h) (tolerance 2e-2)"),
        ));
    }
    tables.insert(0, summary);
    Ok(Outcome { checks, tables, data: json!({ "rows": rows }) })
}
