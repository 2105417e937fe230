//! Holomorphy, wavefront containment in `W` and `W_Σ`, and energy localization.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tubeqer::fbi::{
    centers_between, energy_mass_off_shell, holomorphy_residual, holomorphy_residual_with, wf_containment, ModelSet,
    SeparableField, WfDiagnostic, Window,
};
use tubeqer::fit::{fit_line, fit_loglog};
use tubeqer::geometry::{ManifoldModel, TubePoint, TWO_PI};
use tubeqer::qer::{wf_sigma_containment, WfSigmaParams};
use tubeqer::spectral::{make_shell_ensemble, Continuation, EnsembleSpec, ModeSum};

use super::{frequency, median, single, torus_mode};
use crate::config::{ConfigError, Resolved};
use crate::report::{int, num, Check, Outcome, Table};

const OFF_SHELL_EPS: f64 = 0.25;
const THRESHOLD: f64 = 0.1;

fn ambient_containment(u: &ModeSum, model: &ManifoldModel, p: &WfSigmaParams) -> Result<f64, ConfigError> {
    let field = SeparableField::single_mode(u, model, p.nx, p.nxi, p.eps)?;
    let r = p.window_radius;
    let mut centers = Vec::new();
    let mut windows = Vec::new();
    for g in &field.axes {
        if g.periodic {
            centers.push(vec![0.0]);
            windows.push(Window::Full);
        } else {
            centers.push(centers_between(g.start + r, g.end() - r, p.center_step));
            windows.push(Window::bump(r));
        }
    }
    let diag = WfDiagnostic::separable(&field, &centers, &windows, p.dual_step, THRESHOLD)?;
    Ok(wf_containment(&diag, &ModelSet::W).max_distance)
}

pub fn run(cfg: &Resolved) -> Result<Outcome, ConfigError> {
    let model = cfg.model()?;
    let sigma = cfg.surface()?;
    let mut checks = Vec::new();

    // e^{i<k,x+iξ>} is harmonic too, so the control is u extended constant in ξ.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut hol_max, mut anti_max, mut control, mut probes) = (0.0f64, 0.0f64, Vec::new(), 0usize);
    for (i, &r2) in cfg.ensemble.shells.iter().enumerate() {
        let spec = EnsembleSpec { dim: 2, r2, draws: cfg.ensemble.draws, seed: cfg.seed.wrapping_add(i as u64) };
        for u in make_shell_ensemble(&spec)? {
            for _ in 0..5 {
                let rad: f64 = rng.random_range(0.0..0.95 * cfg.tau);
                let a: f64 = rng.random_range(0.0..TWO_PI);
                let x = [rng.random_range(0.0..TWO_PI), rng.random_range(0.0..TWO_PI)];
                let p = TubePoint::torus(x, [rad * a.cos(), rad * a.sin()]);
                hol_max = hol_max.max(holomorphy_residual(&u, &p));
                anti_max = anti_max.max(holomorphy_residual_with(&u, &p, Continuation::Anti));
                control.push(holomorphy_residual_with(&u, &p, Continuation::Trivial));
                probes += 1;
            }
        }
    }
    // Proportional to |u(x)|, so small near nodal points; the median is O(1).
    let control_med = median(&control);
    checks.push(Check::new(
        "4",
        "holomorphy",
        hol_max < 1e-12 && control_med > 1e-2,
        format!("max residual {hol_max:.2e} over {probes} probes (tolerance 1e-12); median xi-constant control {control_med:.2e}"),
    ));

    // Containment and off-shell mass per h.
    let mut table = Table::new(
        "wavefront",
        &[
            "h",
            "k1",
            "k2",
            "w_distance",
            "w_sigma_distance",
            "shell_distance",
            "super_threshold_points",
            "off_shell_mass",
        ],
    );
    let (mut hs, mut dw, mut ds, mut off) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &h in &cfg.h_list {
        let k = torus_mode(frequency(h));
        let u = single(h, 2, &k)?;
        let params = WfSigmaParams::for_h(h, cfg.tau);
        let w = ambient_containment(&u, &model, &params)?;
        let s = wf_sigma_containment(&u, &sigma, &model, &params)?;
        let m = energy_mass_off_shell(&u, &model, OFF_SHELL_EPS)?;
        table.push(vec![
            num(h),
            k[0].to_string(),
            k[1].to_string(),
            num(w),
            num(s.stats.max_distance),
            num(s.max_shell_distance),
            int(s.stats.points),
            num(m),
        ]);
        hs.push(h);
        dw.push(w);
        ds.push(s.stats.max_distance);
        off.push(m);
    }
    let fw = fit_loglog(&hs, &dw)?;
    let fs = fit_loglog(&hs, &ds)?;
    let c = |d: &[f64]| d.iter().zip(&hs).map(|(d, h)| d / h.sqrt()).fold(0.0, f64::max);
    for (name, f, d) in [("containment in W", &fw, &dw), ("containment in W_Sigma", &fs, &ds)] {
        checks.push(Check::new(
            "5",
            name,
            (0.4..=0.6).contains(&f.slope),
            format!("radius exponent {:.3} (target [0.4, 0.6]); radius <= {:.2} sqrt(h)", f.slope, c(d)),
        ));
    }
    let inv: Vec<f64> = hs.iter().map(|h| 1.0 / h).collect();
    let logs: Vec<f64> = off.iter().map(|m| m.ln()).collect();
    let fe = fit_line(&inv, &logs)?;
    checks.push(Check::new(
        "6",
        "exponential energy localization",
        fe.slope < 0.0 && fe.r2 > 0.99,
        format!("log(off-shell mass) vs 1/h: slope {:.4}, R^2 {:.5} (eps = {OFF_SHELL_EPS})", fe.slope, fe.r2),
    ));
    let data = json!({
        "holomorphy": {"max_residual": hol_max, "median_control": control_med, "max_anti_harmonic": anti_max, "probes": probes},
        "containment": {"w_exponent": fw.slope, "w_exponent_ci": fw.slope_ci, "w_sigma_exponent": fs.slope, "w_sigma_exponent_ci": fs.slope_ci},
        "off_shell": {"eps": OFF_SHELL_EPS, "slope": fe.slope, "r2": fe.r2},
    });
    Ok(Outcome { checks, tables: vec![table], data })
}
