//! Exact identities on random `(ModeSum, Σ, node, h)` tuples.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tubeqer::hypersurface::{HypersurfaceSpec, SurfaceGrid, SurfaceResolution};
use tubeqer::qer::{
    cr_residual, r_identity_residual, r_identity_residual_with, restriction_norm_log_sq, weighted_norm_log,
    y_decomposition_residual, y_decomposition_residual_with, NormScale, YForm,
};
use tubeqer::spectral::{make_shell_ensemble, Continuation, EnsembleSpec};

use super::median;
use crate::config::{ConfigError, Resolved};
use crate::report::{int, num, Check, Outcome, Table};

const TOL: f64 = 1e-11;

fn catalog(cfg: &Resolved) -> Result<Vec<(String, HypersurfaceSpec)>, ConfigError> {
    Ok(vec![
        ("vertical-x1".into(), HypersurfaceSpec::vertical(2, &[1, 0], 0.0)?),
        ("vertical-diag".into(), HypersurfaceSpec::vertical(2, &[1, 1], 0.5)?),
        ("tilted".into(), HypersurfaceSpec::tilted(2, &[0.3, -0.2], 0.5)?),
        ("configured".into(), cfg.surface()?),
    ])
}

pub fn run(cfg: &Resolved) -> Result<Outcome, ConfigError> {
    let model = cfg.model()?;
    let surfaces = catalog(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coarse = SurfaceResolution { periodic: 6, angle: 8, radial_width: 0.5, radial_order: 4 };
    let mut table = Table::new("identities", &["index", "r2", "h", "surface", "cr", "r", "y", "weighted"]);
    let mut worst = [0.0f64; 4];
    let (mut anti, mut displayed_max) = (Vec::new(), 0.0f64);
    for i in 0..cfg.resolution {
        let shells = &cfg.ensemble.shells;
        let r2 = shells[rng.random_range(0..shells.len())];
        let spec = EnsembleSpec { dim: 2, r2, draws: 1, seed: rng.random() };
        let u = make_shell_ensemble(&spec)?.remove(0);
        let (name, s) = &surfaces[i % surfaces.len()];
        let p = s.sample_point(&mut rng, (0.2, 0.95 * cfg.tau));
        let cr = cr_residual(&u, s, &p)?;
        let r = r_identity_residual(&u, s, &p)?;
        let y = y_decomposition_residual(&u, s, &p)?;
        let grid = SurfaceGrid::build(s, &model, &coarse)?;
        let bare = restriction_norm_log_sq(&u, &grid, NormScale::Bare)?;
        let weighted = weighted_norm_log(&u, &grid)?;
        // Both sides are logs, so this is the relative error of the values.
        let w = (weighted - 1.0 / u.h() - bare).abs();
        for (m, v) in worst.iter_mut().zip([cr, r, y, w]) {
            *m = m.max(v);
        }
        // Vanishes where the mode is orthogonal to X, so only the median is O(1).
        anti.push(r_identity_residual_with(&u, s, &p, Continuation::Anti)?);
        let (theta, _) = s.angles(&p)?;
        if theta.sin() < 0.95 && theta.sin() > 0.05 {
            displayed_max = displayed_max.max(y_decomposition_residual_with(&u, s, &p, YForm::Displayed)?);
        }
        table.push(vec![int(i), r2.to_string(), num(u.h()), name.clone(), num(cr), num(r), num(y), num(w)]);
    }
    let names = ["CR equations", "R identity", "Y commutator", "weighted norm"];
    let mut checks: Vec<Check> = names
        .iter()
        .zip(worst)
        .map(|(n, v)| {
            Check::new(
                "2",
                n,
                v < TOL,
                format!("max relative residual {v:.2e} over {} tuples (tolerance 1e-11)", cfg.resolution),
            )
        })
        .collect();
    let anti_med = median(&anti);
    checks.push(Check::new(
        "2",
        "negative controls",
        anti_med > 0.1 && displayed_max > 1e-3,
        format!("median anti-holomorphic R residual {anti_med:.2e}; sin(theta) form of Y reaches {displayed_max:.2e}"),
    ));
    let data = json!({
        "tuples": cfg.resolution,
        "max_cr": worst[0],
        "max_r": worst[1],
        "max_y": worst[2],
        "max_weighted": worst[3],
        "median_anti_r": anti_med,
        "max_displayed_y": displayed_max,
    });
    Ok(Outcome { checks, tables: vec![table], data })
}
