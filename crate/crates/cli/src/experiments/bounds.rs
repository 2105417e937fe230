//! h-scaling of restriction norms: uniform on the configured Σ, growing on Vertical Σ.

use serde_json::json;
use tubeqer::geometry::TubePoint;
use tubeqer::hypersurface::{condition_a_check, CurveResolution, HypersurfaceSpec, SurfaceResolution};
use tubeqer::qer::{scaling_experiment, ScalingOptions};
use tubeqer::spectral::{make_shell_ensemble, EnsembleSpec, ModeSum};

use super::{frequency, median};
use crate::config::{ConfigError, Resolved};
use crate::report::{qer_table, Check, Outcome};

const CONDITION_A_MARGIN: f64 = 0.97;
const NORMS_ONLY: ScalingOptions = ScalingOptions { lhs: false, defect: false };

pub fn run(cfg: &Resolved) -> Result<Outcome, ConfigError> {
    let model = cfg.model()?;
    let one = |_: &TubePoint| 1.0;
    let curve = CurveResolution::default();

    let spec = cfg.surface()?;
    let (_, margin) = condition_a_check(&spec, CONDITION_A_MARGIN, &curve)?;
    let mut families = Vec::new();
    for (i, &r2) in cfg.ensemble.shells.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        families.push(make_shell_ensemble(&EnsembleSpec { dim: 2, r2, draws: cfg.ensemble.draws, seed })?);
    }
    let res = |h: f64| SurfaceResolution::for_h(h, &spec);
    let uniform = scaling_experiment(&spec, &model, one, &families, res, &curve, NORMS_ONLY)?;
    let means: Vec<f64> = uniform.rows.iter().map(|r| r.norm_mean).collect();
    let med = median(&means);
    let witness = uniform.fits.lower_bound_witness;
    let fu = uniform.fits.norm.clone().ok_or_else(|| ConfigError(uniform.fits.notes.join("; ")))?;

    // Modes approaching the conormal direction of {x₁ = 0}.
    let vertical = HypersurfaceSpec::vertical(2, &[1, 0], 0.0)?;
    let modes: Vec<Vec<ModeSum>> =
        cfg.h_list.iter().map(|&h| vec![ModeSum::plane_wave(&[frequency(h), 1]).normalized()]).collect();
    let vres = |h: f64| SurfaceResolution::for_h(h, &vertical);
    let growth = scaling_experiment(&vertical, &model, one, &modes, vres, &curve, NORMS_ONLY)?;
    let fv = growth.fits.norm.clone().ok_or_else(|| ConfigError(growth.fits.notes.join("; ")))?;

    let checks = vec![
        Check::new(
            "9a",
            "uniform bounds under condition (a)",
            margin >= CONDITION_A_MARGIN && (-0.1..=0.1).contains(&fu.slope) && witness > 0.1 * med,
            format!(
                "condition (a) margin {margin:.5}; norm slope {:.4} (95% CI [{:.3}, {:.3}], target [-0.1, 0.1]); min norm {witness:.4} vs 0.1 x median {:.4}",
                fu.slope,
                fu.slope_ci.0,
                fu.slope_ci.1,
                0.1 * med
            ),
        ),
        Check::new(
            "9b",
            "growth on vertical Sigma",
            fv.slope <= -0.25 && fv.slope >= -0.55,
            format!("norm slope {:.4} (95% CI [{:.3}, {:.3}], target [-0.55, -0.25])", fv.slope, fv.slope_ci.0, fv.slope_ci.1),
        ),
    ];
    let data = json!({
        "uniform": {"condition_a_margin": margin, "slope": fu.slope, "slope_ci": fu.slope_ci, "min_norm": witness, "median_norm": med},
        "vertical": {"slope": fv.slope, "slope_ci": fv.slope_ci, "norms": growth.rows.iter().map(|r| r.norm_mean).collect::<Vec<_>>()},
    });
    Ok(Outcome {
        checks,
        tables: vec![qer_table("bounds_uniform", &uniform), qer_table("bounds_vertical", &growth)],
        data,
    })
}
