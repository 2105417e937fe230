//! Convergence of the scaled Cauchy-data functional to its references.

use serde_json::json;
use tubeqer::geometry::TubePoint;
use tubeqer::hypersurface::{CurveResolution, SurfaceResolution};
use tubeqer::qer::{scaling_experiment, ScalingOptions};
use tubeqer::spectral::{make_shell_ensemble, EnsembleSpec, ModeSum};

use super::{frequency, is_decreasing};
use crate::config::{ConfigError, Resolved};
use crate::report::{qer_table, Check, Outcome};

const FINAL_GAP: f64 = 0.1;
const ENSEMBLE_GAP: f64 = 0.15;

pub fn run(cfg: &Resolved) -> Result<Outcome, ConfigError> {
    let model = cfg.model()?;
    let spec = cfg.surface()?;
    let one = |_: &TubePoint| 1.0;
    let res = |h: f64| SurfaceResolution::for_h(h, &spec);
    let curve = CurveResolution::default();

    let modes: Vec<Vec<ModeSum>> =
        cfg.h_list.iter().map(|&h| vec![ModeSum::plane_wave(&[frequency(h), 0]).normalized()]).collect();
    let single =
        scaling_experiment(&spec, &model, one, &modes, res, &curve, ScalingOptions { lhs: true, defect: true })?;
    let gaps: Vec<f64> = single.rows.iter().map(|r| r.gap).collect();
    let last = *gaps.last().unwrap_or(&f64::NAN);
    let ratios: Vec<f64> = single.rows.iter().map(|r| r.scaled_lhs.re / r.rhs_defect.unwrap_or(f64::NAN)).collect();

    let r2 = cfg.ensemble.shells[0];
    let members = make_shell_ensemble(&EnsembleSpec { dim: 2, r2, draws: cfg.ensemble.draws, seed: cfg.seed })?;
    let ens =
        scaling_experiment(&spec, &model, one, &[members], res, &curve, ScalingOptions { lhs: true, defect: false })?;
    let row = &ens.rows[0];

    let checks = vec![
        Check::new(
            "8a",
            "single modes vs defect reference",
            is_decreasing(&gaps) && last < FINAL_GAP,
            format!(
                "ratios LHS/reference {:?}; |ratio - 1| decreasing: {}, final {:.3} (target < {FINAL_GAP})",
                ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>(),
                is_decreasing(&gaps),
                last
            ),
        ),
        Check::new(
            "8b",
            "shell ensemble vs Liouville reference",
            row.gap < ENSEMBLE_GAP,
            format!(
                "mean scaled LHS {:.4} vs qer_rhs {:.4} over {} draws on |k|^2 = {r2}; gap {:.3} (target < {ENSEMBLE_GAP})",
                row.scaled_lhs.re, row.rhs_liouville, row.members, row.gap
            ),
        ),
    ];
    let data = json!({
        "single": {"h": single.rows.iter().map(|r| r.h).collect::<Vec<_>>(), "ratios": ratios, "gaps": gaps},
        "ensemble": {"r2": r2, "draws": row.members, "scaled_lhs": row.scaled_lhs.re, "reference": row.rhs_liouville, "gap": row.gap},
    });
    Ok(Outcome { checks, tables: vec![qer_table("qer_modes", &single), qer_table("qer_ensemble", &ens)], data })
}
