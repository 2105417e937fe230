//! `Q(h)T_Σu ≈ q_Σ T_Σu` for a generic fiber-compact symbol.

use serde_json::json;
use tubeqer::qer::{multiplier_residual, Profile, SeparableSymbol, SymbolTerm};

use super::{frequency, is_decreasing, single, torus_mode};
use crate::config::{ConfigError, Resolved};
use crate::report::{num, Check, Outcome, Table};

const FINAL_RESIDUAL: f64 = 0.1;

/// Smooth in the base, compactly supported in the fibre duals.
pub fn generic_symbol() -> SeparableSymbol {
    SeparableSymbol {
        terms: vec![
            SymbolTerm {
                coef: 1.0,
                position: vec![Profile::Cos { amp: 0.3, freq: 1.0 }, Profile::One, Profile::One],
                dual: vec![
                    Profile::Bump { center: 0.0, radius: 2.5 },
                    Profile::Bump { center: 0.0, radius: 2.0 },
                    Profile::Gaussian { center: 0.0, width: 1.5 },
                ],
            },
            SymbolTerm {
                coef: 0.5,
                position: vec![Profile::One, Profile::Gaussian { center: 0.5, width: 0.7 }, Profile::One],
                dual: vec![
                    Profile::Gaussian { center: 0.5, width: 0.8 },
                    Profile::Bump { center: 0.0, radius: 1.5 },
                    Profile::Bump { center: 0.0, radius: 1.5 },
                ],
            },
        ],
    }
}

pub fn run(cfg: &Resolved) -> Result<Outcome, ConfigError> {
    let spec = cfg.surface()?;
    let symbol = generic_symbol();
    let mut table = Table::new("multiplier", &["h", "k1", "k2", "residual", "norm"]);
    let mut residuals = Vec::new();
    for &h in &cfg.h_list {
        let k = torus_mode(frequency(h));
        let r = multiplier_residual(&single(h, 2, &k)?, &spec, &symbol)?;
        table.push(vec![num(h), k[0].to_string(), k[1].to_string(), num(r.residual), num(r.norm)]);
        residuals.push(r.residual);
    }
    let last = *residuals.last().unwrap_or(&f64::NAN);
    let checks = vec![Check::new(
        "10",
        "multiplier property",
        is_decreasing(&residuals) && last < FINAL_RESIDUAL,
        format!(
            "residuals {:?}; final {last:.3e} (target decreasing, final < {FINAL_RESIDUAL})",
            residuals.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>()
        ),
    )];
    Ok(Outcome { checks, tables: vec![table], data: json!({ "residuals": residuals }) })
}
