//! One runner per experiment kind. Each returns its checks, tables and
//! summary data; nothing here touches the filesystem.

use num_complex::Complex64;
use tubeqer::spectral::{Mode, ModeSum};

use crate::config::{ConfigError, Kind, Resolved};
use crate::report::Outcome;

mod bounds;
mod circle;
mod ellipticity;
mod general;
mod identities;
mod multiplier;
mod qer;
mod wavefront;

pub fn run(cfg: &Resolved) -> Result<Outcome, ConfigError> {
    match cfg.kind {
        Kind::CircleExample => circle::run(cfg),
        Kind::Identities => identities::run(cfg),
        Kind::Wavefront => wavefront::run(cfg),
        Kind::QerConvergence => qer::run(cfg),
        Kind::BoundsScaling => bounds::run(cfg),
        Kind::EllipticityScan => ellipticity::run(cfg),
        Kind::GeneralPosition => general::run(cfg),
        Kind::Multiplier => multiplier::run(cfg),
    }
}

/// `1/h` for an `h` that the config validated to be a unit fraction.
fn frequency(h: f64) -> i64 {
    (1.0 / h).round() as i64
}

/// A single torus mode with `|k| = m`, oblique when `m` is a multiple of 5.
fn torus_mode(m: i64) -> [i64; 2] {
    if m % 5 == 0 {
        [3 * m / 5, 4 * m / 5]
    } else {
        [m, 0]
    }
}

fn single(h: f64, dim: usize, k: &[i64]) -> Result<ModeSum, ConfigError> {
    Ok(ModeSum::new(h, dim, vec![Mode::new(k, Complex64::new(1.0, 0.0))])?)
}

fn is_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
