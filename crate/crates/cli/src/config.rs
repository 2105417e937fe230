//! Experiment configuration: a TOML file, per-kind defaults and flag overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use tubeqer::geometry::{ManifoldModel, DEFAULT_TAU};
use tubeqer::hypersurface::{HypersurfaceSpec, TrigPoly, TrigTerm};

/// Environment variable that overrides the output root of the config file.
pub const OUT_ENV: &str = "TUBEQER_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    CircleExample,
    Identities,
    Wavefront,
    QerConvergence,
    BoundsScaling,
    EllipticityScan,
    GeneralPosition,
    Multiplier,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::CircleExample,
        Kind::Identities,
        Kind::Wavefront,
        Kind::QerConvergence,
        Kind::BoundsScaling,
        Kind::EllipticityScan,
        Kind::GeneralPosition,
        Kind::Multiplier,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Kind::CircleExample => "circle-example",
            Kind::Identities => "identities",
            Kind::Wavefront => "wavefront",
            Kind::QerConvergence => "qer-convergence",
            Kind::BoundsScaling => "bounds-scaling",
            Kind::EllipticityScan => "ellipticity-scan",
            Kind::GeneralPosition => "general-position",
            Kind::Multiplier => "multiplier",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<tubeqer::Error> for ConfigError {
    fn from(e: tubeqer::Error) -> Self {
        ConfigError(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub dim: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurfaceConfig {
    Vertical {
        e: Vec<i64>,
        #[serde(default)]
        c: f64,
    },
    Tilted {
        a: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    TubeGraph {
        delta: f64,
        /// Defaults to `cos x₁`.
        #[serde(default)]
        g: Option<Vec<TrigTerm>>,
    },
}

impl SurfaceConfig {
    pub fn build(&self, dim: usize) -> Result<HypersurfaceSpec, ConfigError> {
        Ok(match self {
            SurfaceConfig::Vertical { e, c } => HypersurfaceSpec::vertical(dim, e, *c)?,
            SurfaceConfig::Tilted { a, c } => HypersurfaceSpec::tilted(dim, a, *c)?,
            SurfaceConfig::TubeGraph { delta, g } => {
                let g = g.clone().map(|terms| TrigPoly { terms }).unwrap_or_else(TrigPoly::cos_x1);
                HypersurfaceSpec::tube_graph(dim, *delta, g)?
            }
        })
    }

    pub fn vertical_x1() -> Self {
        SurfaceConfig::Vertical { e: vec![1, 0], c: 0.0 }
    }

    pub fn graph() -> Self {
        SurfaceConfig::TubeGraph { delta: 0.5, g: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Lattice shells `|k|² = R²`, one ensemble per shell.
    pub shells: Vec<i64>,
    pub draws: usize,
}

/// The file format. Everything except `kind` has a per-kind default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub manifold: Option<ManifoldConfig>,
    #[serde(default)]
    pub hypersurface: Option<SurfaceConfig>,
    #[serde(default)]
    pub h_list: Option<Vec<f64>>,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Values from the command line; each one wins over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub h_list: Option<Vec<f64>>,
    pub resolution: Option<usize>,
}

/// A validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub kind: Kind,
    pub dim: usize,
    pub tau: f64,
    pub hypersurface: SurfaceConfig,
    pub h_list: Vec<f64>,
    pub ensemble: EnsembleConfig,
    pub resolution: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

impl Resolved {
    pub fn model(&self) -> Result<ManifoldModel, ConfigError> {
        Ok(ManifoldModel::new(self.dim, self.tau)?)
    }

    pub fn surface(&self) -> Result<HypersurfaceSpec, ConfigError> {
        self.hypersurface.build(self.dim)
    }

    /// The output directory of this run.
    pub fn out_dir(&self) -> PathBuf {
        self.out.join(self.kind.name())
    }
}

fn inverse(ms: &[u32]) -> Vec<f64> {
    ms.iter().map(|&m| 1.0 / m as f64).collect()
}

struct Defaults {
    dim: usize,
    surface: SurfaceConfig,
    h_list: Vec<f64>,
    ensemble: EnsembleConfig,
    resolution: usize,
}

fn defaults(kind: Kind) -> Defaults {
    let sweep = inverse(&[5, 10, 20, 40, 80]);
    let none = EnsembleConfig { shells: vec![25], draws: 1 };
    let d = |dim, surface, h_list, ensemble, resolution| Defaults { dim, surface, h_list, ensemble, resolution };
    match kind {
        Kind::CircleExample => d(1, SurfaceConfig::Vertical { e: vec![1], c: 0.0 }, inverse(&[10, 40]), none, 200),
        Kind::Identities => d(
            2,
            SurfaceConfig::graph(),
            Vec::new(),
            EnsembleConfig { shells: vec![25, 50, 65, 85, 125, 325], draws: 1 },
            1000,
        ),
        Kind::Wavefront => d(
            2,
            SurfaceConfig::vertical_x1(),
            inverse(&[10, 20, 40, 80]),
            EnsembleConfig { shells: vec![25, 65, 325], draws: 20 },
            0,
        ),
        Kind::QerConvergence => {
            d(2, SurfaceConfig::vertical_x1(), sweep, EnsembleConfig { shells: vec![25], draws: 64 }, 0)
        }
        Kind::BoundsScaling => {
            d(2, SurfaceConfig::graph(), sweep, EnsembleConfig { shells: vec![25, 65, 325, 1105], draws: 8 }, 0)
        }
        Kind::EllipticityScan => d(2, SurfaceConfig::graph(), Vec::new(), none, 128),
        Kind::GeneralPosition => d(2, SurfaceConfig::vertical_x1(), Vec::new(), none, 256),
        Kind::Multiplier => d(2, SurfaceConfig::vertical_x1(), sweep, none, 0),
    }
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            manifold: None,
            hypersurface: None,
            h_list: None,
            ensemble: None,
            resolution: None,
            out: None,
            seed: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    /// Fill defaults and apply overrides. `env_out` is the value of [`OUT_ENV`].
    pub fn resolve(&self, ov: &Overrides, env_out: Option<PathBuf>) -> Result<Resolved, ConfigError> {
        let d = defaults(self.kind);
        if ov.resolution.or(self.resolution) == Some(0) {
            return Err(ConfigError("resolution must be positive".into()));
        }
        let (dim, tau) = match &self.manifold {
            Some(m) => (m.dim, m.tau),
            None => (d.dim, DEFAULT_TAU),
        };
        let r = Resolved {
            kind: self.kind,
            dim,
            tau,
            hypersurface: self.hypersurface.clone().unwrap_or_else(|| d.surface.clone()),
            h_list: ov.h_list.clone().or_else(|| self.h_list.clone()).unwrap_or_else(|| d.h_list.clone()),
            ensemble: self.ensemble.clone().unwrap_or_else(|| d.ensemble.clone()),
            resolution: ov.resolution.or(self.resolution).unwrap_or(d.resolution),
            seed: ov.seed.or(self.seed).unwrap_or(1),
            out: ov
                .out
                .clone()
                .or(env_out)
                .or_else(|| self.out.clone())
                .unwrap_or_else(|| PathBuf::from("tubeqer-out")),
        };
        r.validate(&d)?;
        Ok(r)
    }
}

impl Resolved {
    fn validate(&self, d: &Defaults) -> Result<(), ConfigError> {
        let err = |s: String| Err(ConfigError(s));
        if self.dim != d.dim {
            return err(format!("{} runs on dimension {}, got manifold.dim = {}", self.kind, d.dim, self.dim));
        }
        if !(self.tau > 1.0) {
            return err(format!("manifold.tau must exceed 1, got {}", self.tau));
        }
        if self.h_list.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
            return err("h-list entries must lie in (0, 1)".into());
        }
        if self.h_list.windows(2).any(|w| w[1] >= w[0]) {
            return err("h-list must be strictly decreasing".into());
        }
        let needs_h = !d.h_list.is_empty();
        if needs_h && self.h_list.is_empty() {
            return err(format!("{} needs a non-empty h-list", self.kind));
        }
        // Slopes are fitted over the sweep; a monotone trend needs two points.
        let min_h = match self.kind {
            Kind::Wavefront | Kind::QerConvergence | Kind::BoundsScaling => tubeqer::fit::MIN_POINTS,
            Kind::Multiplier => 2,
            _ => 0,
        };
        if self.h_list.len() < min_h {
            return err(format!("{} needs at least {min_h} h values, got {}", self.kind, self.h_list.len()));
        }
        // The uniform-bound sweep takes h = 1/R from the shells.
        if self.kind == Kind::BoundsScaling {
            let s = &self.ensemble.shells;
            if s.len() < tubeqer::fit::MIN_POINTS || s.windows(2).any(|w| w[1] <= w[0]) {
                return err(format!(
                    "bounds-scaling needs at least {} strictly increasing ensemble shells",
                    tubeqer::fit::MIN_POINTS
                ));
            }
        }
        if matches!(self.kind, Kind::CircleExample | Kind::Wavefront | Kind::QerConvergence | Kind::Multiplier) {
            for h in &self.h_list {
                let m = (1.0 / h).round();
                if ((1.0 / h) - m).abs() > 1e-9 {
                    return err(format!("{} needs h = 1/m with integer m, got {h}", self.kind));
                }
            }
        }
        if d.resolution > 0 && self.resolution == 0 {
            return err("resolution must be positive".into());
        }
        if self.ensemble.shells.is_empty() || self.ensemble.draws == 0 {
            return err("ensemble needs at least one shell and one draw".into());
        }
        if self.ensemble.shells.iter().any(|r2| tubeqer::spectral::shell_points(2, *r2).is_empty()) {
            return err("every ensemble shell must contain lattice points".into());
        }
        self.surface()?;
        Ok(())
    }
}

/// Parse `0.1,0.05` or `1/10,1/20`.
pub fn parse_h_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t.split_once('/') {
                Some((a, b)) => {
                    let a: f64 = a.trim().parse().map_err(|_| format!("bad number {t:?}"))?;
                    let b: f64 = b.trim().parse().map_err(|_| format!("bad number {t:?}"))?;
                    Ok(a / b)
                }
                None => t.parse().map_err(|_| format!("bad number {t:?}")),
            }
        })
        .collect()
}
