use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use tubeqer_cli::config::{parse_h_list, ExperimentConfig, Kind, Overrides, OUT_ENV};
use tubeqer_cli::{execute, exit, exit_code};

/// Run a tubeqer experiment. Exit status: 0 when every check passes,
/// 2 when a check fails, 1 on configuration or output errors.
#[derive(Clone, Debug)]
struct HList(Vec<f64>);

#[derive(Parser, Debug)]
#[command(name = "tubeqer", version)]
struct Cli {
    /// Experiment kind.
    #[arg(value_enum)]
    kind: Kind,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config; its `kind` must match the experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; artifacts go to <out>/<kind>/. Overrides TUBEQER_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated, strictly decreasing; `1/40` is accepted.
    #[arg(long, value_parser = |s: &str| parse_h_list(s).map(HList))]
    h_list: Option<HList>,
    /// Main grid size of the experiment (see README).
    #[arg(long)]
    resolution: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::ERROR } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let file = match &cli.common.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) if c.kind == cli.kind => c,
            Ok(c) => {
                eprintln!("error: config is for {} but {} was requested", c.kind, cli.kind);
                return ExitCode::from(exit::ERROR as u8);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit::ERROR as u8);
            }
        },
        None => ExperimentConfig::new(cli.kind),
    };
    let ov = Overrides {
        out: cli.common.out,
        seed: cli.common.seed,
        h_list: cli.common.h_list.map(|h| h.0),
        resolution: cli.common.resolution,
    };
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let cfg = match file.resolve(&ov, env_out) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit::ERROR as u8);
        }
    };
    let result = execute(&cfg);
    match &result {
        Ok((outcome, files)) => {
            for c in &outcome.checks {
                println!("{} [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.criterion, c.name, c.detail);
            }
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
