//! Command-line front end: analytic sweeps, Monte Carlo runs and design
//! scenarios, written as CSV/JSON plus a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{Command, Format, Scenario};
use config::{Config, Origin};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "qmimo",
    version,
    about = "BER analysis of quantized massive-MIMO uplinks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// key = value file, or a manifest.json from an earlier run
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Comma-separated resolutions, e.g. 1,2,3,full
    #[arg(long, global = true)]
    bits: Option<String>,
    /// Eb/N0 grid in dB, START:STOP:STEP
    #[arg(long, global = true, allow_hyphen_values = true)]
    ebn0: Option<String>,
    /// Worker threads; 0 uses every core
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Any other key, e.g. --set n_users=8 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Nmin,
    Kmax,
    Power,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Closed-form and two-term BER over an Eb/N0 sweep
    Analyze,
    /// Monte Carlo BER over an Eb/N0 sweep
    Simulate,
    /// Channel estimation error, analytic and simulated
    Estimate,
    /// Pilot length needed to compensate for quantization
    Compensate,
    /// Antenna, user or power design study
    Scenario {
        #[arg(value_enum)]
        name: ScenarioArg,
    },
}

/// Resolves defaults, config file and flags, in increasing precedence.
fn resolve(common: &Common) -> Result<Config, CliError> {
    let mut cfg = Config::default();
    if let Some(p) = &common.config {
        cfg.apply_file(p)?;
    }
    if let Some(s) = common.seed {
        cfg.set("seed", &s.to_string(), Origin::Flag)?;
    }
    if let Some(b) = &common.bits {
        cfg.set("bits", b, Origin::Flag)?;
    }
    if let Some(e) = &common.ebn0 {
        cfg.set("ebn0", e, Origin::Flag)?;
    }
    if let Some(w) = common.workers {
        cfg.set("workers", &w.to_string(), Origin::Flag)?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v, Origin::Flag)?;
    }
    Ok(cfg)
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qmimo: {e}");
            e.exit_code()
        }
    }
}

fn run_parsed(cli: Cli) -> Result<i32, CliError> {
    let cfg = resolve(&cli.common)?;
    let command = match cli.command {
        Cmd::Analyze => Command::Analyze,
        Cmd::Simulate => Command::Simulate,
        Cmd::Estimate => Command::Estimate,
        Cmd::Compensate => Command::Compensate,
        Cmd::Scenario { name } => Command::Scenario(match name {
            ScenarioArg::Nmin => Scenario::Nmin,
            ScenarioArg::Kmax => Scenario::Kmax,
            ScenarioArg::Power => Scenario::Power,
        }),
    };
    let format = match cli.common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let outcome = commands::execute(command, &cfg, &cli.common.out, format)?;
    for o in &outcome.manifest.outputs {
        eprintln!("wrote {}", cli.common.out.join(&o.path).display());
    }
    if outcome.any_feasible {
        Ok(0)
    } else {
        eprintln!("qmimo: no feasible result");
        Ok(3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let dir = std::env::temp_dir().join(format!("qmimo-prec-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("run.cfg");
        std::fs::write(&file, "seed = 5\nn_users = 8\nworkers = 3\n").unwrap();
        let cli = Cli::try_parse_from([
            "qmimo",
            "analyze",
            "--config",
            file.to_str().unwrap(),
            "--seed",
            "9",
            "--set",
            "n_antennas=64",
        ])
        .unwrap();
        let cfg = resolve(&cli.common).unwrap();
        assert_eq!(cfg.raw("seed"), Some("9"));
        assert_eq!(cfg.origin("seed"), Some(Origin::Flag));
        assert_eq!(cfg.raw("n_users"), Some("8"));
        assert_eq!(cfg.origin("n_users"), Some(Origin::File(2)));
        assert_eq!(cfg.raw("n_antennas"), Some("64"));
        assert_eq!(cfg.raw("mod_order"), Some("16"));
        assert_eq!(cfg.origin("mod_order"), Some(Origin::Default));
        std::fs::remove_dir_all(&dir).ok();
    }
}
