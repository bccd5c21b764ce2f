use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phase_lattice::harness::{
    parse_sweep, run_experiment_in, run_sweep, validate_config_for, ExperimentConfig, ExperimentKind, HarnessError,
};

/// Binary waveguide lattice experiments.
#[derive(Parser)]
#[command(name = "phase-lattice", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Dispersion relation by every discrete method.
    Fig2(RunArgs),
    /// Single-site input, weak and strong coupling.
    Fig3(RunArgs),
    /// Two-site phased input, with and without the binary offset.
    Fig4(RunArgs),
    /// Dispersion and eigensolver cross-checks.
    SpectrumCompare(RunArgs),
    /// Continued-fraction, closed-form and Chebyshev mode checks.
    ModeValidate(RunArgs),
    /// Parse and range-check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Cartesian parameter sweep, one output directory per point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<u8, HarnessError> {
    let cfg = validate_config_for(&read(&args.config)?, Some(kind))?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let (manifest, status) = run_experiment_in(&cfg, &out)?;
    println!("{}: wrote {} files to {}", kind, manifest.files.len() + 1, out.display());
    for t in &manifest.taints {
        eprintln!("tainted ({}): {}", t.kind, t.detail);
    }
    Ok(status.exit_code())
}

fn validate(path: &PathBuf) -> Result<u8, HarnessError> {
    let raw = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&raw).unwrap_or(serde_json::Value::Null);
    // A sweep document is recognised by its `base` field.
    if value.get("base").is_some() {
        let sweep = parse_sweep(&raw)?;
        let points = phase_lattice::harness::sweep::expand(&sweep)?;
        println!("valid sweep with {} points", points.len());
    } else {
        let cfg: ExperimentConfig = validate_config_for(&raw, None)?;
        println!("{}", cfg.to_json());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fig2(a) => run(ExperimentKind::Fig2Dispersion, a),
        Command::Fig3(a) => run(ExperimentKind::Fig3SingleSite, a),
        Command::Fig4(a) => run(ExperimentKind::Fig4Ratchet, a),
        Command::SpectrumCompare(a) => run(ExperimentKind::SpectrumCompare, a),
        Command::ModeValidate(a) => run(ExperimentKind::ModeValidate, a),
        Command::Validate { config } => validate(config),
        Command::Sweep { config } => read(config)
            .and_then(|raw| Ok(parse_sweep(&raw)?))
            .and_then(|s| run_sweep(&s))
            .map(|report| {
                for p in &report.points {
                    println!("point {:04} {}", p.index, p.status);
                }
                report.exit_code()
            }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
