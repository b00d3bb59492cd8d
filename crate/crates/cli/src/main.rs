use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cgst_core::scenario::{self, presets};
use cgst_core::{ScenarioConfig, ScenarioId, SplitMode};

#[derive(Parser)]
#[command(name = "cgst", version, about = "CGST upscaling of reactive transport on GRW lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coefficient recovery for uniform flow in 1D.
    #[command(name = "verify-1d")]
    Verify1d(RunArgs),
    /// Bimolecular reaction in uniform flow.
    #[command(name = "bimolecular-1d")]
    Bimolecular1d(RunArgs),
    /// Monod biodegradation in a random 1D aquifer.
    #[command(name = "aquifer-1d")]
    Aquifer1d(RunArgs),
    /// Monod biodegradation in a soil column with transient flow.
    #[command(name = "soil-1d")]
    Soil1d(RunArgs),
    /// Coefficient recovery for uniform flow in 2D.
    #[command(name = "verify-2d")]
    Verify2d(RunArgs),
    /// Monod biodegradation in a 2D soil with transient flow.
    #[command(name = "soil-2d")]
    Soil2d(RunArgs),
    /// Continuous injection in a random 2D aquifer.
    #[command(name = "aquifer-2d")]
    Aquifer2d(RunArgs),
    /// Discrepancy sweep over the window scales a and tau.
    Sweep(RunArgs),
    /// List the built-in presets.
    Presets,
    /// Print a preset as TOML.
    Show { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Det,
    Stoch,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; overrides --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset (defaults to the scenario name).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ensemble: Option<usize>,
    /// Output directory (default: the config's `output`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

fn load(id: ScenarioId, args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            ScenarioConfig::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        (None, Some(name)) => presets::preset(name)?,
        (None, None) => presets::preset(id.name())?,
    };
    if cfg.scenario != id {
        bail!(
            "configuration is for `{}`, not `{}`",
            cfg.scenario.name(),
            id.name()
        );
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.ensemble {
        cfg.ensemble = n;
    }
    if let Some(mode) = args.mode {
        cfg.mode = match mode {
            Mode::Det => SplitMode::Deterministic,
            Mode::Stoch => SplitMode::Stochastic,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(id: ScenarioId, args: &RunArgs) -> Result<()> {
    let cfg = load(id, args)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    log::info!("running {} into {}", id.name(), out.display());
    let manifest = scenario::run(&cfg, &out)?;
    let total: f64 = manifest.seconds.iter().sum();
    println!(
        "{}: {} run(s), {:.1} s, outputs in {}",
        manifest.scenario,
        manifest.seeds.len(),
        total,
        out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Verify1d(a) => run(ScenarioId::Verify1d, a),
        Command::Bimolecular1d(a) => run(ScenarioId::Bimolecular1d, a),
        Command::Aquifer1d(a) => run(ScenarioId::Aquifer1d, a),
        Command::Soil1d(a) => run(ScenarioId::Soil1d, a),
        Command::Verify2d(a) => run(ScenarioId::Verify2d, a),
        Command::Soil2d(a) => run(ScenarioId::Soil2d, a),
        Command::Aquifer2d(a) => run(ScenarioId::Aquifer2d, a),
        Command::Sweep(a) => run(ScenarioId::Sweep, a),
        Command::Presets => {
            for name in presets::names() {
                let cfg = presets::preset(name)?;
                println!("{name:18} {}", cfg.title);
            }
            Ok(())
        }
        Command::Show { name } => {
            print!("{}", presets::text(name)?);
            Ok(())
        }
    }
}
