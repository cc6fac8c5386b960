use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use koopman_kkl_cli::commands::{self, MODEL_FILE, PAIRS_FILE, SCATTER_FILE};
use koopman_kkl_cli::{CliError, PipelineConfig};

/// Data-driven KKL observer synthesis for planar limit-cycle systems.
#[derive(Debug, Parser)]
#[command(name = "kkl", version)]
struct Args {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for all outputs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Validate the configuration, print it with defaults resolved and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate snapshot pairs and the scattered inverse-map set.
    Generate,
    /// Fit eigenfunctions, the injection and its inverse.
    Fit {
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
    /// Run the observer with a fitted model.
    Observe {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// generate, fit and observe in one go.
    Pipeline,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.dry_run {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let out = &args.out_dir;
    match args.command {
        Command::Generate => {
            let data = commands::cmd_generate(&cfg, out)?;
            println!("{data}");
        }
        Command::Fit { pairs, scatter } => {
            let pairs = pairs.unwrap_or_else(|| out.join(PAIRS_FILE));
            let scatter = scatter.unwrap_or_else(|| out.join(SCATTER_FILE));
            let fit = commands::cmd_fit(&cfg, &pairs, &scatter, out)?;
            println!("{}", fit.diagnostics);
        }
        Command::Observe { model } => {
            let model = model.unwrap_or_else(|| out.join(MODEL_FILE));
            let obs = commands::cmd_observe(&cfg, &model, out)?;
            println!("{obs}");
        }
        Command::Pipeline => {
            let res = commands::cmd_pipeline(&cfg, out)?;
            println!("{}\n{}\n{}", res.data, res.fit.diagnostics, res.observation);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
