mod commands;
mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;
use crate::run::Run;

/// MRI RF pulse design: conventional baselines, learned generation and
/// gradient refinement.
#[derive(Parser, Debug)]
#[command(name = "rfpulse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; library defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "RFPULSE_OUT", default_value = "rfpulse-out")]
    out: PathBuf,
    /// Worker threads; 1 gives bitwise reproducible output.
    #[arg(long, global = true, env = "RFPULSE_THREADS")]
    threads: Option<usize>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `refine.snapshot_every`.
    #[arg(long, global = true)]
    snapshot_every: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// SLR excitation or inversion pulse.
    DesignSlr,
    /// Adiabatic full-passage pulse.
    DesignAdiabatic,
    /// Minimum-energy adiabatic parameters meeting the inversion threshold.
    GridSearch,
    /// Train the recurrent generator and keep the best pulses as seeds.
    Generate,
    /// Gradient-ascent refinement of seed pulses.
    Refine,
    /// Generation followed by refinement of the generated seeds.
    Pipeline,
    /// Pipeline with one stage removed.
    Ablate {
        /// Refine random seeds instead of generated ones.
        #[arg(long, conflicts_with = "skip_refinement", required_unless_present = "skip_refinement")]
        skip_generation: bool,
        /// Stop after generation.
        #[arg(long)]
        skip_refinement: bool,
    },
    /// Profile and spin trajectories of a pulse.
    Simulate,
    /// Band metrics and adiabaticity of a pulse.
    Analyze,
    /// Metrics of two pulses and their differences.
    Compare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::DesignSlr => "design-slr",
            Command::DesignAdiabatic => "design-adiabatic",
            Command::GridSearch => "grid-search",
            Command::Generate => "generate",
            Command::Refine => "refine",
            Command::Pipeline => "pipeline",
            Command::Ablate { .. } => "ablate",
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::Compare => "compare",
        }
    }
}

fn dispatch(cmd: Command, cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    use commands::*;
    match cmd {
        Command::DesignSlr => design_slr_cmd(cfg, run),
        Command::DesignAdiabatic => design_adiabatic_cmd(cfg, run),
        Command::GridSearch => grid_search_cmd(cfg, run),
        Command::Generate => generate_cmd(cfg, run),
        Command::Refine => refine_cmd(cfg, run),
        Command::Pipeline => pipeline_cmd(cfg, run),
        Command::Ablate { skip_generation, .. } => ablate_cmd(cfg, run, skip_generation),
        Command::Simulate => simulate_cmd(cfg, run),
        Command::Analyze => analyze_cmd(cfg, run),
        Command::Compare => compare_cmd(cfg, run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let threads = cli.threads.unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    }

    let mut cfg = match &cli.config {
        Some(p) => match Config::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(k) = cli.snapshot_every {
        cfg.refine.snapshot_every = k;
    }
    let toml = match cfg.to_toml() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let mut run = match Run::new(cli.command.name(), &cli.out, &toml, cfg.seed, rayon::current_num_threads()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot prepare {}: {e}", cli.out.display());
            return ExitCode::from(1);
        }
    };
    let result = dispatch(cli.command, &cfg, &mut run);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(run.finish(result) as u8)
}
