//! Command-line entry point.

use clap::{Parser, Subcommand};
use distillkit_cli::config::load_config;
use distillkit_cli::runner;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "distillkit",
    about = "Dataset distillation experiments: selection and diffusion methods, metrics, plots, control simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Base seed; overrides the config's base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; the experiment writes to <out>/<config name>/.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build surrogate datasets for every configured (method, ipc) cell.
    Distill(CommonArgs),
    /// Score previously distilled surrogates and write reports.
    Eval(CommonArgs),
    /// Simulate the transport SDE and solve the toy three-level problem.
    ControlSim(CommonArgs),
    /// Render embedding scatter panels per method.
    Plot(CommonArgs),
    /// Run distill, eval, plot and control-sim in sequence.
    All(CommonArgs),
}

fn run(args: &CommonArgs, f: impl Fn(&distillkit_cli::ExperimentConfig, &std::path::Path, u64) -> distillkit::Result<distillkit_cli::Manifest>) -> ExitCode {
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let seed = args.seed.unwrap_or(cfg.base_seed);
    match f(&cfg, &args.out, seed) {
        Ok(manifest) => {
            println!(
                "ok: {} artifacts under {}",
                manifest.all_artifacts().len(),
                args.out.join(&cfg.name).display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Distill(args) => run(args, runner::run_distill),
        Command::Eval(args) => run(args, runner::run_eval),
        Command::ControlSim(args) => run(args, runner::run_control_sim),
        Command::Plot(args) => run(args, runner::run_plot),
        Command::All(args) => run(args, runner::run_all),
    }
}
