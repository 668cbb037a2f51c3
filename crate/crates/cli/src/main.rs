use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use zerolab_cli::commands::Command;
use zerolab_cli::{plan_jobs, run_jobs};

#[derive(Parser)]
#[command(name = "zerolab", version, about = "Deterministic initialization and training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Dump initial weight matrices, conv kernels and a value census.
    InitDump(Common),
    /// Train and record the loss/gradient/rank trace.
    Train(Common),
    /// Compare random, partial-identity and Hadamard arms against the rank bound.
    VerifyTheorem(Common),
    /// Magnitude-prune trained weights and record the accuracy curve.
    Prune(Common),
    /// Layer-1 gradient norms with and without learning-rate warmup.
    WarmupProbe(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); repeat to run several.
    #[arg(short, long = "config", required = true)]
    configs: Vec<PathBuf>,
    /// Override a config field, e.g. `training.lr=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: $ZERO_INIT_OUT, then the config's output_dir, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent experiments.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Standardize MNIST pixels with train-split statistics.
    #[arg(long)]
    standardize: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::InitDump(a) => (Command::InitDump, a),
        Sub::Train(a) => (Command::Train, a),
        Sub::VerifyTheorem(a) => (Command::VerifyTheorem, a),
        Sub::Prune(a) => (Command::Prune, a),
        Sub::WarmupProbe(a) => (Command::WarmupProbe, a),
    };
    let jobs = match plan_jobs(&args.configs, &args.overrides, args.standardize, args.out.as_deref()) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut code = 0;
    for (job, result) in jobs.iter().zip(run_jobs(cmd, &jobs, args.jobs)) {
        match result {
            Ok(()) => println!("{}: {} -> {}", cmd.name(), job.label, job.out.display()),
            Err(e) => {
                eprintln!("error [{}]: {e}", job.label);
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code as u8)
}
