mod artifacts;
mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};
use commands::SweepParam;
use config::{parse_config, Overrides};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "crsirl", version, about = "Conversational recommendation with learned intrinsic rewards")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic catalog and its interaction splits.
    Gen,
    /// Pretrain TransE embeddings on the training interactions.
    Embed,
    /// Pretrain the policy with REINFORCE.
    Pretrain,
    /// Fine-tune the policy (CRSIRL, or plain PG with `--algorithm pg`).
    Train {
        /// Start from freshly initialized parameters instead of the pretrained policy.
        #[arg(long)]
        init: bool,
    },
    /// Evaluate a learned policy or a baseline on the test interactions.
    Eval,
    /// Train and evaluate once per value of one hyperparameter.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        init: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = parse_config(cli.overrides.config.as_deref(), &cli.overrides)?;
    log::debug!("config: {cfg:?}");
    match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Embed => commands::embed(&cfg),
        Command::Pretrain => commands::pretrain(&cfg),
        Command::Train { init } => commands::train(&cfg, init),
        Command::Eval => commands::eval(&cfg),
        Command::Sweep { param, values, init } => commands::sweep(&cfg, param, &values, init),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CRSIRL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(error::exit_code(&e))
        }
    }
}
