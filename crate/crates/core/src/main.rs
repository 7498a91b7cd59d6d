use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use roundtable::cli::{self, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "roundtable", version, about = "Round-table multi-agent consensus for multiple-choice brain teasers")]
struct Opts {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every dataset question through the round table.
    Run(RunArgs),
    /// Recompute consensus from a transcripts file, check it, and rescore.
    Replay(InputArgs),
    /// Score a predictions CSV.
    Score(ScoreArgs),
    /// Per-round, per-agent accuracy breakdown of a transcripts file.
    Report(InputArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Discussion rounds after the initial round.
    #[arg(long)]
    rounds: Option<usize>,
    /// TOML file of `[[agents]]` replacing the config's agents.
    #[arg(long)]
    agents: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    early_stop: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DatasetArg {
    #[arg(long, required_unless_present = "config")]
    dataset: Option<PathBuf>,
    /// Take the dataset path from a run config.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl DatasetArg {
    fn resolve(&self) -> Result<PathBuf, CliError> {
        match (&self.dataset, &self.config) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(c)) => Ok(RunConfig::load(c).map_err(CliError::Config)?.dataset),
            (None, None) => Err(CliError::Config("--dataset or --config is required".into())),
        }
    }
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    transcripts: PathBuf,
    #[command(flatten)]
    dataset: DatasetArg,
    /// Also write the report files into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[command(flatten)]
    dataset: DatasetArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

async fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let mut config = RunConfig::load(&args.config).map_err(CliError::Config)?;
            config
                .apply(&Overrides {
                    rounds: args.rounds,
                    agents: args.agents,
                    out: args.out,
                    concurrency: args.concurrency,
                    early_stop: args.early_stop,
                    seed: args.seed,
                })
                .map_err(CliError::Config)?;
            let outcome = cli::cmd_run(&config).await?;
            print!("{}", outcome.report.render_text());
            eprintln!("outputs written to {}", outcome.out_dir.display());
        }
        Command::Replay(args) => {
            let report = cli::cmd_replay(&args.transcripts, &args.dataset.resolve()?)?;
            println!("replay: 0 consensus mismatches");
            print!("{}", report.render_text());
            if let Some(out) = args.out {
                ensure_dir(&out)?;
                report.write(&out)?;
            }
        }
        Command::Score(args) => {
            let report = cli::cmd_score(&args.predictions, &args.dataset.resolve()?)?;
            print!("{}", report.render_text());
            println!();
            print!("{}", report.to_json());
            if let Some(out) = args.out {
                ensure_dir(&out)?;
                report.write(&out)?;
            }
        }
        Command::Report(args) => {
            let (rows, text) = cli::cmd_report(&args.transcripts, &args.dataset.resolve()?)?;
            print!("{text}");
            if let Some(out) = args.out {
                ensure_dir(&out)?;
                let json = serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n";
                std::fs::write(out.join("rounds.json"), json).map_err(|e| CliError::Io(e.to_string()))?;
                std::fs::write(out.join("rounds.txt"), &text).map_err(|e| CliError::Io(e.to_string()))?;
            }
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let opts = Opts::parse();
    match dispatch(opts.command).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Integrity(mismatches) = &e {
                for m in mismatches {
                    eprintln!("  {m}");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
