//! Command line runner: experiments, re-scoring and verification.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use calibra::experiment::{rescore, run_experiment, verify_dir, write_rescore, Command, Config, ExperimentOptions, Metadata, METADATA_FILE};
use calibra::{BinningSpec, Error, Result};

#[derive(Parser)]
#[command(name = "calibra", version, about = "Calibrated forecasting by forecast hedging")]
struct Cli {
    /// error, warn, info, debug or trace; RUST_LOG takes precedence.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Binary-outcome procedure on a grid of N+1 forecasts.
    RunBinary(RunArgs),
    /// FP, MM or AD procedure against an adversary.
    RunForecast(RunArgs),
    /// Calibrated learning dynamics on a finite game.
    RunDynamics(RunArgs),
    /// Recompute K and K^Π for a CSV log under another binning.
    Score(ScoreArgs),
    /// Replay an output directory and check every certificate and score.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; seeds run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Allow adversaries that see the realized forecast against MM, AD and binary.
    #[arg(long)]
    allow_leak_break: bool,
    /// Added to every configured seed.
    #[arg(long, env = "CALIBRA_SEED_OFFSET", default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Args)]
struct ScoreArgs {
    /// A seed_<s>.csv written by one of the run commands.
    #[arg(long)]
    log: PathBuf,
    /// metadata.json of the run; defaults to the one next to the log.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Binning as JSON, e.g. '{"kind":"tent","resolution":8}'.
    #[arg(long)]
    binning: String,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Output directory of a run command.
    #[arg(long)]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log_level)).init();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(sub: Sub) -> Result<i32> {
    match sub {
        Sub::RunBinary(a) => run(Command::RunBinary, a),
        Sub::RunForecast(a) => run(Command::RunForecast, a),
        Sub::RunDynamics(a) => run(Command::RunDynamics, a),
        Sub::Score(a) => score(a),
        Sub::Verify(a) => verify(&a.dir),
    }
}

fn run(command: Command, a: RunArgs) -> Result<i32> {
    let text = read_at(&a.config)?;
    let cfg = Config::parse(&text, command, a.allow_leak_break)?;
    let opts = ExperimentOptions { out_dir: a.out.clone(), jobs: a.jobs, seed_offset: a.seed_offset };
    let md = run_experiment(command, &cfg, &opts)?;
    for r in &md.runs {
        match &r.error {
            None => println!("seed {}: {} periods -> {}", r.seed, r.periods, a.out.join(&r.csv).display()),
            Some(e) => println!("seed {}: stopped after {} periods: {e}", r.seed, r.periods),
        }
    }
    Ok(md.exit_code())
}

fn score(a: ScoreArgs) -> Result<i32> {
    let md_path = match a.metadata {
        Some(p) => p,
        None => a.log.parent().unwrap_or(Path::new(".")).join(METADATA_FILE),
    };
    let dir = md_path.parent().unwrap_or(Path::new("."));
    if md_path.file_name().and_then(|n| n.to_str()) != Some(METADATA_FILE) {
        return Err(Error::Config(format!("metadata file must be named {METADATA_FILE}")));
    }
    let md = Metadata::read(dir)?;
    let binning: BinningSpec =
        serde_json::from_str(&a.binning).map_err(|e| Error::Config(format!("--binning: {e}")))?;
    let rows = rescore(&a.log, &md, &binning)?;
    match a.out {
        Some(p) => write_rescore(&mut io::BufWriter::new(fs::File::create(p)?), &rows)?,
        None => write_rescore(&mut io::stdout().lock(), &rows)?,
    }
    io::stdout().flush()?;
    Ok(0)
}

fn verify(dir: &Path) -> Result<i32> {
    let report = verify_dir(dir)?;
    for r in &report.runs {
        let status = if r.ok() { "ok" } else { "FAILED" };
        println!(
            "seed {}: {status} ({} periods, {} checkpoints, max violation {:.3e}, {} unsatisfied certificates)",
            r.seed, r.periods, r.checkpoints, r.max_violation, r.unsatisfied_steps
        );
        for p in &r.problems {
            println!("  {p}");
        }
        if r.problem_count > r.problems.len() {
            println!("  ... {} more", r.problem_count - r.problems.len());
        }
    }
    report.into_result().map(|_| 0)
}

fn read_at(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
