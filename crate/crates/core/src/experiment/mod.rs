//! Batch experiments: seeded runs written as CSV time series plus one
//! metadata file, and the `score` / `verify` passes over those outputs.

mod config;
mod rescore;
mod table;
mod verify;

pub use config::{Command, Config, DynamicsConfig, ForecastConfig, GameRef};
pub use rescore::{rescore, write_rescore, RescoreRow, RESCORE_SLACK};
pub use table::{csv_header, format_float, CsvLog, CsvRecord, CsvRow, CsvWriter};
pub use verify::{verify_dir, RunCheck, VerifyReport};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{ne_fraction, run_dynamics, Trajectory};
use crate::error::{Error, Result};
use crate::point::Point;
use crate::procedures::{run, EngineKind, RunRecord};
use crate::scores::ScoreSet;

pub const METADATA_FILE: &str = "metadata.json";

/// Per-run certificate digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub max_violation: f64,
    /// Steps whose certificate missed its tolerance (FP best-effort steps).
    pub unsatisfied_steps: usize,
    pub tolerance: f64,
    pub max_support: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mean_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSummary {
    /// Share of the last half with ne_gap ≤ 2ε.
    pub ne_fraction_last_half: f64,
    pub mean_ne_gap_last_half: f64,
    pub mean_response_distance_last_half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub csv: String,
    pub csv_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub announcements: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub announcements_sha256: Option<String>,
    pub periods: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_scores: Option<ScoreSet>,
    pub certificates: CertificateSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsSummary>,
    /// Set when the run stopped early; the files hold the completed periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
}

/// Reference values for plots: γ = diam C, so the FP bound reads γ/√t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub gamma: f64,
    /// ε of the MM/AD procedures, 1/(2N) for the binary one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub calibra_version: String,
    pub command: Command,
    pub config: Config,
    pub seed_offset: u64,
    pub columns: Vec<String>,
    pub references: References,
    pub runs: Vec<RunSummary>,
}

impl Metadata {
    pub fn read(dir: &Path) -> Result<Metadata> {
        let path = dir.join(METADATA_FILE);
        let text = fs::read_to_string(&path).map_err(|e| with_path(e, &path))?;
        let md: Metadata = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{METADATA_FILE}: {e}")))?;
        md.config.validate(md.command, true)?;
        Ok(md)
    }

    /// Worst exit code over the runs.
    pub fn exit_code(&self) -> i32 {
        self.runs.iter().filter_map(|r| r.exit_code).max().unwrap_or(0)
    }
}

/// How an experiment is executed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub out_dir: PathBuf,
    /// Worker threads; runs are independent per seed.
    pub jobs: usize,
    /// Added to every configured seed (batch sharding).
    pub seed_offset: u64,
}

fn csv_name(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

fn announcements_name(seed: u64) -> String {
    format!("seed_{seed}.announcements.jsonl")
}

/// Runs every seed of `cfg`, writes `seed_<s>.csv` (plus the announcement log
/// for stochastic procedures) and `metadata.json` into the output directory.
pub fn run_experiment(command: Command, cfg: &Config, opts: &ExperimentOptions) -> Result<Metadata> {
    fs::create_dir_all(&opts.out_dir)?;
    let seeds: Vec<u64> = cfg
        .seeds()
        .iter()
        .map(|s| s.checked_add(opts.seed_offset).ok_or_else(|| Error::Config("seed offset overflows".into())))
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<Result<RunSummary>> =
        pool.install(|| seeds.par_iter().map(|&seed| run_one(cfg, seed, &opts.out_dir)).collect());
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let (dimension, gamma, epsilon) = references(cfg)?;
    let md = Metadata {
        calibra_version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        config: cfg.clone(),
        seed_offset: opts.seed_offset,
        columns: csv_header(dimension, matches!(cfg, Config::Dynamics(_))),
        references: References { gamma, epsilon, dimension },
        runs,
    };
    let mut text = serde_json::to_string_pretty(&md)?;
    text.push('\n');
    fs::write(opts.out_dir.join(METADATA_FILE), text)?;
    Ok(md)
}

fn references(cfg: &Config) -> Result<(usize, f64, Option<f64>)> {
    Ok(match cfg {
        Config::Forecast(c) => {
            let eps = match &c.procedure {
                crate::procedures::ProcedureSpec::Mm { epsilon, .. } | crate::procedures::ProcedureSpec::Ad { epsilon, .. } => {
                    Some(*epsilon)
                }
                crate::procedures::ProcedureSpec::Binary { n } => Some(0.5 / *n as f64),
                crate::procedures::ProcedureSpec::Fp { .. } => None,
            };
            (c.domain.dim(), c.domain.diameter(), eps)
        }
        Config::Dynamics(c) => {
            let d = c.game.resolve()?.domain();
            (d.dim(), d.diameter(), Some(c.epsilon))
        }
    })
}

fn run_one(cfg: &Config, seed: u64, dir: &Path) -> Result<RunSummary> {
    log::info!("seed {seed}: starting");
    let summary = match cfg {
        Config::Forecast(c) => run_forecast_seed(c, seed, dir)?,
        Config::Dynamics(c) => run_dynamics_seed(c, seed, dir)?,
    };
    match &summary.error {
        Some(e) => log::error!("seed {seed}: {e}"),
        None => log::info!("seed {seed}: {} periods", summary.periods),
    }
    Ok(summary)
}

/// A writer that hashes what passes through it.
struct Hashing<W: Write> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for Hashing<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

fn create_hashing(path: &Path) -> Result<Hashing<BufWriter<fs::File>>> {
    Ok(Hashing { inner: BufWriter::new(fs::File::create(path)?), hasher: Sha256::new() })
}

fn finish_hashing(mut w: Hashing<BufWriter<fs::File>>) -> Result<String> {
    w.flush()?;
    Ok(hex(&w.hasher.finalize()))
}

pub(crate) fn with_path(e: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| with_path(e, path))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn run_forecast_seed(c: &ForecastConfig, seed: u64, dir: &Path) -> Result<RunSummary> {
    let (record, error) = match run(&c.procedure, &c.adversary, &c.domain, &c.run_options(seed)) {
        Ok(r) => (r, None),
        Err(aborted) => match aborted.partial {
            Some(p) => (*p, Some(aborted.error)),
            None => return Err(aborted.error),
        },
    };
    let tolerance = record.engine.tolerance();
    let checkpoints = c.run_options(seed).checkpoint_list();
    let m = c.domain.dim();

    let csv_file = csv_name(seed);
    let mut w = create_hashing(&dir.join(&csv_file))?;
    let mut table = CsvWriter::new(&mut w, m, false)?;
    let mut scores = record.scores.iter();
    let mut next = checkpoints.iter().peekable();
    for (i, s) in record.steps.iter().enumerate() {
        let t = i as u64 + 1;
        let score = if next.peek() == Some(&&t) {
            next.next();
            scores.next()
        } else {
            None
        };
        table.row(&CsvRow { t, forecast: &s.forecast, action: &s.action, scores: score, ne_gap: None })?;
    }
    drop(table);
    let csv_sha256 = finish_hashing(w)?;

    let (announcements, announcements_sha256) = if record.engine.kind() == EngineKind::Fp {
        (None, None)
    } else {
        let name = announcements_name(seed);
        let mut w = create_hashing(&dir.join(&name))?;
        for s in &record.steps {
            let ann = s.announced.as_ref().ok_or_else(|| Error::contract("stochastic step without announcement"))?;
            serde_json::to_writer(&mut w, ann)?;
            w.write_all(b"\n")?;
        }
        (Some(name), Some(finish_hashing(w)?))
    };

    Ok(RunSummary {
        seed,
        csv: csv_file,
        csv_sha256,
        announcements,
        announcements_sha256,
        periods: record.steps.len() as u64,
        final_scores: record.final_scores().copied(),
        certificates: certificate_summary(&record, tolerance),
        dynamics: None,
        exit_code: error.as_ref().map(Error::exit_code),
        error: error.map(|e| e.to_string()),
    })
}

fn certificate_summary(record: &RunRecord, tolerance: f64) -> CertificateSummary {
    let d = record.steps.iter().map(|s| &s.diagnostics);
    let fold_opt = |f: fn(&crate::procedures::StepDiagnostics) -> Option<f64>| {
        record.steps.iter().filter_map(|s| f(&s.diagnostics)).reduce(f64::max)
    };
    CertificateSummary {
        max_violation: d.clone().map(|x| x.violation).fold(f64::NEG_INFINITY, f64::max),
        unsatisfied_steps: d.clone().filter(|x| !x.satisfied).count(),
        tolerance,
        max_support: d.map(|x| x.support).max().unwrap_or(0),
        max_mean_error: fold_opt(|x| x.mean_error),
        max_radius: fold_opt(|x| x.radius),
    }
}

fn run_dynamics_seed(c: &DynamicsConfig, seed: u64, dir: &Path) -> Result<RunSummary> {
    let game = c.game.resolve()?;
    let opts = c.options(seed)?;
    let (traj, error) = match run_dynamics(&game, &opts) {
        Ok(t) => (t, None),
        Err(aborted) => match aborted.partial {
            Some(p) => (*p, Some(aborted.error)),
            None => return Err(aborted.error),
        },
    };
    let checkpoints = opts.checkpoint_list();
    let csv_file = csv_name(seed);
    let mut w = create_hashing(&dir.join(&csv_file))?;
    let mut table = CsvWriter::new(&mut w, game.dim(), true)?;
    let mut scores = traj.scores.iter();
    let mut next = checkpoints.iter().peekable();
    for i in 0..traj.len() {
        let t = i as u64 + 1;
        let score = if next.peek() == Some(&&t) {
            next.next();
            scores.next().map(|s| &s.pure)
        } else {
            None
        };
        let a = Point::from_vec(game.pure_profile(&traj.actions[i])?);
        table.row(&CsvRow { t, forecast: &traj.forecasts[i], action: &a, scores: score, ne_gap: Some(traj.ne_gaps[i]) })?;
    }
    drop(table);
    let csv_sha256 = finish_hashing(w)?;
    Ok(RunSummary {
        seed,
        csv: csv_file,
        csv_sha256,
        announcements: None,
        announcements_sha256: None,
        periods: traj.len() as u64,
        final_scores: traj.scores.last().map(|s| s.pure),
        certificates: CertificateSummary {
            max_violation: traj.max_violation,
            unsatisfied_steps: traj.unsatisfied_steps,
            tolerance: traj.engine.tolerance(),
            max_support: usize::from(traj.len() > 0),
            max_mean_error: None,
            max_radius: Some(0.0),
        },
        dynamics: dynamics_summary(&traj)?,
        exit_code: error.as_ref().map(Error::exit_code),
        error: error.map(|e| e.to_string()),
    })
}

fn dynamics_summary(traj: &Trajectory) -> Result<Option<DynamicsSummary>> {
    let n = traj.len();
    if n < 2 {
        return Ok(None);
    }
    let window = n / 2..n;
    let nf = ne_fraction(traj, 2.0 * traj.epsilon, window.clone())?;
    Ok(Some(DynamicsSummary {
        ne_fraction_last_half: nf.fraction,
        mean_ne_gap_last_half: nf.mean_gap,
        mean_response_distance_last_half: traj.mean_response_distance(window)?,
    }))
}
