//! Replays an output directory from its CSVs and recorded announcements.
//!
//! Nothing is re-solved. Each period's announcement is re-certified against the
//! history reconstructed from the earlier rows, the realized forecast must lie
//! in its support, checkpoint scores are recomputed, and for dynamics runs the
//! player draws are replayed from the seed.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::table::{format_float, score_cells, CsvLog};
use super::{sha256_file, Config, Metadata, RunSummary};
use crate::domain::{ConvexDomain, TOL_GEOM};
use crate::dynamics::{softmax_response, GameSpec, SoftmaxResponse};
use crate::error::{Error, Result};
use crate::mixed::MixedForecast;
use crate::point::Point;
use crate::procedures::{EngineKind, ForecastEngine, FP_FALLBACK_FACTOR};
use crate::rng::{SimRng, PLAYER_STREAM};
use crate::scores::ScoreSet;

/// Problems beyond this many per run are counted, not listed.
const MAX_LISTED: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCheck {
    pub seed: u64,
    pub periods: usize,
    pub checkpoints: usize,
    pub max_violation: f64,
    pub unsatisfied_steps: usize,
    pub problems: Vec<String>,
    pub problem_count: usize,
}

impl RunCheck {
    pub fn ok(&self) -> bool {
        self.problem_count == 0
    }

    fn problem(&mut self, msg: String) {
        if self.problems.len() < MAX_LISTED {
            self.problems.push(msg);
        }
        self.problem_count += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub runs: Vec<RunCheck>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.runs.iter().all(RunCheck::ok)
    }

    /// `Err(Verification)` listing the first problem of every failing run.
    pub fn into_result(self) -> Result<VerifyReport> {
        if self.ok() {
            return Ok(self);
        }
        let msg: Vec<String> = self
            .runs
            .iter()
            .filter(|r| !r.ok())
            .map(|r| format!("seed {}: {} problem(s), first: {}", r.seed, r.problem_count, r.problems[0]))
            .collect();
        Err(Error::Verification(msg.join("; ")))
    }
}

/// Verifies every run recorded in `dir/metadata.json`.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport> {
    let md = Metadata::read(dir)?;
    let runs = md.runs.iter().map(|r| verify_run(dir, &md, r)).collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport { runs })
}

struct Dyn {
    game: GameSpec,
    norm: GameSpec,
    beta: SoftmaxResponse,
    offsets: Vec<usize>,
    rng: SimRng,
}

fn verify_run(dir: &Path, md: &Metadata, run: &RunSummary) -> Result<RunCheck> {
    let mut check = RunCheck {
        seed: run.seed,
        periods: 0,
        checkpoints: 0,
        max_violation: f64::NEG_INFINITY,
        unsatisfied_steps: 0,
        problems: Vec::new(),
        problem_count: 0,
    };
    let csv_path = dir.join(&run.csv);
    let sha = sha256_file(&csv_path)?;
    if sha != run.csv_sha256 {
        check.problem(format!("{} sha256 {sha} differs from the recorded {}", run.csv, run.csv_sha256));
    }
    let log = match CsvLog::read(&csv_path) {
        Ok(l) => l,
        Err(Error::Verification(msg)) => {
            check.problem(msg);
            return Ok(check);
        }
        Err(e) => return Err(e),
    };

    let (mut engine, domain, mut dynamics, checkpoints) = match &md.config {
        Config::Forecast(c) => {
            let engine = ForecastEngine::new(&c.procedure, &c.domain, run.seed, c.retention)?;
            (engine, c.domain.clone(), None, c.run_options(run.seed).checkpoint_list())
        }
        Config::Dynamics(c) => {
            let game = c.game.resolve()?;
            let opts = c.options(run.seed)?;
            let domain = game.domain();
            let engine = ForecastEngine::new(&opts.procedure(), &domain, run.seed, Default::default())?;
            let d = Dyn {
                norm: game.normalized(),
                beta: softmax_response(&game, c.epsilon)?,
                offsets: game.offsets(),
                rng: SimRng::new(run.seed, PLAYER_STREAM),
                game,
            };
            (engine, domain, Some(d), opts.checkpoint_list())
        }
    };
    if log.m != domain.dim() || log.has_ne_gap != dynamics.is_some() {
        check.problem(format!("CSV layout (m = {}, ne_gap = {}) does not match the configuration", log.m, log.has_ne_gap));
        return Ok(check);
    }

    let mut sidecar = match (&run.announcements, engine.kind()) {
        (None, EngineKind::Fp) => None,
        (Some(name), kind) if kind != EngineKind::Fp => {
            let path = dir.join(name);
            let sha = sha256_file(&path)?;
            if Some(&sha) != run.announcements_sha256.as_ref() {
                check.problem(format!("{name} sha256 {sha} differs from the recorded value"));
            }
            Some(BufReader::new(fs::File::open(path)?).lines())
        }
        _ => {
            check.problem("announcement log missing or unexpected for this procedure".into());
            return Ok(check);
        }
    };

    let fp_allowance = FP_FALLBACK_FACTOR * engine.tolerance();
    let mut cp = checkpoints.iter().peekable();
    for (i, row) in log.rows.iter().enumerate() {
        let t = i as u64 + 1;
        if row.t != t {
            check.problem(format!("row {t} is labelled period {}", row.t));
            return Ok(check);
        }
        let c = Point::new(row.forecast.clone())?;
        let a = Point::new(row.action.clone())?;
        if !domain.contains(&c, TOL_GEOM) {
            check.problem(format!("period {t}: forecast {:?} is outside the domain", row.forecast));
        }
        if !domain.contains(&a, TOL_GEOM) {
            check.problem(format!("period {t}: action {:?} is outside the domain", row.action));
        }

        let announced = match sidecar.as_mut() {
            None => MixedForecast::point_mass(c.clone()),
            Some(lines) => match lines.next().transpose()? {
                None => {
                    check.problem(format!("announcement log ends before period {t}"));
                    return Ok(check);
                }
                Some(line) => match serde_json::from_str::<MixedForecast>(&line) {
                    Ok(eta) => eta,
                    Err(e) => {
                        check.problem(format!("period {t}: unreadable announcement: {e}"));
                        return Ok(check);
                    }
                },
            },
        };
        if !announced.contains_point(&c) {
            check.problem(format!("period {t}: forecast {:?} is not in the announced support", row.forecast));
        }
        match engine.certify(&announced) {
            Ok(d) => {
                check.max_violation = check.max_violation.max(d.violation);
                if !d.satisfied {
                    check.unsatisfied_steps += 1;
                    let tolerated = engine.kind() == EngineKind::Fp && d.violation <= fp_allowance;
                    if !tolerated {
                        check.problem(format!("period {t}: hedging certificate fails (violation {:.3e})", d.violation));
                    }
                }
            }
            Err(Error::Verification(msg)) => check.problem(format!("period {t}: {msg}")),
            Err(e) => return Err(e),
        }

        if let Some(d) = dynamics.as_mut() {
            let x = d.beta.eval(&c);
            let drawn: Vec<usize> = d
                .offsets
                .iter()
                .zip(d.game.strategies())
                .map(|(&o, &m)| d.rng.categorical(&x[o..o + m]))
                .collect();
            let expected = d.game.pure_profile(&drawn)?;
            if expected != row.action {
                check.problem(format!("period {t}: action {:?} differs from the replayed draw {expected:?}", row.action));
            }
            let gap = format_float(d.norm.ne_gap(&x)?);
            if row.ne_gap.as_deref() != Some(gap.as_str()) {
                check.problem(format!("period {t}: ne_gap {:?} differs from the recomputed {gap}", row.ne_gap));
            }
        }

        engine.observe(&c, &a)?;
        let is_cp = cp.peek() == Some(&&t);
        if is_cp {
            cp.next();
            check.checkpoints += 1;
        }
        match (&row.scores, is_cp) {
            (Some(cells), true) => {
                let s = score_cells(&ScoreSet::compute(engine.stats())?);
                if *cells != s {
                    check.problem(format!("period {t}: scores {cells:?} differ from the recomputed {s:?}"));
                }
            }
            (None, false) => {}
            (Some(_), false) => check.problem(format!("period {t}: scores on a non-checkpoint row")),
            (None, true) => check.problem(format!("period {t}: checkpoint row without scores")),
        }
    }
    check.periods = log.rows.len();

    if let Some(lines) = sidecar.as_mut() {
        if lines.next().is_some() {
            check.problem("announcement log has more lines than the CSV has rows".into());
        }
    }
    if check.periods as u64 != run.periods {
        check.problem(format!("{} rows, metadata records {} periods", check.periods, run.periods));
    }
    if run.error.is_none() && check.periods as u64 != md.config.horizon() {
        check.problem(format!("{} rows for a horizon of {}", check.periods, md.config.horizon()));
    }
    if check.unsatisfied_steps != run.certificates.unsatisfied_steps {
        check.problem(format!(
            "{} unsatisfied certificates, metadata records {}",
            check.unsatisfied_steps, run.certificates.unsatisfied_steps
        ));
    }
    Ok(check)
}

/// Domain of the forecasts recorded under `cfg`.
pub(super) fn config_domain(cfg: &Config) -> Result<ConvexDomain> {
    Ok(match cfg {
        Config::Forecast(c) => c.domain.clone(),
        Config::Dynamics(c) => c.game.resolve()?.domain(),
    })
}
