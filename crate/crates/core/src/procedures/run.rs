use std::fmt;

use serde::{Deserialize, Serialize};

use super::engine::{EngineKind, ForecastEngine, StepDiagnostics};
use crate::mixed::MixedForecast;
use super::ProcedureSpec;
use crate::adversaries::{Adversary, AdversarySpec, InfoMode, Leak};
use crate::domain::ConvexDomain;
use crate::error::Error;
use crate::history::Retention;
use crate::point::Point;
use crate::scores::ScoreSet;

/// Powers of two up to the horizon, plus the horizon itself.
pub fn checkpoints(horizon: u64) -> Vec<u64> {
    let mut v: Vec<u64> = std::iter::successors(Some(1u64), |x| x.checked_mul(2)).take_while(|&x| x <= horizon).collect();
    if v.last() != Some(&horizon) && horizon > 0 {
        v.push(horizon);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub horizon: u64,
    pub seed: u64,
    /// Score checkpoints; empty means powers of two plus the horizon.
    #[serde(default)]
    pub checkpoints: Vec<u64>,
    #[serde(default)]
    pub retention: Retention,
}

impl RunOptions {
    pub fn new(horizon: u64, seed: u64) -> Self {
        RunOptions { horizon, seed, checkpoints: Vec::new(), retention: Retention::default() }
    }

    pub fn checkpoint_list(&self) -> Vec<u64> {
        if self.checkpoints.is_empty() {
            checkpoints(self.horizon)
        } else {
            let mut v: Vec<u64> = self.checkpoints.iter().copied().filter(|&t| t >= 1 && t <= self.horizon).collect();
            v.sort_unstable();
            v.dedup();
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub forecast: Point,
    pub action: Point,
    pub diagnostics: StepDiagnostics,
    /// The announced distribution, kept for the stochastic procedures (an FP
    /// announcement is the point mass at `forecast`).
    pub announced: Option<MixedForecast>,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub steps: Vec<StepRecord>,
    pub scores: Vec<ScoreSet>,
    /// Engine state after the last completed period.
    pub engine: ForecastEngine,
}

impl RunRecord {
    pub fn final_scores(&self) -> Option<&ScoreSet> {
        self.scores.last()
    }

    /// Largest per-step hedging violation.
    pub fn max_violation(&self) -> f64 {
        self.steps.iter().map(|s| s.diagnostics.violation).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A run that stopped early; `partial` holds the completed periods.
#[derive(Debug)]
pub struct RunAborted {
    pub partial: Option<Box<RunRecord>>,
    pub error: Error,
}

impl fmt::Display for RunAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.partial.as_ref().map_or(0, |p| p.steps.len());
        write!(f, "run aborted after {t} periods: {}", self.error)
    }
}

impl std::error::Error for RunAborted {}

impl From<Error> for RunAborted {
    fn from(error: Error) -> Self {
        RunAborted { partial: None, error }
    }
}

/// Plays the engine against the adversary for `horizon` periods.
///
/// Each period the engine announces η_t, the adversary is shown what its mode
/// allows, the forecast is sampled from η_t, and both sides observe (c_t, a_t).
pub fn run(
    procedure: &ProcedureSpec,
    adversary: &AdversarySpec,
    domain: &ConvexDomain,
    opts: &RunOptions,
) -> Result<RunRecord, RunAborted> {
    let engine = ForecastEngine::new(procedure, domain, opts.seed, opts.retention)?;
    let adv = Adversary::new(adversary, domain, opts.seed)?;
    let mut record = RunRecord { steps: Vec::with_capacity(opts.horizon.min(1 << 24) as usize), scores: Vec::new(), engine };
    let cps = opts.checkpoint_list();
    match play(&mut record, adv, opts.horizon, &cps) {
        Ok(()) => Ok(record),
        Err(error) => Err(RunAborted { partial: Some(Box::new(record)), error }),
    }
}

fn play(record: &mut RunRecord, mut adv: Adversary, horizon: u64, cps: &[u64]) -> Result<(), Error> {
    let mut next_cp = 0;
    for t in 1..=horizon {
        let engine = &mut record.engine;
        let ann = engine.announce()?;
        let (c, a) = match adv.mode() {
            InfoMode::HistoryOnly => {
                let a = adv.next_action(Leak::None)?;
                (engine.sample(&ann), a)
            }
            InfoMode::DistributionLeak => {
                let a = adv.next_action(Leak::Distribution(&ann.forecast))?;
                (engine.sample(&ann), a)
            }
            InfoMode::RealizationLeak => {
                let c = engine.sample(&ann);
                let a = adv.next_action(Leak::Realization(&c))?;
                (c, a)
            }
        };
        engine.observe(&c, &a)?;
        adv.observe(&c, &a);
        let announced = (engine.kind() != EngineKind::Fp).then_some(ann.forecast);
        record.steps.push(StepRecord { forecast: c, action: a, diagnostics: ann.diagnostics, announced });
        if cps.get(next_cp) == Some(&t) {
            record.scores.push(ScoreSet::compute(record.engine.stats())?);
            next_cp += 1;
        }
    }
    Ok(())
}
