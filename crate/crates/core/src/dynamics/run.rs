//! Calibrated ε-learning: shared FP forecasts, logit replies, sampled play.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::game::GameSpec;
use super::response::{softmax_response, SoftmaxResponse};
use crate::binning::{BinningSpec, WeightFn};
use crate::error::{Error, Result};
use crate::history::{HistoryStats, Retention};
use crate::point::{dist, Point};
use crate::procedures::{checkpoints, ForecastEngine, ProcedureSpec};
use crate::rng::{SimRng, PLAYER_STREAM};
use crate::scores::{binned_score, ScoreSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsOptions {
    pub epsilon: f64,
    pub horizon: u64,
    pub seed: u64,
    /// FP binning on the profile space; defaults to normalized tents at resolution 4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binning: Option<BinningSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub checkpoints: Vec<u64>,
}

impl DynamicsOptions {
    pub fn new(epsilon: f64, horizon: u64, seed: u64) -> Self {
        DynamicsOptions { epsilon, horizon, seed, binning: None, tolerance: None, checkpoints: Vec::new() }
    }

    /// The FP procedure shared by all players.
    pub fn procedure(&self) -> ProcedureSpec {
        ProcedureSpec::Fp {
            binning: Some(self.binning.clone().unwrap_or(BinningSpec::Tent { resolution: 4, width: None })),
            tolerance: self.tolerance,
        }
    }

    pub fn checkpoint_list(&self) -> Vec<u64> {
        if self.checkpoints.is_empty() {
            return checkpoints(self.horizon);
        }
        let mut v: Vec<u64> = self.checkpoints.iter().copied().filter(|&t| t >= 1 && t <= self.horizon).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Scores at a checkpoint for the realized actions (g_t) and the behaviors (g̃_t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsScores {
    pub pure: ScoreSet,
    /// Σ_i ‖g̃_t(w_i)‖ with g̃_t(w) = (1/t)Σ w(c_s)(x_s − c_s).
    pub mixed_k_binned: f64,
    pub ne_gap: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub game: GameSpec,
    pub epsilon: f64,
    pub forecasts: Vec<Point>,
    pub behaviors: Vec<Point>,
    pub actions: Vec<Vec<usize>>,
    /// ne_gap(x_t) on payoffs normalized to [0, 1].
    pub ne_gaps: Vec<f64>,
    /// ‖β(c_t) − c_t‖.
    pub response_distance: Vec<f64>,
    /// Largest per-step (D-FH) violation.
    pub max_violation: f64,
    /// Periods whose forecast missed the solver tolerance (best-effort fallback).
    pub unsatisfied_steps: usize,
    pub scores: Vec<DynamicsScores>,
    pub engine: ForecastEngine,
    pub mixed: HistoryStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.forecasts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forecasts.is_empty()
    }

    /// The unit-vector embedding of period s's pure profile.
    pub fn action_point(&self, s: usize) -> Point {
        Point::from_vec(self.game.pure_profile(&self.actions[s]).expect("recorded profile"))
    }

    /// Mean of ‖β(c_s) − c_s‖ over the periods in `window`.
    pub fn mean_response_distance(&self, window: Range<usize>) -> Result<f64> {
        let slice = self.response_distance.get(window.clone()).filter(|s| !s.is_empty());
        let s = slice.ok_or_else(|| Error::invalid(format!("empty or out-of-range window {window:?}")))?;
        Ok(s.iter().sum::<f64>() / s.len() as f64)
    }
}

#[derive(Debug)]
pub struct DynamicsAborted {
    pub partial: Option<Box<Trajectory>>,
    pub error: Error,
}

impl fmt::Display for DynamicsAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.partial.as_ref().map_or(0, |p| p.len());
        write!(f, "dynamics aborted after {t} periods: {}", self.error)
    }
}

impl std::error::Error for DynamicsAborted {}

impl From<Error> for DynamicsAborted {
    fn from(error: Error) -> Self {
        DynamicsAborted { partial: None, error }
    }
}

/// Runs the dynamic: each period every player reads the shared FP forecast
/// c_t, plays x_t = β(c_t), and a pure profile a_t is drawn from x_t
/// independently across players.
pub fn run_dynamics(game: &GameSpec, opts: &DynamicsOptions) -> Result<Trajectory, DynamicsAborted> {
    let beta = softmax_response(game, opts.epsilon)?;
    let domain = game.domain();
    let spec = opts.procedure();
    let engine = ForecastEngine::new(&spec, &domain, opts.seed, Retention::default())?;
    let mixed = HistoryStats::new(domain, engine.binning().clone(), Retention::default())?;
    let cap = opts.horizon.min(1 << 24) as usize;
    let mut traj = Trajectory {
        game: game.clone(),
        epsilon: opts.epsilon,
        forecasts: Vec::with_capacity(cap),
        behaviors: Vec::with_capacity(cap),
        actions: Vec::with_capacity(cap),
        ne_gaps: Vec::with_capacity(cap),
        response_distance: Vec::with_capacity(cap),
        max_violation: f64::NEG_INFINITY,
        unsatisfied_steps: 0,
        scores: Vec::new(),
        engine,
        mixed,
    };
    match play(&mut traj, &beta, opts) {
        Ok(()) => Ok(traj),
        Err(error) => Err(DynamicsAborted { partial: Some(Box::new(traj)), error }),
    }
}

fn play(traj: &mut Trajectory, beta: &SoftmaxResponse, opts: &DynamicsOptions) -> Result<()> {
    let norm = traj.game.normalized();
    let offsets = traj.game.offsets();
    let strategies = traj.game.strategies().to_vec();
    let mut rng = SimRng::new(opts.seed, PLAYER_STREAM);
    let cps = opts.checkpoint_list();
    let mut next_cp = 0;
    for t in 1..=opts.horizon {
        let (ann, c) = traj.engine.next_forecast()?;
        traj.max_violation = traj.max_violation.max(ann.diagnostics.violation);
        traj.unsatisfied_steps += usize::from(!ann.diagnostics.satisfied);
        let x = Point::from_vec(beta.eval(&c));
        let actions: Vec<usize> =
            offsets.iter().zip(&strategies).map(|(&o, &m)| rng.categorical(&x[o..o + m])).collect();
        let a = Point::from_vec(traj.game.pure_profile(&actions)?);
        traj.engine.observe(&c, &a)?;
        traj.mixed.record(&c, &x)?;
        let gap = norm.ne_gap(&x)?;
        traj.ne_gaps.push(gap);
        traj.response_distance.push(dist(&x, &c));
        traj.forecasts.push(c);
        traj.behaviors.push(x);
        traj.actions.push(actions);
        if cps.get(next_cp) == Some(&t) {
            let pure = ScoreSet::compute(traj.engine.stats())?;
            let b = traj.mixed.binning().clone();
            traj.scores.push(DynamicsScores { pure, mixed_k_binned: binned_score(&traj.mixed, &b)?, ne_gap: gap });
            next_cp += 1;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeFraction {
    /// Share of periods in the window with ne_gap ≤ ε′.
    pub fraction: f64,
    /// Mean ne_gap over the window.
    pub mean_gap: f64,
    pub periods: usize,
}

/// Fraction of periods s in `window` (0-based) with x_s ∈ NE(ε′).
pub fn ne_fraction(traj: &Trajectory, epsilon_prime: f64, window: Range<usize>) -> Result<NeFraction> {
    if !(epsilon_prime > traj.epsilon) {
        return Err(Error::invalid(format!("ε′ = {epsilon_prime} must exceed ε = {}", traj.epsilon)));
    }
    let gaps = traj
        .ne_gaps
        .get(window.clone())
        .filter(|g| !g.is_empty())
        .ok_or_else(|| Error::invalid(format!("empty or out-of-range window {window:?}")))?;
    let hits = gaps.iter().filter(|&&g| g <= epsilon_prime).count();
    Ok(NeFraction {
        fraction: hits as f64 / gaps.len() as f64,
        mean_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
        periods: gaps.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedGap {
    /// g̃_t(w) = (1/t)Σ w(c_s)(x_s − c_s).
    pub mixed_gap: Vec<f64>,
    /// (1/t)Σ w(c_s)(a_s − x_s), a martingale average.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
}

/// g̃_t(w) and the martingale residual g_t(w) − g̃_t(w) for each w.
pub fn mixed_gap_check(traj: &Trajectory, ws: &[WeightFn]) -> Result<Vec<MixedGap>> {
    let t = traj.len();
    if t == 0 {
        return Err(Error::EmptyHistory);
    }
    let m = traj.game.dim();
    let mut out = Vec::with_capacity(ws.len());
    for w in ws {
        let mut mixed = vec![0.0; m];
        let mut resid = vec![0.0; m];
        for s in 0..t {
            let c = &traj.forecasts[s];
            let wc = w.eval(c);
            if wc == 0.0 {
                continue;
            }
            let x = &traj.behaviors[s];
            let a = traj.action_point(s);
            for k in 0..m {
                mixed[k] += wc * (x[k] - c[k]);
                resid[k] += wc * (a[k] - x[k]);
            }
        }
        mixed.iter_mut().chain(resid.iter_mut()).for_each(|v| *v /= t as f64);
        let residual_norm = crate::point::norm(&resid);
        out.push(MixedGap { mixed_gap: mixed, residual: resid, residual_norm });
    }
    Ok(out)
}

/// Binning weights of the trajectory's FP engine, for `mixed_gap_check`.
pub fn engine_weights(traj: &Trajectory) -> Vec<WeightFn> {
    let b: &Arc<_> = traj.engine.binning();
    (0..b.len()).map(|i| b.weight_fn(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_problem_converges() {
        let g = GameSpec::new(vec![3], vec![vec![0.2, 1.0, 0.5]]).unwrap();
        let t = run_dynamics(&g, &DynamicsOptions::new(0.05, 400, 1)).unwrap();
        let f = ne_fraction(&t, 0.1, 200..400).unwrap();
        assert!(f.fraction >= 0.9, "{f:?}");
    }

    #[test]
    fn pure_behavior_has_zero_residual() {
        // with a dominant strategy and tiny ε, x_s is numerically pure, so a_s = x_s
        let g = GameSpec::demo("prisoners_dilemma").unwrap();
        let t = run_dynamics(&g, &DynamicsOptions::new(1e-4, 64, 5)).unwrap();
        let r = mixed_gap_check(&t, &[WeightFn::Constant(1.0)]).unwrap();
        assert!(r[0].residual_norm < 1e-12);
    }

    #[test]
    fn fixed_point_forecast_is_an_equilibrium() {
        let g = GameSpec::demo("matching_pennies").unwrap();
        let beta = softmax_response(&g, 0.05).unwrap();
        let c = [0.5, 0.5, 0.5, 0.5];
        let x = beta.eval(&c);
        assert!(dist(&x, &c) < 1e-15);
        assert!(g.normalized().ne_gap(&x).unwrap() <= 0.05);
    }

    #[test]
    fn ne_fraction_rejects_empty_window() {
        let g = GameSpec::demo("coordination").unwrap();
        let t = run_dynamics(&g, &DynamicsOptions::new(0.05, 8, 0)).unwrap();
        assert!(ne_fraction(&t, 0.1, 4..4).is_err());
        assert!(ne_fraction(&t, 0.05, 0..8).is_err());
        assert!(ne_fraction(&t, 0.1, 0..8).is_ok());
    }

    #[test]
    fn fp_bound_along_trajectory() {
        let g = GameSpec::demo("matching_pennies").unwrap();
        let t = run_dynamics(&g, &DynamicsOptions::new(0.05, 512, 2)).unwrap();
        let gamma2 = g.domain().diameter().powi(2);
        for s in &t.scores {
            assert!(s.pure.s_over_t2 <= gamma2 / s.pure.t as f64 + 1e-6);
        }
    }
}
