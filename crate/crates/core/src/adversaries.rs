//! Action generators, from fixed sequences to adaptive adversaries that see
//! the announced distribution or the realized forecast.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::mixed::MixedForecast;
use crate::point::{dot, norm_sq, Point, PointKey};
use crate::rng::{SimRng, ADVERSARY_STREAM};

/// What the adversary may read besides the history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InfoMode {
    #[default]
    HistoryOnly,
    /// The announced distribution of c_t, not its realization.
    DistributionLeak,
    /// The realized forecast c_t.
    RealizationLeak,
}

/// Payload handed to the adversary before it acts in period t.
#[derive(Debug, Clone, Copy)]
pub enum Leak<'a> {
    None,
    Distribution(&'a MixedForecast),
    Realization(&'a Point),
}

impl Leak<'_> {
    fn mode(&self) -> InfoMode {
        match self {
            Leak::None => InfoMode::HistoryOnly,
            Leak::Distribution(_) => InfoMode::DistributionLeak,
            Leak::Realization(_) => InfoMode::RealizationLeak,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    /// Replays the sequence, cycling when it runs out.
    Fixed {
        sequence: Vec<Point>,
        #[serde(default)]
        mode: InfoMode,
    },
    /// Each coordinate independently at its upper end with probability p.
    IidBernoulli {
        p: f64,
        #[serde(default)]
        mode: InfoMode,
    },
    /// Rain (1) iff the forecast is strictly below the threshold. The forecast
    /// read is c_t, the mean of the announced distribution, or c_{t−1},
    /// depending on the mode, which defaults to seeing c_t.
    ThresholdLeaky {
        threshold: f64,
        #[serde(default = "realization_leak")]
        mode: InfoMode,
    },
    /// The extreme action maximizing the expected one-step increase of
    /// Σ_x ‖Σ_{s: c_s = x}(a_s − x)‖² under its prediction of the forecast.
    AntiGap {
        #[serde(default)]
        mode: InfoMode,
    },
    /// Rain with probability 1/(2n), independently over periods.
    WorstCaseGrid {
        n: usize,
        #[serde(default)]
        mode: InfoMode,
    },
}

fn realization_leak() -> InfoMode {
    InfoMode::RealizationLeak
}

impl AdversarySpec {
    pub fn mode(&self) -> InfoMode {
        match self {
            AdversarySpec::Fixed { mode, .. }
            | AdversarySpec::IidBernoulli { mode, .. }
            | AdversarySpec::ThresholdLeaky { mode, .. }
            | AdversarySpec::AntiGap { mode }
            | AdversarySpec::WorstCaseGrid { mode, .. } => *mode,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::Fixed { .. } => "fixed",
            AdversarySpec::IidBernoulli { .. } => "iid_bernoulli",
            AdversarySpec::ThresholdLeaky { .. } => "threshold_leaky",
            AdversarySpec::AntiGap { .. } => "anti_gap",
            AdversarySpec::WorstCaseGrid { .. } => "worst_case_grid",
        }
    }

    pub fn validate(&self, domain: &ConvexDomain) -> Result<()> {
        let interval_only = |what: &str| -> Result<()> {
            if *domain != ConvexDomain::Interval01 {
                return Err(Error::Config(format!("{what} adversary needs the interval [0,1]")));
            }
            Ok(())
        };
        match self {
            AdversarySpec::Fixed { sequence, .. } => {
                if sequence.is_empty() {
                    return Err(Error::Config("fixed adversary needs a non-empty sequence".into()));
                }
                for a in sequence {
                    domain.check_point(a).map_err(|e| Error::Config(format!("fixed action: {e}")))?;
                }
            }
            AdversarySpec::IidBernoulli { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Config(format!("probability {p} outside [0,1]")));
                }
                if !matches!(domain, ConvexDomain::Interval01 | ConvexDomain::Box { .. }) {
                    return Err(Error::Config("iid Bernoulli actions need an interval or box".into()));
                }
            }
            AdversarySpec::ThresholdLeaky { threshold, .. } => {
                interval_only("threshold")?;
                if !threshold.is_finite() {
                    return Err(Error::Config("threshold must be finite".into()));
                }
            }
            AdversarySpec::AntiGap { .. } => {
                domain.vertices().map_err(|e| Error::Config(e.to_string()))?;
            }
            AdversarySpec::WorstCaseGrid { n, .. } => {
                interval_only("worst-case grid")?;
                if *n == 0 {
                    return Err(Error::Config("worst-case grid needs n ≥ 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Per-forecast tally and aggregates for the anti-gap lookahead.
#[derive(Debug, Clone, Default)]
struct GapTally {
    t: f64,
    /// x ↦ (n_x, G_x) with G_x = Σ_{c_s = x}(a_s − x).
    per_point: HashMap<PointKey, (f64, Vec<f64>)>,
    /// Σ_x n_x G_x.
    weighted_gap: Vec<f64>,
    /// Σ_s c_s.
    forecast_sum: Vec<f64>,
}

impl GapTally {
    fn record(&mut self, c: &Point, a: &Point) {
        let m = c.dim();
        if self.weighted_gap.is_empty() {
            self.weighted_gap = vec![0.0; m];
            self.forecast_sum = vec![0.0; m];
        }
        let (n, g) = self.per_point.entry(c.key()).or_insert_with(|| (0.0, vec![0.0; m]));
        // (n+1)(G + d) − nG = G + (n+1)d
        for k in 0..m {
            let d = a[k] - c[k];
            self.weighted_gap[k] += g[k] + (*n + 1.0) * d;
            g[k] += d;
            self.forecast_sum[k] += c[k];
        }
        *n += 1.0;
        self.t += 1.0;
    }

    fn gap_at(&self, x: &Point) -> Option<&[f64]> {
        self.per_point.get(&x.key()).map(|(_, g)| g.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct Adversary {
    spec: AdversarySpec,
    domain: ConvexDomain,
    rng: SimRng,
    cursor: usize,
    last_forecast: Option<Point>,
    tally: GapTally,
    vertices: Vec<Point>,
}

impl Adversary {
    pub fn new(spec: &AdversarySpec, domain: &ConvexDomain, seed: u64) -> Result<Self> {
        spec.validate(domain)?;
        let vertices = match spec {
            AdversarySpec::AntiGap { .. } => domain.vertices()?,
            _ => Vec::new(),
        };
        Ok(Adversary {
            spec: spec.clone(),
            domain: domain.clone(),
            rng: SimRng::new(seed, ADVERSARY_STREAM),
            cursor: 0,
            last_forecast: None,
            tally: GapTally::default(),
            vertices,
        })
    }

    pub fn spec(&self) -> &AdversarySpec {
        &self.spec
    }

    pub fn mode(&self) -> InfoMode {
        self.spec.mode()
    }

    /// The action for the current period. The leak must match the declared mode.
    pub fn next_action(&mut self, leak: Leak<'_>) -> Result<Point> {
        if leak.mode() != self.mode() {
            return Err(Error::contract(format!(
                "adversary declared {:?} but was handed {:?}",
                self.mode(),
                leak.mode()
            )));
        }
        let m = self.domain.dim();
        let a = match &self.spec {
            AdversarySpec::Fixed { sequence, .. } => {
                let a = sequence[self.cursor % sequence.len()].clone();
                self.cursor += 1;
                a
            }
            AdversarySpec::IidBernoulli { p, .. } => {
                let p = *p;
                let (lo, hi) = match &self.domain {
                    ConvexDomain::Box { lo, hi } => (lo.clone(), hi.clone()),
                    _ => (vec![0.0; m], vec![1.0; m]),
                };
                Point::from_vec((0..m).map(|k| if self.rng.bernoulli(p) { hi[k] } else { lo[k] }).collect())
            }
            AdversarySpec::ThresholdLeaky { threshold, .. } => {
                let seen = match leak {
                    Leak::Realization(c) => Some(c[0]),
                    Leak::Distribution(eta) => Some(eta.mean()[0]),
                    Leak::None => self.last_forecast.as_ref().map(|c| c[0]),
                };
                let rain = seen.is_none_or(|c| c < *threshold);
                Point::from_vec(vec![if rain { 1.0 } else { 0.0 }])
            }
            AdversarySpec::AntiGap { .. } => self.anti_gap(leak),
            AdversarySpec::WorstCaseGrid { n, .. } => {
                let p = 0.5 / *n as f64;
                Point::from_vec(vec![if self.rng.bernoulli(p) { 1.0 } else { 0.0 }])
            }
        };
        Ok(a)
    }

    fn anti_gap(&self, leak: Leak<'_>) -> Point {
        let score = |a: &Point| -> f64 {
            let term = |x: &Point| {
                let d: Vec<f64> = a.iter().zip(x.iter()).map(|(p, q)| p - q).collect();
                let g = self.tally.gap_at(x).map_or(0.0, |g| dot(g, &d));
                2.0 * g + norm_sq(&d)
            };
            match leak {
                Leak::Realization(c) => term(c),
                Leak::Distribution(eta) => eta.support().iter().map(|(x, p)| p * term(x)).sum(),
                Leak::None if self.tally.t == 0.0 => term(&self.domain.centroid()),
                // forecast predicted by the empirical distribution of past forecasts;
                // only the a-dependent part (2/t)(U − M)·a + ‖a‖² matters
                Leak::None => {
                    let t = self.tally.t;
                    let lin: Vec<f64> =
                        self.tally.weighted_gap.iter().zip(&self.tally.forecast_sum).map(|(u, s)| 2.0 * (u - s) / t).collect();
                    dot(&lin, a) + norm_sq(a)
                }
            }
        };
        let mut best = &self.vertices[0];
        let mut best_score = score(best);
        for v in &self.vertices[1..] {
            let s = score(v);
            if s > best_score {
                best = v;
                best_score = s;
            }
        }
        best.clone()
    }

    /// Records period t's realized forecast and action.
    pub fn observe(&mut self, c: &Point, a: &Point) {
        self.last_forecast = Some(c.clone());
        if matches!(self.spec, AdversarySpec::AntiGap { .. }) {
            self.tally.record(c, a);
        }
    }
}
