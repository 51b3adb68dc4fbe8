use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{grid_resolution, ProcedureSpec};
use crate::binning::Binning;
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::domain::TOL_GEOM;
use crate::hedging::certificate::{mixed_certificate, point_certificate, Moments};
use crate::hedging::fixed_point::{TOL_ITERATIVE, TOL_SEGMENT};
use crate::hedging::{
    outgoing_almost_det, outgoing_fixed_point, outgoing_minimax, FixedPointOptions, FnField,
    MinimaxOptions, SolverStage,
};
use crate::history::{HistoryStats, Retention};
use crate::mixed::{Locality, MixedForecast};
use crate::point::{dist, Point};
use crate::rng::{SimRng, ENGINE_STREAM};

/// FP steps may fall back to the solver's best candidate within this multiple
/// of the tolerance.
pub const FP_FALLBACK_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Fp,
    Mm,
    Ad,
    Binary,
}

/// Per-period hedging record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// max over actions of the hedging left-hand side minus its allowance:
    /// φ(c)·(a − c) for FP, E[ψ(c)·(a − c)] − ε E‖ψ(c)‖ otherwise.
    pub violation: f64,
    pub satisfied: bool,
    pub support: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// |E[e_{t−1}(c_t)]| for the binary procedure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<SolverStage>,
}

/// The distribution of the next forecast, before sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Announcement {
    pub forecast: MixedForecast,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone)]
enum State {
    Fp { tolerance: Option<f64> },
    Mm { grid: Arc<Grid>, epsilon: f64, opts: MinimaxOptions },
    Ad { grid: Arc<Grid>, epsilon: f64 },
    /// Per grid point j: (uses n^j, action sum r^j).
    Binary { n: usize, counts: Vec<(f64, f64)> },
}

/// A forecasting procedure together with its history.
#[derive(Debug, Clone)]
pub struct ForecastEngine {
    kind: EngineKind,
    state: State,
    stats: HistoryStats,
    rng: SimRng,
    last: Option<Point>,
    field_scratch: Vec<(usize, f64)>,
}

impl ForecastEngine {
    pub fn new(spec: &ProcedureSpec, domain: &ConvexDomain, seed: u64, retention: Retention) -> Result<Self> {
        spec.validate(domain)?;
        let (state, binning) = match spec {
            ProcedureSpec::Fp { binning, tolerance } => {
                let b = ProcedureSpec::fp_binning(binning, domain).build(domain)?;
                (State::Fp { tolerance: *tolerance }, b)
            }
            ProcedureSpec::Mm { epsilon, resolution, maximizer } => {
                let grid = Arc::new(Grid::uniform(domain, grid_resolution(domain, *epsilon, *resolution)?)?);
                let opts = MinimaxOptions { maximizer: *maximizer, ..MinimaxOptions::default() };
                let b = Binning::indicator(grid.clone());
                (State::Mm { grid, epsilon: *epsilon, opts }, b)
            }
            ProcedureSpec::Ad { epsilon, resolution } => {
                let grid = Arc::new(Grid::uniform(domain, grid_resolution(domain, *epsilon, *resolution)?)?);
                let b = Binning::indicator(grid.clone());
                (State::Ad { grid, epsilon: *epsilon }, b)
            }
            ProcedureSpec::Binary { n } => {
                let grid = Arc::new(Grid::uniform(domain, *n)?);
                (State::Binary { n: *n, counts: vec![(0.0, 0.0); n + 1] }, Binning::indicator(grid))
            }
        };
        let stats = HistoryStats::new(domain.clone(), Arc::new(binning), retention)?;
        Ok(ForecastEngine {
            kind: spec.kind(),
            state,
            stats,
            rng: SimRng::new(seed, ENGINE_STREAM),
            last: None,
            field_scratch: Vec::new(),
        })
    }

    pub fn kind(&self) -> EngineKind {
        self.kind
    }

    pub fn domain(&self) -> &ConvexDomain {
        self.stats.domain()
    }

    pub fn dim(&self) -> usize {
        self.stats.dim()
    }

    pub fn stats(&self) -> &HistoryStats {
        &self.stats
    }

    pub fn binning(&self) -> &Arc<Binning> {
        self.stats.binning()
    }

    /// The forecast grid of the MM, AD and binary procedures.
    pub fn grid(&self) -> Option<&Arc<Grid>> {
        match &self.state {
            State::Fp { .. } => None,
            State::Mm { grid, .. } | State::Ad { grid, .. } => Some(grid),
            State::Binary { .. } => self.stats.binning().grid(),
        }
    }

    /// Hedging slack ε of the stochastic procedures (1/(2N) for the binary one).
    pub fn epsilon(&self) -> Option<f64> {
        match &self.state {
            State::Fp { .. } => None,
            State::Mm { epsilon, .. } | State::Ad { epsilon, .. } => Some(*epsilon),
            State::Binary { n, .. } => Some(0.5 / *n as f64),
        }
    }

    /// Computes the distribution of the next forecast from the history so far.
    pub fn announce(&mut self) -> Result<Announcement> {
        match &self.state {
            State::Fp { tolerance } => {
                let tolerance = *tolerance;
                self.announce_fp(tolerance)
            }
            State::Mm { grid, epsilon, opts } => {
                let values = self.grid_errors(grid);
                let sol = outgoing_minimax(grid, &values, *epsilon, opts)?;
                assert_support(sol.indices.len(), self.dim() + 3, "minimax")?;
                Ok(Announcement {
                    diagnostics: StepDiagnostics {
                        violation: sol.certificate.max_violation,
                        satisfied: sol.certificate.satisfied,
                        support: sol.forecast.len(),
                        radius: None,
                        mean_error: None,
                        stage: None,
                    },
                    forecast: sol.forecast,
                })
            }
            State::Ad { grid, epsilon } => {
                let values = self.grid_errors(grid);
                let opts = FixedPointOptions { warm_start: self.last.as_ref().map(|p| p.to_vec()), ..Default::default() };
                let sol = outgoing_almost_det(grid, &values, *epsilon, &opts)?;
                assert_support(sol.indices.len(), self.dim() + 1, "almost deterministic")?;
                Ok(Announcement {
                    diagnostics: StepDiagnostics {
                        violation: sol.certificate.max_violation,
                        satisfied: sol.certificate.satisfied,
                        support: sol.forecast.len(),
                        radius: Some(*epsilon),
                        mean_error: None,
                        stage: sol.fixed_point.as_ref().map(|f| f.stage),
                    },
                    forecast: sol.forecast,
                })
            }
            State::Binary { n, counts } => binary_announce(*n, counts, self.stats.domain()),
        }
    }

    // Near-zero regions of a sparse gap field can leave the solver just short
    // of the tolerance; such steps are flagged unsatisfied rather than aborting.
    fn announce_fp(&mut self, tolerance: Option<f64>) -> Result<Announcement> {
        let t = self.stats.t();
        let domain = self.stats.domain().clone();
        let m = domain.dim();
        let binning = self.stats.binning().clone();
        let bins = binning.len();
        let mut gaps = Vec::with_capacity(bins * m);
        for i in 0..bins {
            gaps.extend_from_slice(self.stats.bin_gap_sum(i));
        }
        if t == 0 || gaps.iter().all(|g| *g == 0.0) {
            let c = domain.centroid();
            return Ok(Announcement {
                forecast: MixedForecast::point_mass(c),
                diagnostics: StepDiagnostics {
                    violation: 0.0,
                    satisfied: true,
                    support: 1,
                    radius: Some(0.0),
                    mean_error: None,
                    stage: None,
                },
            });
        }
        let inv = 1.0 / t as f64;
        gaps.iter_mut().for_each(|g| *g *= inv);
        let scratch = std::cell::RefCell::new(std::mem::take(&mut self.field_scratch));
        let field = FnField::new(m, |c: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|v| *v = 0.0);
            let mut w = scratch.borrow_mut();
            binning.weights_into(c, &mut w);
            for &(i, wi) in w.iter() {
                for k in 0..m {
                    out[k] += wi * gaps[i * m + k];
                }
            }
        });
        let opts = FixedPointOptions {
            tolerance,
            warm_start: self.last.as_ref().map(|p| p.to_vec()),
            accept_within: Some(FP_FALLBACK_FACTOR * self.tolerance()),
            ..Default::default()
        };
        let sol = outgoing_fixed_point(&field, &domain, &opts);
        self.field_scratch = scratch.into_inner();
        let sol = sol?;
        Ok(Announcement {
            diagnostics: StepDiagnostics {
                violation: sol.certificate.max_violation,
                satisfied: sol.certificate.satisfied,
                support: 1,
                radius: Some(0.0),
                mean_error: None,
                stage: Some(sol.stage),
            },
            forecast: MixedForecast::point_mass(sol.point),
        })
    }

    /// Tolerance of the per-step certificate.
    pub fn tolerance(&self) -> f64 {
        match &self.state {
            State::Fp { tolerance } => {
                tolerance.unwrap_or(if self.stats.domain().segment().is_some() { TOL_SEGMENT } else { TOL_ITERATIVE })
            }
            State::Mm { opts, .. } => opts.tolerance,
            State::Ad { .. } => TOL_SEGMENT,
            State::Binary { .. } => BINARY_TOL,
        }
    }

    /// Re-checks a stored announcement against the current history without
    /// solving anything: the same certificate the engine attached when it
    /// announced, recomputed from scratch.
    pub fn certify(&self, forecast: &MixedForecast) -> Result<StepDiagnostics> {
        let domain = self.stats.domain();
        Error::check_dim(self.dim(), forecast.dim())?;
        match &self.state {
            State::Fp { tolerance } => {
                if !forecast.is_point_mass() {
                    return Err(Error::Verification("an FP forecast must be a point mass".into()));
                }
                let y = &forecast.support()[0].0;
                let tol = tolerance.unwrap_or(if domain.segment().is_some() { TOL_SEGMENT } else { TOL_ITERATIVE });
                let fy = self.fp_field_at(y);
                let cert = point_certificate(domain, y, &fy, tol);
                Ok(StepDiagnostics {
                    violation: cert.max_violation,
                    satisfied: cert.satisfied,
                    support: 1,
                    radius: Some(0.0),
                    mean_error: None,
                    stage: None,
                })
            }
            State::Mm { grid, epsilon, opts } => {
                let values = self.grid_errors(grid);
                let moments = grid_moments(grid, &values, forecast)?;
                let cert = mixed_certificate(domain, &moments, *epsilon, opts.tolerance);
                Ok(StepDiagnostics {
                    violation: cert.max_violation,
                    satisfied: cert.satisfied,
                    support: forecast.len(),
                    radius: None,
                    mean_error: None,
                    stage: None,
                })
            }
            State::Ad { grid, epsilon } => {
                let values = self.grid_errors(grid);
                let moments = grid_moments(grid, &values, forecast)?;
                let cert = mixed_certificate(domain, &moments, *epsilon, TOL_SEGMENT);
                let local = match forecast.locality() {
                    Some(l) => {
                        l.radius <= *epsilon
                            && forecast.support().iter().all(|(y, _)| dist(y, &l.center) <= l.radius + TOL_GEOM)
                    }
                    None => false,
                };
                Ok(StepDiagnostics {
                    violation: cert.max_violation,
                    satisfied: cert.satisfied && local,
                    support: forecast.len(),
                    radius: forecast.locality().map(|l| l.radius),
                    mean_error: None,
                    stage: None,
                })
            }
            State::Binary { n, counts } => {
                let grid = self.grid().ok_or_else(|| Error::contract("binary engine without a grid"))?;
                let e: Vec<Vec<f64>> = (0..=*n).map(|j| vec![binary_error(*n, j, counts[j])]).collect();
                let moments = grid_moments(grid, &e, forecast)?;
                let radius = 0.5 / *n as f64;
                let cert = mixed_certificate(domain, &moments, radius, BINARY_TOL);
                let adjacent = forecast.len() <= 2 && forecast.support_diameter() <= 1.0 / *n as f64 + TOL_GEOM;
                Ok(StepDiagnostics {
                    violation: cert.max_violation,
                    satisfied: cert.satisfied && adjacent && moments.mean_f[0].abs() <= BINARY_TOL,
                    support: forecast.len(),
                    radius: Some(radius),
                    mean_error: Some(moments.mean_f[0].abs()),
                    stage: None,
                })
            }
        }
    }

    /// φ(c) = Σ w_i(c) g(w_i) for the FP procedure.
    fn fp_field_at(&self, c: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut out = vec![0.0; m];
        let t = self.stats.t();
        if t == 0 {
            return out;
        }
        let mut w = Vec::new();
        self.stats.binning().weights_into(c, &mut w);
        // same operation order as the field the solver saw
        let inv = 1.0 / t as f64;
        for &(i, wi) in &w {
            let g = self.stats.bin_gap_sum(i);
            for k in 0..m {
                out[k] += wi * (g[k] * inv);
            }
        }
        out
    }

    /// ψ_{t−1} at the grid points: e_{t−1}(1_d) for each d ∈ D.
    fn grid_errors(&self, grid: &Grid) -> Vec<Vec<f64>> {
        (0..grid.len()).map(|i| self.stats.error(i)).collect()
    }

    /// Draws the forecast from an announcement with the engine's generator.
    pub fn sample(&mut self, ann: &Announcement) -> Point {
        self.rng.sample(&ann.forecast).clone()
    }

    /// Announces and samples in one step.
    pub fn next_forecast(&mut self) -> Result<(Announcement, Point)> {
        let ann = self.announce()?;
        let c = self.sample(&ann);
        Ok((ann, c))
    }

    /// Records period t's forecast and action.
    pub fn observe(&mut self, c: &Point, a: &Point) -> Result<()> {
        if let State::Binary { n, counts } = &mut self.state {
            let j = (c[0] * *n as f64).round() as usize;
            if j > *n || (j as f64 / *n as f64 - c[0]).abs() > 1e-12 {
                return Err(Error::contract(format!("binary forecast {} is off the grid", c[0])));
            }
            counts[j].0 += 1.0;
            counts[j].1 += a[0];
        }
        self.stats.record(c, a)?;
        self.last = Some(c.clone());
        Ok(())
    }
}

/// Moments of a grid-supported forecast; off-grid support points are rejected.
fn grid_moments(grid: &Grid, values: &[Vec<f64>], forecast: &MixedForecast) -> Result<Moments> {
    let mut items = Vec::with_capacity(forecast.len());
    for (y, p) in forecast.support() {
        let i = grid.index_of(y).ok_or_else(|| Error::Verification(format!("support point {:?} is off the grid", y.coords())))?;
        items.push((y.coords(), values[i].as_slice(), *p));
    }
    Ok(Moments::of(items, grid.domain().dim()))
}

const BINARY_TOL: f64 = 1e-12;

fn assert_support(len: usize, bound: usize, what: &str) -> Result<()> {
    if len > bound {
        log::warn!("{what} support has {len} points, above the bound {bound}");
    }
    Ok(())
}

/// e^j = r^j/n^j − j/N, computed as (r^j N − j n^j)/(n^j N) so that it is
/// exactly zero whenever r^j/n^j = j/N.
fn binary_error(n: usize, j: usize, (uses, rain): (f64, f64)) -> f64 {
    if uses == 0.0 {
        return 0.0;
    }
    let nn = n as f64;
    (rain * nn - j as f64 * uses) / (uses * nn)
}

fn binary_announce(n: usize, counts: &[(f64, f64)], domain: &ConvexDomain) -> Result<Announcement> {
    let e: Vec<f64> = (0..=n).map(|j| binary_error(n, j, counts[j])).collect();
    let nn = n as f64;
    let (support, mean_error) = if let Some(j) = e.iter().position(|v| *v == 0.0) {
        (vec![(Point::from_vec(vec![j as f64 / nn]), 1.0)], 0.0)
    } else {
        let j = e.iter().position(|v| *v < 0.0).ok_or_else(|| Error::contract("no negative grid error"))?;
        if j == 0 {
            return Err(Error::contract("the error at forecast 0 cannot be negative"));
        }
        let (a, b) = (e[j - 1].abs(), e[j].abs());
        let p1 = b / (a + b);
        let p2 = a / (a + b);
        let mean = p1 * e[j - 1] + p2 * e[j];
        (
            vec![(Point::from_vec(vec![(j - 1) as f64 / nn]), p1), (Point::from_vec(vec![j as f64 / nn]), p2)],
            mean,
        )
    };
    let radius = 0.5 / nn;
    let center = if support.len() == 1 {
        support[0].0.clone()
    } else {
        Point::from_vec(vec![(support[0].0[0] + support[1].0[0]) / 2.0])
    };
    let moments = Moments::of(
        support.iter().map(|(y, p)| {
            let j = (y[0] * nn).round() as usize;
            (y.coords(), std::slice::from_ref(&e[j]), *p)
        }),
        1,
    );
    let cert = mixed_certificate(domain, &moments, radius, BINARY_TOL);
    Ok(Announcement {
        diagnostics: StepDiagnostics {
            violation: cert.max_violation,
            satisfied: cert.satisfied,
            support: support.len(),
            radius: Some(radius),
            mean_error: Some(mean_error.abs()),
            stage: None,
        },
        forecast: MixedForecast::new(support, Some(Locality { center, radius }))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hedging::MaximizerSet;
    use crate::binning::BinningSpec;

    fn pt(x: f64) -> Point {
        Point::from_vec(vec![x])
    }

    #[test]
    fn fp_first_forecast_is_centroid() {
        let spec = ProcedureSpec::Fp { binning: None, tolerance: None };
        let mut e = ForecastEngine::new(&spec, &ConvexDomain::Interval01, 1, Retention::default()).unwrap();
        let (_, c) = e.next_forecast().unwrap();
        assert_eq!(c[0], 0.5);
    }

    #[test]
    fn fp_trivial_binning_goes_to_the_gap_direction() {
        let spec = ProcedureSpec::Fp { binning: Some(BinningSpec::Trivial), tolerance: None };
        let mut e = ForecastEngine::new(&spec, &ConvexDomain::Interval01, 1, Retention::default()).unwrap();
        e.observe(&pt(0.5), &pt(0.8)).unwrap(); // g = +0.3
        let (ann, c) = e.next_forecast().unwrap();
        assert_eq!(c[0], 1.0);
        assert!(ann.diagnostics.satisfied);
    }

    #[test]
    fn fp_tent_zero_crossing() {
        // gaps g(w1) = 0.2, g(w2) = −0.1, g(w3) = 0 on {0, .5, 1} with width 0.6
        let grid = Arc::new(Grid::uniform(&ConvexDomain::Interval01, 2).unwrap());
        let b = Binning::tent(grid, 0.6).unwrap();
        let g = [0.2, -0.1, 0.0];
        let phi = |c: &[f64]| b.weights(c).iter().zip(g).map(|(w, g)| w * g).sum::<f64>();
        let field = FnField::new(1, |c: &[f64], o: &mut [f64]| o[0] = phi(c));
        let sol = outgoing_fixed_point(&field, &ConvexDomain::Interval01, &FixedPointOptions::default()).unwrap();
        // on (0.1, 0.4) the unnormalized tents are 0.6 − c, 0.1 + c, 0, so φ ∝ 0.11 − 0.3c
        assert!((sol.point[0] - 11.0 / 30.0).abs() < 1e-8, "{:?}", sol.point);
        for a in [0.0, 1.0] {
            assert!(phi(&sol.point) * (a - sol.point[0]) <= 1e-8);
        }
    }

    #[test]
    fn fp_hedges_every_step() {
        let spec = ProcedureSpec::Fp { binning: None, tolerance: None };
        let mut e = ForecastEngine::new(&spec, &ConvexDomain::Interval01, 1, Retention::default()).unwrap();
        for t in 0..200 {
            let (ann, c) = e.next_forecast().unwrap();
            assert!(ann.diagnostics.violation <= 1e-8);
            let a = if (t * 7) % 5 < 2 || c[0] < 0.3 { 1.0 } else { 0.0 };
            e.observe(&c, &pt(a)).unwrap();
            let s = crate::scores::gap_square_sum(e.stats()).unwrap();
            assert!(s <= 1.0 / e.stats().t() as f64 + 1e-9);
        }
    }

    #[test]
    fn binary_cases() {
        let spec = ProcedureSpec::Binary { n: 1 };
        let mut e = ForecastEngine::new(&spec, &ConvexDomain::Interval01, 1, Retention::default()).unwrap();
        let (ann, c) = e.next_forecast().unwrap();
        assert_eq!(c[0], 0.0);
        assert_eq!(ann.diagnostics.mean_error, Some(0.0));
        e.observe(&c, &pt(1.0)).unwrap();
        let (_, c) = e.next_forecast().unwrap();
        assert_eq!(c[0], 1.0);
    }

    #[test]
    fn binary_two_point_mixture() {
        let ann = binary_announce(2, &[(5.0, 1.0), (1.0, 0.7), (5.0, 4.6)], &ConvexDomain::Interval01).unwrap();
        // e = (0.2, 0.2, −0.08): j = 2, p1 = .08/.28 on 1/2
        let s = ann.forecast.support();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].0[0], s[1].0[0]), (0.5, 1.0));
        assert!((s[0].1 - 0.08 / 0.28).abs() < 1e-12);
        assert!(ann.diagnostics.mean_error.unwrap() < 1e-15);
        assert!(ann.diagnostics.satisfied);
        let ann = binary_announce(3, &[(10.0, 2.0), (10.0, 1.0), (1.0, 1.0), (1.0, 0.0)], &ConvexDomain::Interval01).unwrap();
        // e⁰ = 0.2, e¹ = −0.2333…: mixture on (0, 1/3)
        assert_eq!(ann.forecast.support()[0].0[0], 0.0);
    }

    #[test]
    fn mm_sign_change_and_ad_coincide() {
        let d = ConvexDomain::Interval01;
        let mm = ProcedureSpec::Mm { epsilon: 0.25, resolution: Some(4), maximizer: MaximizerSet::Vertices };
        let ad = ProcedureSpec::Ad { epsilon: 0.25, resolution: Some(4) };
        let mut a = ForecastEngine::new(&mm, &d, 7, Retention::default()).unwrap();
        let mut b = ForecastEngine::new(&ad, &d, 7, Retention::default()).unwrap();
        // e(0) = 0.5, e(.25) = 0.35, e(.5) = 0.3, e(.75) = −0.15, e(1) = −0.6
        for (c, act) in [(0.0, 0.5), (0.25, 0.6), (0.5, 0.8), (0.75, 0.6), (1.0, 0.4)] {
            a.observe(&pt(c), &pt(act)).unwrap();
            b.observe(&pt(c), &pt(act)).unwrap();
        }
        let x = a.announce().unwrap();
        let y = b.announce().unwrap();
        for ann in [&x, &y] {
            let s = ann.forecast.support();
            assert_eq!(s.len(), 2);
            assert_eq!((s[0].0[0], s[1].0[0]), (0.5, 0.75));
            assert!((s[0].1 - 1.0 / 3.0).abs() < 1e-8, "{s:?}");
            assert!(ann.diagnostics.violation <= 1e-8);
        }
    }
}
