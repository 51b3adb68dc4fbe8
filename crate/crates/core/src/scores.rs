//! Calibration scores and the inequalities relating them.

use serde::{Deserialize, Serialize};

use crate::binning::{Binning, WeightFn};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::history::HistoryStats;
use crate::point::{dist, dot, norm, norm_sq, Point};

fn require_t(stats: &HistoryStats) -> Result<f64> {
    if stats.t() == 0 {
        Err(Error::EmptyHistory)
    } else {
        Ok(stats.t() as f64)
    }
}

fn require_binning(stats: &HistoryStats, binning: &Binning) -> Result<()> {
    if stats.binning().as_ref() == binning {
        Ok(())
    } else {
        Err(Error::contract("binning does not match the accumulators"))
    }
}

/// K_t = Σ_x (n_t(x)/t) ‖e_t(x)‖ over the forecasts used so far.
pub fn classic_score(stats: &HistoryStats) -> Result<f64> {
    let t = require_t(stats)?;
    Ok(stats.tally().map(|e| norm(&e.gap_sum)).sum::<f64>() / t)
}

/// K_t^Π = Σ_i ‖g_t(w_i)‖.
pub fn binned_score(stats: &HistoryStats, binning: &Binning) -> Result<f64> {
    let t = require_t(stats)?;
    require_binning(stats, binning)?;
    Ok((0..stats.bins()).map(|i| norm(stats.bin_gap_sum(i))).sum::<f64>() / t)
}

/// Σ_i ‖g_t(w_i)‖², i.e. S_t / t².
pub fn gap_square_sum(stats: &HistoryStats) -> Result<f64> {
    let t = require_t(stats)?;
    Ok((0..stats.bins()).map(|i| norm_sq(stats.bin_gap_sum(i))).sum::<f64>() / (t * t))
}

/// (1/t) X_t with X_t = Σ_i n_t(w_i) ‖e_t(w_i)‖².
pub fn square_score(stats: &HistoryStats, binning: &Binning) -> Result<f64> {
    let t = require_t(stats)?;
    require_binning(stats, binning)?;
    Ok(x_total(stats) / t)
}

fn x_total(stats: &HistoryStats) -> f64 {
    (0..stats.bins())
        .filter(|&i| stats.bin_weight(i) > 0.0)
        .map(|i| norm_sq(stats.bin_gap_sum(i)) / stats.bin_weight(i))
        .sum()
}

/// Smooth score with tents Λ_x(c) = max(1 − L‖c − x‖, 0) centred at the used
/// forecasts. A lower bound on the supremum over L-Lipschitz families.
pub fn smooth_score(stats: &HistoryStats, l: f64) -> Result<f64> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::invalid("Lipschitz bound must be positive and finite"));
    }
    let t = require_t(stats)?;
    let log = stats.log()?;
    let m = stats.dim();
    let mut total = 0.0;
    let mut sum = vec![0.0; m];
    for entry in stats.tally() {
        let x = &entry.point;
        let mut n = 0.0;
        sum.iter_mut().for_each(|v| *v = 0.0);
        for (c, a) in log {
            let w = (1.0 - l * dist(c, x)).max(0.0);
            if w > 0.0 {
                n += w;
                for k in 0..m {
                    sum[k] += w * (a[k] - c[k]);
                }
            }
        }
        // n ≥ Λ_x(x)·count > 0 because x itself was used
        total += entry.count as f64 * norm(&sum) / n;
    }
    Ok(total / t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakScore {
    pub value: f64,
    /// Number of tents in the family (the constant function is always included).
    pub tents: usize,
    pub lipschitz: f64,
    /// Index of the maximizing function: 0 is the constant, i ≥ 1 the (i−1)-th tent.
    pub argmax: usize,
}

/// max ‖g_t(w)‖ over the constant 1 and L-Lipschitz tents max(1 − L‖c − y‖, 0)
/// centred on a uniform grid of the given resolution (0 means constant only).
/// A lower bound on the weak-calibration supremum.
pub fn weak_score(stats: &HistoryStats, l: f64, family_size: usize) -> Result<WeakScore> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::invalid("Lipschitz bound must be positive and finite"));
    }
    require_t(stats)?;
    let mut family = vec![WeightFn::Constant(1.0)];
    if family_size > 0 {
        let g = Grid::uniform(stats.domain(), family_size)?;
        family.extend(g.points().iter().map(|y| WeightFn::Tent { center: y.clone(), width: 1.0 / l }));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, w) in family.iter().enumerate() {
        let v = norm(&stats.gap_of(w)?);
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(WeakScore { value: best.1, tents: family.len() - 1, lipschitz: l, argmax: best.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64, tol: f64) -> Self {
        InequalityCheck { lhs, rhs, slack: rhs - lhs, holds: lhs <= rhs + tol }
    }
}

/// Σ_j ‖g_t(w_j)‖ ≤ ‖Σ_j w_j‖_∞ · K_t for nonnegative w_j. The sup norm is taken
/// over the forecasts actually used, which gives the sharper right-hand side.
pub fn check_lemma_norm_w(stats: &HistoryStats, ws: &[WeightFn]) -> Result<InequalityCheck> {
    let k = classic_score(stats)?;
    let mut lhs = 0.0;
    for w in ws {
        lhs += norm(&stats.gap_of(w)?);
    }
    let sup = stats
        .tally()
        .map(|e| ws.iter().map(|w| w.eval(&e.point)).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(InequalityCheck::new(lhs, sup * k, 1e-9))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// n_t(w) = 0: nothing to check.
    pub vacuous: bool,
    /// n_t(w) < 1, where the bound used is ln(max(n_t, 1)) + 2.
    pub below_unit_mass: bool,
}

/// Σ_{s≤t} w(c_s)²/n_s(w) < ln n_t(w) + 2.
///
/// For n_t(w) < 1 the left side is below n_t(w) < 1 but `ln n_t + 2` can drop
/// below it (one period with w = 0.1 gives 0.1 against −0.30), so the bound is
/// checked as `ln(max(n_t, 1)) + 2` and the case is flagged.
pub fn check_log_inequality(stats: &HistoryStats, w: &WeightFn) -> Result<LogInequality> {
    let log = stats.log()?;
    let mut n = 0.0;
    let mut lhs = 0.0;
    for (c, _) in log {
        let v = w.eval(c);
        n += v;
        if v > 0.0 {
            lhs += v * v / n;
        }
    }
    if n == 0.0 {
        return Ok(LogInequality { lhs: 0.0, rhs: f64::INFINITY, holds: true, vacuous: true, below_unit_mass: false });
    }
    let rhs = n.max(1.0).ln() + 2.0;
    Ok(LogInequality { lhs, rhs, holds: lhs < rhs, vacuous: false, below_unit_mass: n < 1.0 })
}

/// (α+β)‖(αu+βv)/(α+β)‖² − α‖u‖² − [2βu·v − β‖u‖² + β²/(α+β)‖u−v‖²].
pub fn fh_identity_residual(alpha: f64, beta: f64, u: &[f64], v: &[f64]) -> f64 {
    let s = alpha + beta;
    let mix: Vec<f64> = u.iter().zip(v).map(|(a, b)| (alpha * a + beta * b) / s).collect();
    let lhs = s * norm_sq(&mix) - alpha * norm_sq(u);
    let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    let rhs = 2.0 * beta * dot(u, v) - beta * norm_sq(u) + beta * beta / s * norm_sq(&diff);
    lhs - rhs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareIncrement {
    /// X_t − X_{t−1} from the accumulators.
    pub delta_x: f64,
    /// Σ_i w_i(c)[2 e_{t−1}(w_i)·(a − c) − ‖e_{t−1}(w_i)‖²].
    pub y: f64,
    /// Σ_i w_i(c)²/n_t(w_i) ‖e_{t−1}(w_i) − (a − c)‖².
    pub z: f64,
}

/// Records (c, a) and returns the decomposition X_t − X_{t−1} = Y_t + Z_t.
pub fn square_increment(stats: &mut HistoryStats, c: &Point, a: &Point) -> Result<SquareIncrement> {
    let before = x_total(stats);
    let weights = stats.binning().weights(c);
    let d: Vec<f64> = a.iter().zip(c.iter()).map(|(x, y)| x - y).collect();
    let mut y = 0.0;
    let mut z = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let e = stats.error(i);
        let n_t = stats.bin_weight(i) + w;
        y += w * (2.0 * dot(&e, &d) - norm_sq(&e));
        let diff: Vec<f64> = e.iter().zip(&d).map(|(p, q)| p - q).collect();
        z += w * w / n_t * norm_sq(&diff);
    }
    stats.record(c, a)?;
    Ok(SquareIncrement { delta_x: x_total(stats) - before, y, z })
}

/// Scores recorded at a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub t: u64,
    pub k_classic: f64,
    pub k_binned: f64,
    pub s_over_t2: f64,
    pub x_over_t: f64,
}

impl ScoreSet {
    pub fn compute(stats: &HistoryStats) -> Result<Self> {
        let b = stats.binning().clone();
        Ok(ScoreSet {
            t: stats.t(),
            k_classic: classic_score(stats)?,
            k_binned: binned_score(stats, &b)?,
            s_over_t2: gap_square_sum(stats)?,
            x_over_t: square_score(stats, &b)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::Binning;
    use crate::domain::ConvexDomain;
    use crate::history::Retention;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn p(x: f64) -> Point {
        Point::from_vec(vec![x])
    }

    fn stats_with(binning: Binning, hist: &[(f64, f64)]) -> HistoryStats {
        let mut s = HistoryStats::new(ConvexDomain::Interval01, Arc::new(binning), Retention::with_log()).unwrap();
        for &(c, a) in hist {
            s.record(&p(c), &p(a)).unwrap();
        }
        s
    }

    /// Classic score straight from the definition, grouping by exact value.
    fn classic_oracle(hist: &[(f64, f64)]) -> f64 {
        let mut xs: Vec<f64> = hist.iter().map(|h| h.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let t = hist.len() as f64;
        xs.iter()
            .map(|&x| {
                let sel: Vec<f64> = hist.iter().filter(|h| h.0 == x).map(|h| h.1).collect();
                let n = sel.len() as f64;
                let e = sel.iter().sum::<f64>() / n - x;
                n / t * e.abs()
            })
            .sum()
    }

    #[test]
    fn classic_examples() {
        let b = || Binning::trivial(1);
        assert!(matches!(classic_score(&stats_with(b(), &[])), Err(Error::EmptyHistory)));
        assert_eq!(classic_score(&stats_with(b(), &[(0.5, 1.0)])).unwrap(), 0.5);
        let rain: Vec<(f64, f64)> = (0..37).map(|_| (0.5, 1.0)).collect();
        let s = stats_with(b(), &rain);
        assert_eq!(classic_score(&s).unwrap(), 0.5);
        // S_t = t²/4 for a constant-½ forecast against rain
        assert!((gap_square_sum(&s).unwrap() - 0.25).abs() < 1e-15);
        let alt = [(0.5, 1.0), (0.5, 0.0), (0.5, 1.0), (0.5, 0.0)];
        assert_eq!(classic_score(&stats_with(b(), &alt)).unwrap(), 0.0);
    }

    #[test]
    fn binned_examples() {
        let hist = [(0.2, 1.0), (0.7, 0.0), (0.5, 1.0)];
        let s = stats_with(Binning::trivial(1), &hist);
        let overall = hist.iter().map(|h| h.1 - h.0).sum::<f64>() / 3.0;
        assert!((binned_score(&s, &Binning::trivial(1)).unwrap() - overall.abs()).abs() < 1e-15);
        assert!(binned_score(&s, &Binning::trivial(2)).is_err());
        let g = Arc::new(Grid::uniform(&ConvexDomain::Interval01, 4).unwrap());
        let ind = Binning::indicator(g);
        let on_grid = [(0.25, 1.0), (0.5, 0.0), (0.25, 0.0), (0.75, 1.0), (0.25, 1.0)];
        let s = stats_with(ind.clone(), &on_grid);
        let kb = binned_score(&s, &ind).unwrap();
        assert!((kb - classic_score(&s).unwrap()).abs() < 1e-15);
        assert!((kb - classic_oracle(&on_grid)).abs() < 1e-15);
    }

    #[test]
    fn square_score_examples() {
        let g = Arc::new(Grid::uniform(&ConvexDomain::Interval01, 4).unwrap());
        let b = Binning::tent(g, 0.4).unwrap();
        let s = stats_with(b.clone(), &[(0.3, 1.0)]);
        assert!((square_score(&s, &b).unwrap() - 0.49).abs() < 1e-15);
        let s = stats_with(b.clone(), &[(0.3, 0.3), (1.0, 1.0)]);
        assert_eq!(square_score(&s, &b).unwrap(), 0.0);
    }

    #[test]
    fn smooth_examples() {
        let s = stats_with(Binning::trivial(1), &[(0.3, 1.0)]);
        assert!((smooth_score(&s, 4.0).unwrap() - 0.7).abs() < 1e-15);
        let hist = [(0.25, 1.0), (0.5, 0.0), (0.25, 0.0), (0.75, 1.0), (0.25, 1.0)];
        let s = stats_with(Binning::trivial(1), &hist);
        assert!((smooth_score(&s, 1e6).unwrap() - classic_oracle(&hist)).abs() < 1e-15);
        let mut no_log = HistoryStats::new(ConvexDomain::Interval01, Arc::new(Binning::trivial(1)), Retention::default()).unwrap();
        no_log.record(&p(0.5), &p(1.0)).unwrap();
        assert!(matches!(smooth_score(&no_log, 4.0), Err(Error::LogNotRetained)));
    }

    #[test]
    fn smooth_matches_direct_oracle() {
        // frozen ten-period history; oracle is a direct double sum
        let hist = [
            (0.1, 1.0), (0.35, 0.0), (0.1, 0.0), (0.8, 1.0), (0.62, 1.0),
            (0.35, 1.0), (0.9, 0.0), (0.62, 0.0), (0.1, 1.0), (0.45, 1.0),
        ];
        let s = stats_with(Binning::trivial(1), &hist);
        let l = 4.0;
        let mut used: Vec<f64> = hist.iter().map(|h| h.0).collect();
        used.sort_by(f64::total_cmp);
        used.dedup();
        let mut total = 0.0;
        for x in used {
            let lam = |c: f64| f64::max(1.0 - l * (c - x).abs(), 0.0);
            let n: f64 = hist.iter().map(|h| lam(h.0)).sum();
            let e: f64 = hist.iter().map(|h| lam(h.0) * (h.1 - h.0)).sum::<f64>() / n;
            let count = hist.iter().filter(|h| h.0 == x).count() as f64;
            total += count * e.abs();
        }
        let oracle = total / 10.0;
        assert!((smooth_score(&s, l).unwrap() - oracle).abs() < 1e-14);
        assert!((oracle - 0.309_678_774_928_774_94).abs() < 1e-12, "{oracle:.17}");
    }

    #[test]
    fn weak_examples() {
        let zero = [(0.3, 0.3), (0.6, 0.6)];
        assert_eq!(weak_score(&stats_with(Binning::trivial(1), &zero), 2.0, 5).unwrap().value, 0.0);
        let hist = [(0.2, 1.0), (0.7, 0.0), (0.5, 1.0)];
        let s = stats_with(Binning::trivial(1), &hist);
        let w = weak_score(&s, 2.0, 0).unwrap();
        let overall = hist.iter().map(|h| h.1 - h.0).sum::<f64>() / 3.0;
        assert!((w.value - overall.abs()).abs() < 1e-15);
        assert_eq!(w.tents, 0);
    }

    #[test]
    fn log_inequality_examples() {
        let one = WeightFn::Constant(1.0);
        let hist: Vec<(f64, f64)> = (0..1000).map(|i| ((i % 7) as f64 / 7.0, (i % 2) as f64)).collect();
        let s = stats_with(Binning::trivial(1), &hist);
        let r = check_log_inequality(&s, &one).unwrap();
        let harmonic: f64 = (1..=1000).map(|s| 1.0 / s as f64).sum();
        assert!((r.lhs - harmonic).abs() < 1e-12);
        assert!(r.holds);
        let s1 = stats_with(Binning::trivial(1), &[(0.5, 1.0)]);
        let r = check_log_inequality(&s1, &one).unwrap();
        assert_eq!((r.lhs, r.rhs, r.holds), (1.0, 2.0, true));
        let r = check_log_inequality(&s1, &WeightFn::Indicator { center: p(0.9) }).unwrap();
        assert!(r.vacuous && r.holds);
        // sub-unit mass: ln n_t + 2 would be negative here
        let r = check_log_inequality(&s1, &WeightFn::Constant(0.1)).unwrap();
        assert!(r.below_unit_mass && r.holds);
        assert!(r.lhs > 0.1f64.ln() + 2.0);
    }

    #[test]
    fn lemma_norm_w_single_indicator() {
        let hist = [(0.25, 1.0), (0.5, 0.0), (0.25, 0.0), (0.75, 1.0), (0.25, 1.0)];
        let s = stats_with(Binning::trivial(1), &hist);
        let r = check_lemma_norm_w(&s, &[WeightFn::Indicator { center: p(0.25) }]).unwrap();
        assert!(r.holds);
        assert!(r.lhs <= classic_score(&s).unwrap());
    }

    fn random_history(rng: &mut ChaCha8Rng, t: usize, grid_values: bool) -> Vec<(f64, f64)> {
        (0..t)
            .map(|_| {
                let c = if grid_values { rng.random_range(0..=8) as f64 / 8.0 } else { rng.random::<f64>() };
                let a = if rng.random::<bool>() { f64::from(u8::from(rng.random::<bool>())) } else { rng.random::<f64>() };
                (c, a)
            })
            .collect()
    }

    #[test]
    fn algebraic_suite_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..200 {
            let hist = random_history(&mut rng, 20 + k % 30, k % 2 == 0);
            let res = rng.random_range(1..10);
            let g = Arc::new(Grid::uniform(&ConvexDomain::Interval01, res).unwrap());
            let width = rng.random_range(0.51..2.0) / res as f64;
            let b = Binning::tent(g, width).unwrap();
            let s = stats_with(b.clone(), &hist);
            let k_classic = classic_score(&s).unwrap();
            assert!((k_classic - classic_oracle(&hist)).abs() < 1e-12);
            let kb = binned_score(&s, &b).unwrap();
            assert!(kb <= k_classic + 1e-9, "K^Π {kb} > K {k_classic}");
            assert!(kb * kb <= square_score(&s, &b).unwrap() + 1e-9);
            let w = weak_score(&s, 3.0, 6).unwrap();
            assert!(w.value <= k_classic + 1e-9);
            // random nonnegative collection, not a partition
            let ws: Vec<WeightFn> = (0..rng.random_range(1..6))
                .map(|_| WeightFn::Tent { center: p(rng.random()), width: rng.random_range(0.05..1.0) })
                .collect();
            let r = check_lemma_norm_w(&s, &ws).unwrap();
            assert!(r.slack >= -1e-9, "{r:?}");
            let wf = WeightFn::Tent { center: p(rng.random()), width: rng.random_range(0.05..1.0) };
            assert!(check_log_inequality(&s, &wf).unwrap().holds);
        }
    }

    #[test]
    fn x_telescoping_matches_y_plus_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Arc::new(Grid::uniform(&ConvexDomain::Interval01, 5).unwrap());
        let b = Binning::tent(g, 0.17).unwrap();
        let mut s = HistoryStats::new(ConvexDomain::Interval01, Arc::new(b), Retention::default()).unwrap();
        for _ in 0..500 {
            let c = p(rng.random());
            let a = p(f64::from(u8::from(rng.random::<bool>())));
            let inc = square_increment(&mut s, &c, &a).unwrap();
            assert!((inc.delta_x - (inc.y + inc.z)).abs() < 1e-8, "{inc:?}");
        }
    }

    proptest! {
        #[test]
        fn fh_identity(alpha in 0.0f64..50.0, beta in 1e-3f64..1.0,
                       u in prop::collection::vec(-1.0f64..1.0, 3), v in prop::collection::vec(-1.0f64..1.0, 3)) {
            let r = fh_identity_residual(alpha, beta, &u, &v);
            let scale = 1.0 + (alpha + beta) * (norm_sq(&u) + norm_sq(&v));
            prop_assert!(r.abs() <= 1e-9 * scale);
        }

        #[test]
        fn classic_is_permutation_invariant(hist in prop::collection::vec((0usize..5, 0.0f64..=1.0), 1..40), seed in 0u64..1000) {
            let hist: Vec<(f64, f64)> = hist.into_iter().map(|(c, a)| (c as f64 / 4.0, a)).collect();
            let mut perm = hist.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..perm.len()).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let a = classic_score(&stats_with(Binning::trivial(1), &hist)).unwrap();
            let b = classic_score(&stats_with(Binning::trivial(1), &perm)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
