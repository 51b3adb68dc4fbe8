//! Outgoing fixed points: y ∈ C with f(y)·(x − y) ≤ 0 for every x ∈ C.
//!
//! Stages, each certificate-checked:
//! 1. segments (affine dimension one): endpoint tests, then bisection on f(p(s))·d;
//! 2. semismooth Newton on the natural residual r(y) = y − P(y + f(y));
//! 3. extragradient with diminishing steps (plain projected iteration cycles on
//!    skew fields such as rock–paper–scissors);
//! 4. refined grid search, seeding Newton from the grid points.

use serde::{Deserialize, Serialize};

use super::certificate::{point_certificate, point_violation, OutgoingCertificate};
use super::field::VectorField;
use crate::domain::{ConvexDomain, TOL_GEOM};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::lu_solve;
use crate::point::{lex_cmp, norm, Point};

pub const TOL_SEGMENT: f64 = 1e-8;
pub const TOL_ITERATIVE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOptions {
    /// Accepted violation; defaults to 1e-8 on segments and 1e-6 otherwise.
    pub tolerance: Option<f64>,
    /// Iteration budget for the extragradient stage.
    pub max_iter: usize,
    /// Starting point for the iterative stages.
    pub warm_start: Option<Vec<f64>>,
    /// Largest grid examined by the search stage.
    pub max_grid_points: usize,
    /// When every stage misses the tolerance, return the best candidate anyway
    /// if its violation is within this bound; its certificate reads unsatisfied.
    pub accept_within: Option<f64>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tolerance: None, max_iter: 5_000, warm_start: None, max_grid_points: 20_000, accept_within: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStage {
    Segment,
    Newton,
    Extragradient,
    GridSearch,
    BestEffort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSolution {
    pub point: Point,
    pub value: Vec<f64>,
    pub certificate: OutgoingCertificate,
    pub stage: SolverStage,
    pub evaluations: usize,
}

struct Ctx<'a> {
    f: &'a dyn VectorField,
    domain: &'a ConvexDomain,
    m: usize,
    evals: usize,
    best: (Vec<f64>, f64),
}

impl Ctx<'_> {
    fn eval(&mut self, y: &[f64]) -> Vec<f64> {
        self.evals += 1;
        let v = self.f.eval(y);
        if v.iter().any(|x| !x.is_finite()) {
            // treat a non-finite value as maximal violation; callers check finiteness
            return vec![f64::NAN; self.m];
        }
        v
    }

    /// Violation at y, remembering the best candidate (lexicographic tie-break).
    fn violation(&mut self, y: &[f64], fy: &[f64]) -> f64 {
        let v = point_violation(self.domain, y, fy);
        // projections of huge iterates can land visibly off the set
        let v = if v.is_finite() && self.domain.contains(y, TOL_GEOM) { v.max(0.0) } else { f64::INFINITY };
        if v < self.best.1 || (v == self.best.1 && lex_cmp(y, &self.best.0).is_lt()) {
            self.best = (y.to_vec(), v);
        }
        v
    }

    fn project(&self, z: &mut [f64]) {
        self.domain.project_in_place(z);
    }

    /// r(y) = y − P(y + f(y)) for y ∈ C.
    fn residual(&mut self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let fy = self.eval(y);
        let mut z: Vec<f64> = y.iter().zip(&fy).map(|(a, b)| a + b).collect();
        if z.iter().any(|v| !v.is_finite()) {
            return (vec![f64::INFINITY; self.m], fy);
        }
        self.project(&mut z);
        (y.iter().zip(&z).map(|(a, b)| a - b).collect(), fy)
    }

    /// Extended residual y ↦ P(y) − P(P(y) + f(P(y))) on all of ℝ^m (f is only
    /// evaluated on C), used for finite-difference Jacobians.
    fn residual_ext(&mut self, y: &[f64]) -> Vec<f64> {
        let mut py = y.to_vec();
        self.project(&mut py);
        let (r, _) = self.residual(&py);
        // y − P(y) contributes the normal component so the Jacobian stays regular
        y.iter().zip(&py).zip(&r).map(|((a, b), c)| a - b + c).collect()
    }
}

/// Finds y ∈ C with max_{x∈C} f(y)·(x − y) ≤ tolerance.
pub fn outgoing_fixed_point(f: &dyn VectorField, domain: &ConvexDomain, opts: &FixedPointOptions) -> Result<FixedPointSolution> {
    let m = domain.dim();
    Error::check_dim(m, f.dim())?;
    if !f.is_continuous() {
        return Err(Error::invalid("outgoing fixed points need a continuous field"));
    }
    let mut ctx = Ctx { f, domain, m, evals: 0, best: (domain.centroid().to_vec(), f64::INFINITY) };

    if let Some((p0, p1)) = domain.segment() {
        let tol = opts.tolerance.unwrap_or(TOL_SEGMENT);
        if let Some(y) = segment_solve(&mut ctx, &p0, &p1, tol) {
            return finish(&mut ctx, y, tol, SolverStage::Segment);
        }
    }
    let tol = opts.tolerance.unwrap_or(TOL_ITERATIVE);
    let start = match &opts.warm_start {
        Some(w) if w.len() == m && w.iter().all(|v| v.is_finite()) => {
            let mut s = w.clone();
            ctx.project(&mut s);
            s
        }
        _ => domain.centroid().to_vec(),
    };
    if let Some(y) = newton(&mut ctx, start.clone(), tol, 60) {
        return finish(&mut ctx, y, tol, SolverStage::Newton);
    }
    let centroid = domain.centroid().to_vec();
    let from_centroid = (start != centroid).then_some(centroid);
    for s in std::iter::once(start).chain(from_centroid) {
        if let Some(y) = extragradient(&mut ctx, s, tol, opts.max_iter) {
            return finish(&mut ctx, y, tol, SolverStage::Extragradient);
        }
    }
    if let Some(y) = grid_search(&mut ctx, tol, opts.max_grid_points, opts.max_iter)? {
        return finish(&mut ctx, y, tol, SolverStage::GridSearch);
    }
    let (best, violation) = ctx.best.clone();
    if opts.accept_within.is_some_and(|a| violation <= a) {
        let fy = ctx.eval(&best);
        let certificate = point_certificate(domain, &best, &fy, tol);
        return Ok(FixedPointSolution { point: Point::from_vec(best), value: fy, certificate, stage: SolverStage::BestEffort, evaluations: ctx.evals });
    }
    Err(Error::SolverFailure {
        message: format!("no outgoing point within tolerance {tol:.1e} after {} evaluations", ctx.evals),
        best,
        violation,
    })
}

fn finish(ctx: &mut Ctx<'_>, y: Vec<f64>, tol: f64, stage: SolverStage) -> Result<FixedPointSolution> {
    let fy = ctx.eval(&y);
    let certificate = point_certificate(ctx.domain, &y, &fy, tol);
    debug_assert!(certificate.satisfied);
    Ok(FixedPointSolution { point: Point::from_vec(y), value: fy, certificate, stage, evaluations: ctx.evals })
}

fn lerp(p0: &[f64], p1: &[f64], s: f64) -> Vec<f64> {
    p0.iter().zip(p1).map(|(a, b)| if s == 1.0 { *b } else { a + s * (b - a) }).collect()
}

/// On a segment p(s) = p0 + s(p1 − p0) the condition reduces to the sign of
/// h(s) = f(p(s))·(p1 − p0): h(0) ≤ 0 accepts s = 0, h(1) ≥ 0 accepts s = 1,
/// otherwise h changes sign and bisection brackets a zero.
fn segment_solve(ctx: &mut Ctx<'_>, p0: &Point, p1: &Point, tol: f64) -> Option<Vec<f64>> {
    let d: Vec<f64> = p1.iter().zip(p0.iter()).map(|(a, b)| a - b).collect();
    let h = |ctx: &mut Ctx<'_>, s: f64| -> (Vec<f64>, f64, f64) {
        let y = lerp(p0, p1, s);
        let fy = ctx.eval(&y);
        let v = ctx.violation(&y, &fy);
        let hs = crate::point::dot(&fy, &d);
        (y, hs, v)
    };
    let (y0, h0, v0) = h(ctx, 0.0);
    if h0 <= 0.0 && v0 <= tol {
        return Some(y0);
    }
    let (y1, h1, v1) = h(ctx, 1.0);
    if h1 >= 0.0 && v1 <= tol {
        return Some(y1);
    }
    if !(h0 > 0.0 && h1 < 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (mut y_lo, mut v_lo, mut y_hi, mut v_hi) = (y0, v0, y1, v1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (y, hm, v) = h(ctx, mid);
        if hm == 0.0 {
            return Some(y);
        }
        if hm > 0.0 {
            lo = mid;
            y_lo = y;
            v_lo = v;
        } else {
            hi = mid;
            y_hi = y;
            v_hi = v;
        }
        if v_lo.min(v_hi) <= tol * 1e-3 {
            break;
        }
    }
    let (y, v) = if v_lo <= v_hi { (y_lo, v_lo) } else { (y_hi, v_hi) };
    (v <= tol).then_some(y)
}

fn newton(ctx: &mut Ctx<'_>, start: Vec<f64>, tol: f64, max_steps: usize) -> Option<Vec<f64>> {
    let m = ctx.m;
    let mut y = start;
    let (mut r, mut fy) = ctx.residual(&y);
    for _ in 0..max_steps {
        if ctx.violation(&y, &fy) <= tol {
            return Some(y);
        }
        // the natural-map image is often already outgoing
        let mut z: Vec<f64> = y.iter().zip(&fy).map(|(a, b)| a + b).collect();
        if z.iter().all(|v| v.is_finite()) {
            ctx.project(&mut z);
            let fz = ctx.eval(&z);
            if ctx.violation(&z, &fz) <= tol {
                return Some(z);
            }
        }
        let rn = norm(&r);
        if !rn.is_finite() {
            return None;
        }
        let mut jac = vec![0.0; m * m];
        for j in 0..m {
            let h = 1e-7 * (1.0 + y[j].abs());
            let mut yj = y.clone();
            yj[j] += h;
            let rj = ctx.residual_ext(&yj);
            for i in 0..m {
                jac[i * m + j] = (rj[i] - r[i]) / h;
            }
        }
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        if lu_solve(&mut jac, &mut step, m).is_none() || step.iter().any(|v| !v.is_finite()) {
            step = r.iter().map(|v| -v).collect();
        }
        let sn = norm(&step);
        let diam = ctx.domain.diameter();
        if sn > diam {
            step.iter_mut().for_each(|v| *v *= diam / sn);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-6 {
            let mut cand: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
            ctx.project(&mut cand);
            let (rc, fc) = ctx.residual(&cand);
            if norm(&rc) <= (1.0 - 1e-4 * alpha) * rn {
                accepted = Some((cand, rc, fc));
                break;
            }
            if ctx.violation(&cand, &fc) <= tol {
                return Some(cand);
            }
            alpha *= 0.5;
        }
        let (yn, rnew, fnew) = accepted?;
        y = yn;
        r = rnew;
        fy = fnew;
    }
    (ctx.violation(&y, &fy) <= tol).then_some(y)
}

fn extragradient(ctx: &mut Ctx<'_>, start: Vec<f64>, tol: f64, max_iter: usize) -> Option<Vec<f64>> {
    let mut y = start;
    let f0 = ctx.eval(&y);
    if f0.iter().any(|v| !v.is_finite()) {
        return None;
    }
    // Lipschitz estimate from a short probe
    let mut probe: Vec<f64> = y.iter().zip(&f0).map(|(a, b)| a + 0.01 * b).collect();
    ctx.project(&mut probe);
    let f1 = ctx.eval(&probe);
    let dy = crate::point::dist(&probe, &y);
    let lip = if dy > 0.0 { crate::point::dist(&f1, &f0) / dy } else { 1.0 };
    let step0 = 0.5 / lip.max(1e-3);
    for k in 0..max_iter {
        let s = step0 / (1.0 + k as f64 / 200.0).sqrt();
        let fy = ctx.eval(&y);
        if k % 5 == 0 && ctx.violation(&y, &fy) <= tol {
            return Some(y);
        }
        let mut half: Vec<f64> = y.iter().zip(&fy).map(|(a, b)| a + s * b).collect();
        ctx.project(&mut half);
        let fh = ctx.eval(&half);
        if k % 5 == 0 && ctx.violation(&half, &fh) <= tol {
            return Some(half);
        }
        let mut next: Vec<f64> = y.iter().zip(&fh).map(|(a, b)| a + s * b).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return None;
        }
        ctx.project(&mut next);
        y = next;
        if k % 100 == 99 {
            // polish with a few Newton steps from the current iterate
            if let Some(sol) = newton(ctx, y.clone(), tol, 8) {
                return Some(sol);
            }
        }
    }
    None
}

fn grid_search(ctx: &mut Ctx<'_>, tol: f64, max_points: usize, max_iter: usize) -> Result<Option<Vec<f64>>> {
    let mut res = 2;
    loop {
        let g = match Grid::uniform(ctx.domain, res) {
            Ok(g) if g.len() <= max_points => g,
            _ => return Ok(None),
        };
        // (violation, violation / |f|, index)
        let mut scored: Vec<(f64, f64, usize)> = Vec::with_capacity(g.len());
        for (i, y) in g.points().iter().enumerate() {
            let fy = ctx.eval(y);
            let v = ctx.violation(y, &fy);
            let n = norm(&fy);
            scored.push((v, if n > 0.0 { v / n } else { 0.0 }, i));
        }
        let pts = g.points();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| pts[a.2].lex_cmp(&pts[b.2])));
        if scored[0].0 <= tol {
            return Ok(Some(pts[scored[0].2].to_vec()));
        }
        // Where the field is tiny the raw violation looks good far from any
        // solution and Newton stalls there, so the best few by relative violation
        // go first, then every other grid point.
        let mut by_rel = scored.clone();
        by_rel.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| pts[a.2].lex_cmp(&pts[b.2])));
        let mut order: Vec<usize> = Vec::with_capacity(pts.len());
        let mut seen = vec![false; pts.len()];
        let head = scored.iter().take(GRID_SEEDS).zip(by_rel.iter().take(GRID_SEEDS)).flat_map(|(a, b)| [a.2, b.2]);
        for i in head.chain(scored.iter().map(|s| s.2)) {
            if !std::mem::replace(&mut seen[i], true) {
                order.push(i);
            }
        }
        for &i in &order {
            if let Some(y) = newton(ctx, pts[i].to_vec(), tol, 30) {
                return Ok(Some(y));
            }
        }
        for &i in order.iter().take(2 * GRID_SEEDS) {
            if let Some(y) = extragradient(ctx, pts[i].to_vec(), tol, max_iter / 5) {
                return Ok(Some(y));
            }
        }
        res *= 2;
    }
}

const GRID_SEEDS: usize = 5;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hedging::certificate::point_violation;
    use crate::hedging::field::{AffineField, FnField};

    #[test]
    fn interior_zero() {
        let f = FnField::new(1, |x: &[f64], o: &mut [f64]| o[0] = 0.5 - x[0]);
        let s = outgoing_fixed_point(&f, &ConvexDomain::Interval01, &FixedPointOptions::default()).unwrap();
        assert!((s.point[0] - 0.5).abs() < 1e-8);
        assert_eq!(s.stage, SolverStage::Segment);
    }

    #[test]
    fn boundary_outgoing() {
        let f = FnField::new(1, |_: &[f64], o: &mut [f64]| o[0] = 1.0);
        let s = outgoing_fixed_point(&f, &ConvexDomain::Interval01, &FixedPointOptions::default()).unwrap();
        assert_eq!(s.point.coords(), &[1.0]);
        assert_eq!(s.certificate.max_violation, 0.0);
    }

    #[test]
    fn rock_paper_scissors_field() {
        let b = vec![0.0, -1.0, 1.0, 1.0, 0.0, -1.0, -1.0, 1.0, 0.0];
        let f = AffineField { a: b, b: vec![0.0; 3] };
        let d = ConvexDomain::simplex(3).unwrap();
        let opts = FixedPointOptions { warm_start: Some(vec![0.7, 0.2, 0.1]), tolerance: Some(1e-10), ..Default::default() };
        let s = outgoing_fixed_point(&f, &d, &opts).unwrap();
        for v in s.point.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-6, "{:?}", s.point);
        }
        // verification on a 10⁻²-mesh grid
        let g = Grid::uniform(&d, 100).unwrap();
        let fy = f.eval(&s.point);
        let worst = g
            .points()
            .iter()
            .map(|x| fy.iter().zip(x.iter().zip(s.point.iter())).map(|(a, (b, c))| a * (b - c)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-9);
        assert!(point_violation(&d, &s.point, &fy) <= 1e-9);
    }

    #[test]
    fn discontinuous_field_rejected() {
        struct Jump;
        impl VectorField for Jump {
            fn dim(&self) -> usize {
                1
            }
            fn eval_into(&self, _: &[f64], o: &mut [f64]) {
                o[0] = 1.0;
            }
            fn is_continuous(&self) -> bool {
                false
            }
        }
        assert!(outgoing_fixed_point(&Jump, &ConvexDomain::Interval01, &FixedPointOptions::default()).is_err());
    }

    #[test]
    fn box_corner_and_face_solutions() {
        let d = ConvexDomain::unit_box(3).unwrap();
        // constant field pushes to the corner (1, 0, 1); the middle coordinate is free at 0
        let f = AffineField { a: vec![0.0; 9], b: vec![1.0, -2.0, 0.5] };
        let s = outgoing_fixed_point(&f, &d, &FixedPointOptions::default()).unwrap();
        assert!(s.certificate.satisfied);
        assert_eq!(s.point.coords(), &[1.0, 0.0, 1.0]);
        // contraction toward (0.3, 1.4, -0.2) stops at its projection
        let f = AffineField { a: vec![-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0], b: vec![0.3, 1.4, -0.2] };
        let s = outgoing_fixed_point(&f, &d, &FixedPointOptions::default()).unwrap();
        for (a, b) in s.point.iter().zip([0.3, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn solver_failure_reports_best_candidate() {
        // no continuous field lacks an outgoing point, so force failure with a zero budget field:
        // a field that is NaN everywhere cannot be certified
        let f = FnField::new(2, |_: &[f64], o: &mut [f64]| o.iter_mut().for_each(|v| *v = f64::NAN));
        let d = ConvexDomain::unit_box(2).unwrap();
        let opts = FixedPointOptions { max_iter: 10, max_grid_points: 30, ..Default::default() };
        match outgoing_fixed_point(&f, &d, &opts) {
            Err(Error::SolverFailure { best, .. }) => assert_eq!(best.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
