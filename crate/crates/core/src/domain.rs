//! Compact convex forecast sets with closed-form Euclidean projections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{dot, Point};

/// Global tolerance for geometric assertions.
pub const TOL_GEOM: f64 = 1e-9;

const MAX_BOX_VERTEX_AXES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DomainRepr {
    Interval01,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Simplex { m: usize },
    ProductOfSimplices { sizes: Vec<usize> },
}

/// The forecast set C: `[0,1]`, an axis-aligned box, a probability simplex,
/// or a product of simplices (one block per player).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRepr", into = "DomainRepr")]
pub enum ConvexDomain {
    Interval01,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Simplex { m: usize },
    ProductOfSimplices { sizes: Vec<usize> },
}

impl TryFrom<DomainRepr> for ConvexDomain {
    type Error = Error;
    fn try_from(r: DomainRepr) -> Result<Self> {
        match r {
            DomainRepr::Interval01 => Ok(ConvexDomain::Interval01),
            DomainRepr::Box { lo, hi } => ConvexDomain::new_box(lo, hi),
            DomainRepr::Simplex { m } => ConvexDomain::simplex(m),
            DomainRepr::ProductOfSimplices { sizes } => ConvexDomain::product_of_simplices(sizes),
        }
    }
}

impl From<ConvexDomain> for DomainRepr {
    fn from(d: ConvexDomain) -> Self {
        match d {
            ConvexDomain::Interval01 => DomainRepr::Interval01,
            ConvexDomain::Box { lo, hi } => DomainRepr::Box { lo, hi },
            ConvexDomain::Simplex { m } => DomainRepr::Simplex { m },
            ConvexDomain::ProductOfSimplices { sizes } => DomainRepr::ProductOfSimplices { sizes },
        }
    }
}

impl ConvexDomain {
    pub fn interval() -> Self {
        ConvexDomain::Interval01
    }

    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("box bounds must be non-empty and of equal length"));
        }
        if lo.iter().chain(&hi).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("box bounds"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::invalid("box requires lo <= hi in every coordinate"));
        }
        Ok(ConvexDomain::Box { lo, hi })
    }

    pub fn unit_box(m: usize) -> Result<Self> {
        ConvexDomain::new_box(vec![0.0; m], vec![1.0; m])
    }

    pub fn simplex(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("simplex needs at least one vertex"));
        }
        Ok(ConvexDomain::Simplex { m })
    }

    pub fn product_of_simplices(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::invalid("product of simplices needs non-empty blocks"));
        }
        Ok(ConvexDomain::ProductOfSimplices { sizes })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexDomain::Interval01 => 1,
            ConvexDomain::Box { lo, .. } => lo.len(),
            ConvexDomain::Simplex { m } => *m,
            ConvexDomain::ProductOfSimplices { sizes } => sizes.iter().sum(),
        }
    }

    /// Dimension of the affine hull.
    pub fn affine_dim(&self) -> usize {
        match self {
            ConvexDomain::Interval01 => 1,
            ConvexDomain::Box { lo, hi } => lo.iter().zip(hi).filter(|(l, h)| h > l).count(),
            ConvexDomain::Simplex { m } => m - 1,
            ConvexDomain::ProductOfSimplices { sizes } => sizes.iter().map(|s| s - 1).sum(),
        }
    }

    /// Diameter γ (largest pairwise distance).
    pub fn diameter(&self) -> f64 {
        match self {
            ConvexDomain::Interval01 => 1.0,
            ConvexDomain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt(),
            ConvexDomain::Simplex { m } => simplex_diameter(*m),
            ConvexDomain::ProductOfSimplices { sizes } => {
                sizes.iter().map(|&s| simplex_diameter(s).powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    /// Block sizes for simplex-structured domains (a single block for a simplex).
    pub fn blocks(&self) -> Option<Vec<usize>> {
        match self {
            ConvexDomain::Simplex { m } => Some(vec![*m]),
            ConvexDomain::ProductOfSimplices { sizes } => Some(sizes.clone()),
            _ => None,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ConvexDomain::Interval01 => x[0] >= -tol && x[0] <= 1.0 + tol,
            ConvexDomain::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
            }
            ConvexDomain::Simplex { .. } => in_simplex(x, tol),
            ConvexDomain::ProductOfSimplices { sizes } => {
                let mut off = 0;
                sizes.iter().all(|&s| {
                    let ok = in_simplex(&x[off..off + s], tol);
                    off += s;
                    ok
                })
            }
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        Error::check_dim(self.dim(), x.len())?;
        if self.contains(x, TOL_GEOM) {
            Ok(())
        } else {
            Err(Error::contract(format!("point {x:?} lies outside the domain")))
        }
    }

    /// Euclidean projection, in place.
    pub fn project_in_place(&self, z: &mut [f64]) {
        match self {
            ConvexDomain::Interval01 => z[0] = z[0].clamp(0.0, 1.0),
            ConvexDomain::Box { lo, hi } => {
                for (v, (l, h)) in z.iter_mut().zip(lo.iter().zip(hi)) {
                    *v = v.clamp(*l, *h);
                }
            }
            ConvexDomain::Simplex { .. } => project_simplex(z),
            ConvexDomain::ProductOfSimplices { sizes } => {
                let mut off = 0;
                for &s in sizes {
                    project_simplex(&mut z[off..off + s]);
                    off += s;
                }
            }
        }
    }

    pub fn project(&self, z: &[f64]) -> Result<Point> {
        Error::check_dim(self.dim(), z.len())?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection input"));
        }
        let mut y = z.to_vec();
        self.project_in_place(&mut y);
        Ok(Point::from_vec(y))
    }

    /// Support function h_C(v) = max over x in C of v·x.
    pub fn support(&self, v: &[f64]) -> f64 {
        match self {
            ConvexDomain::Interval01 => v[0].max(0.0),
            ConvexDomain::Box { lo, hi } => {
                v.iter().zip(lo.iter().zip(hi)).map(|(c, (l, h))| (c * l).max(c * h)).sum()
            }
            ConvexDomain::Simplex { .. } => max_of(v),
            ConvexDomain::ProductOfSimplices { sizes } => {
                let mut off = 0;
                sizes
                    .iter()
                    .map(|&s| {
                        let m = max_of(&v[off..off + s]);
                        off += s;
                        m
                    })
                    .sum()
            }
        }
    }

    /// A vertex maximizing v·x; ties go to the lowest coordinate index / lower bound.
    pub fn argmax_linear(&self, v: &[f64]) -> Point {
        let x = match self {
            ConvexDomain::Interval01 => vec![if v[0] > 0.0 { 1.0 } else { 0.0 }],
            ConvexDomain::Box { lo, hi } => {
                v.iter().zip(lo.iter().zip(hi)).map(|(c, (l, h))| if c * h > c * l { *h } else { *l }).collect()
            }
            ConvexDomain::Simplex { m } => unit(*m, argmax_of(v)),
            ConvexDomain::ProductOfSimplices { sizes } => {
                let mut out = Vec::with_capacity(v.len());
                let mut off = 0;
                for &s in sizes {
                    out.extend(unit(s, argmax_of(&v[off..off + s])));
                    off += s;
                }
                out
            }
        };
        Point::from_vec(x)
    }

    /// All extreme points, in lexicographic generation order.
    pub fn vertices(&self) -> Result<Vec<Point>> {
        let v = match self {
            ConvexDomain::Interval01 => vec![vec![0.0], vec![1.0]],
            ConvexDomain::Box { lo, hi } => {
                let free: Vec<usize> = (0..lo.len()).filter(|&i| hi[i] > lo[i]).collect();
                if free.len() > MAX_BOX_VERTEX_AXES {
                    return Err(Error::Unsupported(format!(
                        "vertex enumeration of a box with {} free axes",
                        free.len()
                    )));
                }
                (0..1usize << free.len())
                    .map(|mask| {
                        let mut x = lo.clone();
                        for (b, &i) in free.iter().enumerate() {
                            // most significant bit first keeps lexicographic order
                            if mask >> (free.len() - 1 - b) & 1 == 1 {
                                x[i] = hi[i];
                            }
                        }
                        x
                    })
                    .collect()
            }
            ConvexDomain::Simplex { m } => (0..*m).rev().map(|i| unit(*m, i)).collect(),
            ConvexDomain::ProductOfSimplices { sizes } => {
                let blocks: Vec<Vec<Vec<f64>>> =
                    sizes.iter().map(|&s| (0..s).rev().map(|i| unit(s, i)).collect()).collect();
                cartesian(&blocks)
            }
        };
        Ok(v.into_iter().map(Point::from_vec).collect())
    }

    /// Barycenter of the vertex set; the default initial forecast.
    pub fn centroid(&self) -> Point {
        let x = match self {
            ConvexDomain::Interval01 => vec![0.5],
            ConvexDomain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            ConvexDomain::Simplex { m } => vec![1.0 / *m as f64; *m],
            ConvexDomain::ProductOfSimplices { sizes } => {
                sizes.iter().flat_map(|&s| std::iter::repeat_n(1.0 / s as f64, s)).collect()
            }
        };
        Point::from_vec(x)
    }

    /// Endpoints (p0, p1) when the domain is a segment (affine dimension one).
    pub fn segment(&self) -> Option<(Point, Point)> {
        if self.affine_dim() != 1 {
            return None;
        }
        match self {
            ConvexDomain::Interval01 => Some((Point::from_vec(vec![0.0]), Point::from_vec(vec![1.0]))),
            ConvexDomain::Box { lo, hi } => {
                let i = (0..lo.len()).find(|&i| hi[i] > lo[i])?;
                let mut p1 = lo.clone();
                p1[i] = hi[i];
                Some((Point::from_vec(lo.clone()), Point::from_vec(p1)))
            }
            ConvexDomain::Simplex { .. } | ConvexDomain::ProductOfSimplices { .. } => {
                let sizes = self.blocks()?;
                let mut p0 = Vec::new();
                let mut p1 = Vec::new();
                for s in sizes {
                    if s == 2 {
                        p0.extend([1.0, 0.0]);
                        p1.extend([0.0, 1.0]);
                    } else {
                        p0.push(1.0);
                        p1.push(1.0);
                    }
                }
                Some((Point::from_vec(p0), Point::from_vec(p1)))
            }
        }
    }
}

fn simplex_diameter(m: usize) -> f64 {
    if m >= 2 {
        std::f64::consts::SQRT_2
    } else {
        0.0
    }
}

fn in_simplex(x: &[f64], tol: f64) -> bool {
    x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn argmax_of(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[i] = 1.0;
    e
}

pub(crate) fn cartesian(blocks: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for block in blocks {
        let mut next = Vec::with_capacity(out.len() * block.len());
        for prefix in &out {
            for part in block {
                let mut p = prefix.clone();
                p.extend_from_slice(part);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Sort-and-threshold projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Largest value of `(z - P(z))·(x - P(z))` over the vertices, a check of the
/// obtuse-angle characterization of the projection.
pub fn projection_residual(domain: &ConvexDomain, z: &[f64]) -> Result<f64> {
    let p = domain.project(z)?;
    let n: Vec<f64> = z.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
    Ok(domain.support(&n) - dot(&n, &p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn domains() -> Vec<ConvexDomain> {
        vec![
            ConvexDomain::Interval01,
            ConvexDomain::new_box(vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 2.0]).unwrap(),
            ConvexDomain::simplex(3).unwrap(),
            ConvexDomain::simplex(1).unwrap(),
            ConvexDomain::product_of_simplices(vec![2, 3]).unwrap(),
        ]
    }

    #[test]
    fn projection_examples() {
        let i = ConvexDomain::Interval01;
        assert_eq!(i.project(&[1.7]).unwrap().coords(), &[1.0]);
        let s3 = ConvexDomain::simplex(3).unwrap();
        let c = [1.0 / 3.0; 3];
        let p = s3.project(&c).unwrap();
        for (a, b) in p.iter().zip(c) {
            assert!((a - b).abs() < 1e-15);
        }
        let s2 = ConvexDomain::simplex(2).unwrap();
        assert_eq!(s2.project(&[2.0, 0.0]).unwrap().coords(), &[1.0, 0.0]);
    }

    #[test]
    fn simplex_projection_matches_brute_force() {
        // brute-force minimization over a fine lattice of the 2-simplex
        let s3 = ConvexDomain::simplex(3).unwrap();
        let n = 400;
        for z in [[0.9, 0.4, -0.3], [2.0, 2.0, -5.0], [0.1, 0.2, 0.3], [-1.0, 0.5, 0.25]] {
            let p = s3.project(&z).unwrap();
            let mut best = f64::INFINITY;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let x = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                    best = best.min(crate::point::dist(&x, &z));
                }
            }
            let d = crate::point::dist(&p, &z);
            assert!(d <= best + 1e-12, "{z:?}: {d} vs {best}");
            assert!(d >= best - 2.0 / n as f64);
        }
    }

    #[test]
    fn diameters() {
        assert_eq!(ConvexDomain::Interval01.diameter(), 1.0);
        assert_eq!(ConvexDomain::simplex(4).unwrap().diameter(), 2f64.sqrt());
        assert_eq!(ConvexDomain::simplex(1).unwrap().diameter(), 0.0);
        let p = ConvexDomain::product_of_simplices(vec![2, 2]).unwrap();
        assert!((p.diameter() - 2.0).abs() < 1e-15);
        for d in domains() {
            let vs = d.vertices().unwrap();
            let mut best = 0.0f64;
            for a in &vs {
                for b in &vs {
                    best = best.max(crate::point::dist(a, b));
                }
            }
            assert!((best - d.diameter()).abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn support_matches_vertex_max() {
        for d in domains() {
            let vs = d.vertices().unwrap();
            let v: Vec<f64> = (0..d.dim()).map(|i| (i as f64 * 1.37).sin()).collect();
            let brute = vs.iter().map(|x| dot(&v, x)).fold(f64::NEG_INFINITY, f64::max);
            assert!((d.support(&v) - brute).abs() < 1e-12);
            assert!((dot(&v, &d.argmax_linear(&v)) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn serde_round_trip_validates() {
        let d: ConvexDomain = serde_json::from_str(r#"{"kind":"simplex","m":3}"#).unwrap();
        assert_eq!(d, ConvexDomain::Simplex { m: 3 });
        let s = serde_json::to_string(&ConvexDomain::Interval01).unwrap();
        assert_eq!(s, r#"{"kind":"interval01"}"#);
        assert!(serde_json::from_str::<ConvexDomain>(r#"{"kind":"simplex","m":0}"#).is_err());
        assert!(serde_json::from_str::<ConvexDomain>(r#"{"kind":"box","lo":[1],"hi":[0]}"#).is_err());
        assert!(serde_json::from_str::<ConvexDomain>(r#"{"kind":"simplex","m":2,"x":1}"#).is_err());
    }

    #[test]
    fn segments() {
        assert!(ConvexDomain::Interval01.segment().is_some());
        assert!(ConvexDomain::simplex(2).unwrap().segment().is_some());
        assert!(ConvexDomain::simplex(3).unwrap().segment().is_none());
        let (p0, p1) = ConvexDomain::product_of_simplices(vec![1, 2]).unwrap().segment().unwrap();
        assert_eq!(p0.coords(), &[1.0, 1.0, 0.0]);
        assert_eq!(p1.coords(), &[1.0, 0.0, 1.0]);
    }

    fn arb_case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
        (0usize..5, prop::collection::vec(-3.0f64..3.0, 5), prop::collection::vec(0.0f64..1.0, 5))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn projection_properties((k, z, w) in arb_case()) {
            let d = &domains()[k];
            let z = &z[..d.dim()];
            let p = d.project(z).unwrap();
            prop_assert!(d.contains(&p, TOL_GEOM));
            let pp = d.project(&p).unwrap();
            for (a, b) in p.iter().zip(pp.iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            // obtuse angle against every vertex, hence every point of C
            prop_assert!(projection_residual(d, z).unwrap() <= TOL_GEOM);
            // and against a random interior point built from the vertices
            let vs = d.vertices().unwrap();
            let total: f64 = w.iter().take(vs.len()).map(|wi| wi + 1e-3).sum();
            let mut x = vec![0.0; d.dim()];
            for (v, wi) in vs.iter().zip(&w) {
                crate::point::axpy(&mut x, (wi + 1e-3) / total, v);
            }
            if vs.len() > w.len() {
                x = vs[0].to_vec();
            }
            let n: Vec<f64> = z.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
            let xm: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
            prop_assert!(dot(&n, &xm) <= TOL_GEOM);
        }
    }
}
