//! Finite δ-grids of a domain with documented mesh and covering radius.

use std::collections::HashMap;

use crate::domain::{cartesian, ConvexDomain};
#[cfg(test)]
use crate::domain::TOL_GEOM;
use crate::error::{Error, Result};
use crate::point::{dist, Point, PointKey};

/// Upper bound on the size of auxiliary grids built internally.
pub(crate) const MAX_AUX_GRID: usize = 200_000;

#[derive(Debug, Clone)]
pub struct Grid {
    domain: ConvexDomain,
    points: Vec<Point>,
    resolution: Option<usize>,
    spacing: f64,
    covering_radius: f64,
    index: HashMap<PointKey, usize>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain
            && self.points == other.points
            && self.covering_radius.to_bits() == other.covering_radius.to_bits()
    }
}

impl Grid {
    /// Uniform grid of the given resolution N.
    ///
    /// * interval: `{0, 1/N, ..., 1}`, covering radius `1/(2N)`
    /// * box: per-axis lattice, covering radius `sqrt(Σ (h_i/2N)²)`
    /// * simplex: `{k/N : Σk = N}`, covering radius `sqrt(a(m-a)/m)/N` with
    ///   `a = ⌊m/2⌋` (the covering radius of the A_{m-1} lattice; exact for
    ///   m ≤ 3 and an upper bound above)
    /// * product: Cartesian product of block grids, radii added in quadrature
    pub fn uniform(domain: &ConvexDomain, resolution: usize) -> Result<Grid> {
        if resolution == 0 {
            return Err(Error::invalid("grid resolution must be at least 1"));
        }
        let n = resolution as f64;
        let (coords, spacing, radius) = match domain {
            ConvexDomain::Interval01 => {
                let pts = (0..=resolution).map(|k| vec![k as f64 / n]).collect();
                (pts, 1.0 / n, 0.5 / n)
            }
            ConvexDomain::Box { lo, hi } => {
                let axes: Vec<Vec<Vec<f64>>> = lo
                    .iter()
                    .zip(hi)
                    .map(|(&l, &h)| {
                        if h > l {
                            (0..=resolution)
                                .map(|k| vec![if k == resolution { h } else { l + (h - l) * (k as f64 / n) }])
                                .collect()
                        } else {
                            vec![vec![l]]
                        }
                    })
                    .collect();
                let size: usize = axes.iter().map(Vec::len).product();
                check_size(size)?;
                let spacing = lo
                    .iter()
                    .zip(hi)
                    .filter(|(l, h)| h > l)
                    .map(|(l, h)| (h - l) / n)
                    .fold(f64::INFINITY, f64::min);
                let radius = lo.iter().zip(hi).map(|(l, h)| ((h - l) / (2.0 * n)).powi(2)).sum::<f64>().sqrt();
                (cartesian(&axes), if spacing.is_finite() { spacing } else { 0.0 }, radius)
            }
            ConvexDomain::Simplex { m } => {
                check_size(simplex_grid_size(*m, resolution))?;
                let pts = simplex_points(*m, resolution);
                (pts, simplex_spacing(*m, n), simplex_radius(*m, n))
            }
            ConvexDomain::ProductOfSimplices { sizes } => {
                let size = sizes.iter().map(|&s| simplex_grid_size(s, resolution)).try_fold(1usize, |a, b| a.checked_mul(b));
                check_size(size.unwrap_or(usize::MAX))?;
                let blocks: Vec<Vec<Vec<f64>>> = sizes.iter().map(|&s| simplex_points(s, resolution)).collect();
                let spacing = sizes
                    .iter()
                    .filter(|&&s| s >= 2)
                    .map(|&s| simplex_spacing(s, n))
                    .fold(f64::INFINITY, f64::min);
                let radius = sizes.iter().map(|&s| simplex_radius(s, n).powi(2)).sum::<f64>().sqrt();
                (cartesian(&blocks), if spacing.is_finite() { spacing } else { 0.0 }, radius)
            }
        };
        Ok(Grid::assemble(domain.clone(), coords.into_iter().map(Point::from_vec).collect(), Some(resolution), spacing, radius))
    }

    /// Grid from explicit points. The covering radius is exact on the interval;
    /// elsewhere it is a rigorous upper bound: the largest distance from a fine
    /// uniform sample to the points, plus the sample's own covering radius.
    pub fn from_points(domain: &ConvexDomain, points: Vec<Point>) -> Result<Grid> {
        if points.is_empty() {
            return Err(Error::invalid("grid must contain at least one point"));
        }
        for p in &points {
            domain.check_point(p)?;
        }
        let mut spacing = f64::INFINITY;
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                let d = dist(a, b);
                if d > 0.0 {
                    spacing = spacing.min(d);
                }
            }
        }
        let spacing = if spacing.is_finite() { spacing } else { 0.0 };
        let radius = match domain {
            ConvexDomain::Interval01 => {
                let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
                xs.sort_by(f64::total_cmp);
                let mut r = xs[0].max(1.0 - xs[xs.len() - 1]);
                for w in xs.windows(2) {
                    r = r.max(0.5 * (w[1] - w[0]));
                }
                r
            }
            _ => {
                let mut res = 8;
                while Grid::uniform(domain, res * 2).map(|g| g.len() * points.len() <= 4_000_000).unwrap_or(false) && res < 256 {
                    res *= 2;
                }
                let sample = Grid::uniform(domain, res)?;
                let far = sample
                    .points
                    .iter()
                    .map(|x| points.iter().map(|p| dist(x, p)).fold(f64::INFINITY, f64::min))
                    .fold(0.0, f64::max);
                far + sample.covering_radius
            }
        };
        Ok(Grid::assemble(domain.clone(), points, None, spacing, radius))
    }

    fn assemble(domain: ConvexDomain, points: Vec<Point>, resolution: Option<usize>, spacing: f64, covering_radius: f64) -> Grid {
        let mut index = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            index.entry(p.key()).or_insert(i);
        }
        Grid { domain, points, resolution, spacing, covering_radius, index }
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resolution(&self) -> Option<usize> {
        self.resolution
    }

    /// Nearest-neighbour spacing between distinct grid points.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// δ₀: every domain point lies within this distance of the grid.
    pub fn covering_radius(&self) -> f64 {
        self.covering_radius
    }

    /// Index of a grid point by exact coordinates.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        let key = Point::from_vec(x.to_vec()).key();
        self.index.get(&key).copied()
    }

    /// Index of the nearest grid point (lowest index on ties).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = crate::point::dist_sq(p, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Largest distance from the sample to the grid.
    pub fn sampled_covering_distance(&self, sample: &[Point]) -> f64 {
        sample.iter().map(|x| dist(x, &self.points[self.nearest(x)])).fold(0.0, f64::max)
    }

    /// Smallest uniform resolution whose covering radius is below `target`.
    pub fn resolution_for_radius(domain: &ConvexDomain, target: f64) -> Result<usize> {
        if !(target > 0.0) {
            return Err(Error::invalid("target covering radius must be positive"));
        }
        let probe = Grid::radius_at(domain, 1);
        if probe == 0.0 {
            return Ok(1);
        }
        // radius scales as 1/N for every supported kind
        let mut n = (probe / target).floor() as usize + 1;
        while Grid::radius_at(domain, n) >= target {
            n += 1;
        }
        Ok(n.max(1))
    }

    fn radius_at(domain: &ConvexDomain, resolution: usize) -> f64 {
        let n = resolution as f64;
        match domain {
            ConvexDomain::Interval01 => 0.5 / n,
            ConvexDomain::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| ((h - l) / (2.0 * n)).powi(2)).sum::<f64>().sqrt(),
            ConvexDomain::Simplex { m } => simplex_radius(*m, n),
            ConvexDomain::ProductOfSimplices { sizes } => sizes.iter().map(|&s| simplex_radius(s, n).powi(2)).sum::<f64>().sqrt(),
        }
    }

    pub(crate) fn check_width(&self, width: f64) -> Result<()> {
        if !(width > self.covering_radius) || !width.is_finite() {
            return Err(Error::invalid(format!(
                "width {width} must exceed the grid covering radius {}",
                self.covering_radius
            )));
        }
        Ok(())
    }

    #[cfg(test)]
    fn contains_all(&self) -> bool {
        self.points.iter().all(|p| self.domain.contains(p, TOL_GEOM))
    }
}

fn check_size(size: usize) -> Result<()> {
    if size > MAX_AUX_GRID * 10 {
        return Err(Error::Unsupported(format!("grid with {size} points")));
    }
    Ok(())
}

fn simplex_grid_size(m: usize, n: usize) -> usize {
    // C(n + m - 1, m - 1)
    let mut c: u128 = 1;
    for i in 0..(m - 1) as u128 {
        c = c * (n as u128 + 1 + i) / (i + 1);
    }
    usize::try_from(c).unwrap_or(usize::MAX)
}

fn simplex_points(m: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, n: usize, prefix: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if m == 1 {
            prefix.push(left as f64 / n as f64);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k as f64 / n as f64);
            rec(m - 1, left - k, n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, n, n, &mut Vec::with_capacity(m), &mut out);
    out
}

fn simplex_spacing(m: usize, n: f64) -> f64 {
    if m >= 2 {
        std::f64::consts::SQRT_2 / n
    } else {
        0.0
    }
}

fn simplex_radius(m: usize, n: f64) -> f64 {
    let a = (m / 2) as f64;
    let m = m as f64;
    (a * (m - a) / m).sqrt() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(d: &ConvexDomain, rng: &mut ChaCha8Rng) -> Point {
        let z: Vec<f64> = (0..d.dim()).map(|_| rng.random_range(-0.5..1.5)).collect();
        match d {
            ConvexDomain::Simplex { .. } | ConvexDomain::ProductOfSimplices { .. } => {
                // exponential weights are uniform on each simplex block
                let sizes = d.blocks().unwrap();
                let mut out = Vec::new();
                for s in sizes {
                    let e: Vec<f64> = (0..s).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
                    let t: f64 = e.iter().sum();
                    out.extend(e.iter().map(|x| x / t));
                }
                Point::from_vec(out)
            }
            _ => d.project(&z).unwrap(),
        }
    }

    #[test]
    fn interval_grid() {
        let g = Grid::uniform(&ConvexDomain::Interval01, 4).unwrap();
        let xs: Vec<f64> = g.points().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.covering_radius(), 0.125);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.index_of(&[0.75]), Some(3));
        assert_eq!(g.index_of(&[0.7]), None);
    }

    #[test]
    fn simplex_grid_order() {
        let g = Grid::uniform(&ConvexDomain::simplex(2).unwrap(), 2).unwrap();
        let pts: Vec<Vec<f64>> = g.points().iter().map(|p| p.to_vec()).collect();
        assert_eq!(pts, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        let g3 = Grid::uniform(&ConvexDomain::simplex(3).unwrap(), 4).unwrap();
        assert_eq!(g3.len(), 15);
        assert!(g3.contains_all());
    }

    #[test]
    fn box_grid_radius() {
        let g = Grid::uniform(&ConvexDomain::unit_box(2).unwrap(), 2).unwrap();
        assert_eq!(g.len(), 9);
        assert!((g.covering_radius() - 2f64.sqrt() / 4.0).abs() < 1e-15);
        // dense sample attains the radius at cell centers
        let sample: Vec<Point> = (0..=200)
            .flat_map(|i| (0..=200).map(move |j| Point::from_vec(vec![i as f64 / 200.0, j as f64 / 200.0])))
            .collect();
        let far = g.sampled_covering_distance(&sample);
        assert!((far - 2f64.sqrt() / 4.0).abs() < 1e-12, "{far}");
    }

    #[test]
    fn covering_radius_bounds_sampled_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let domains = [
            ConvexDomain::Interval01,
            ConvexDomain::new_box(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap(),
            ConvexDomain::simplex(2).unwrap(),
            ConvexDomain::simplex(3).unwrap(),
            ConvexDomain::simplex(4).unwrap(),
            ConvexDomain::product_of_simplices(vec![2, 2]).unwrap(),
            ConvexDomain::product_of_simplices(vec![3, 2]).unwrap(),
        ];
        for d in &domains {
            for res in [1, 2, 3, 5] {
                let g = Grid::uniform(d, res).unwrap();
                assert!(g.contains_all());
                let sample: Vec<Point> = (0..3000).map(|_| random_point(d, &mut rng)).collect();
                let far = g.sampled_covering_distance(&sample);
                assert!(far <= g.covering_radius() + TOL_GEOM, "{d:?} N={res}: {far} > {}", g.covering_radius());
            }
        }
    }

    #[test]
    fn simplex3_radius_is_attained() {
        // centroids of the small triangles are the deepest holes of the grid
        let d = ConvexDomain::simplex(3).unwrap();
        let g = Grid::uniform(&d, 3).unwrap();
        let c = Point::from_vec(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let near = dist(&c, &g.points()[g.nearest(&c)]);
        let x = Point::from_vec(vec![2.0 / 9.0, 2.0 / 9.0, 5.0 / 9.0]);
        let far = dist(&x, &g.points()[g.nearest(&x)]);
        assert!(near < 1e-12);
        assert!((far - g.covering_radius()).abs() < 1e-12, "{far} vs {}", g.covering_radius());
    }

    #[test]
    fn from_points_radius() {
        let d = ConvexDomain::Interval01;
        let pts = vec![Point::from_vec(vec![0.0]), Point::from_vec(vec![0.5]), Point::from_vec(vec![1.0])];
        let g = Grid::from_points(&d, pts).unwrap();
        assert_eq!(g.covering_radius(), 0.25);
        let two = Grid::from_points(&d, vec![Point::from_vec(vec![0.0]), Point::from_vec(vec![1.0])]).unwrap();
        assert_eq!(two.covering_radius(), 0.5);
        let s = ConvexDomain::simplex(3).unwrap();
        let verts = s.vertices().unwrap();
        let g = Grid::from_points(&s, verts).unwrap();
        // true radius is the distance from the centroid to a vertex
        let truth = (2.0f64 / 3.0).sqrt();
        assert!(g.covering_radius() >= truth - 1e-12);
        assert!(g.covering_radius() <= truth + 0.1);
    }

    #[test]
    fn resolution_for_radius() {
        let n = Grid::resolution_for_radius(&ConvexDomain::Interval01, 0.05).unwrap();
        assert_eq!(n, 11);
        let n = Grid::resolution_for_radius(&ConvexDomain::Interval01, 0.0501).unwrap();
        assert_eq!(n, 10);
    }
}
