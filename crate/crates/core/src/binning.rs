//! Weight functions and finite partitions of unity over the forecast set.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{ConvexDomain, TOL_GEOM};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::point::{dist, Point};

/// Unnormalized tent Λ(c, y) = [δ − ‖c − y‖]₊.
#[inline]
pub fn tent(c: &[f64], y: &[f64], width: f64) -> f64 {
    (width - dist(c, y)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightFn {
    /// 1 at exactly `center`, 0 elsewhere.
    Indicator { center: Point },
    /// `max(δ − ‖c − center‖, 0)/δ`, which is (1/δ)-Lipschitz.
    Tent { center: Point, width: f64 },
    /// The i-th member of a normalized tent binning.
    NormalizedTent { index: usize, grid: Arc<Grid>, width: f64 },
    Constant(f64),
    /// 1 off the grid, 0 on it: the complement bin of an indicator binning.
    OffGrid { grid: Arc<Grid> },
}

impl WeightFn {
    pub fn eval(&self, c: &[f64]) -> f64 {
        match self {
            WeightFn::Indicator { center } => f64::from(u8::from(center.coords() == c)),
            WeightFn::Tent { center, width } => tent(c, center, *width) / width,
            WeightFn::NormalizedTent { index, grid, width } => {
                let mut total = 0.0;
                let mut own = 0.0;
                for (j, y) in grid.points().iter().enumerate() {
                    let l = tent(c, y, *width);
                    total += l;
                    if j == *index {
                        own = l;
                    }
                }
                if total > 0.0 {
                    own / total
                } else {
                    0.0
                }
            }
            WeightFn::Constant(v) => *v,
            WeightFn::OffGrid { grid } => f64::from(u8::from(grid.index_of(c).is_none())),
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, WeightFn::Indicator { .. } | WeightFn::OffGrid { .. })
    }

    /// Supremum of the function (an upper bound for the normalized tents).
    pub fn sup(&self) -> f64 {
        match self {
            WeightFn::Constant(v) => v.abs(),
            _ => 1.0,
        }
    }
}

/// Serializable description of a binning built on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BinningSpec {
    /// The single constant function 1.
    Trivial,
    /// Indicators of the grid points plus the complement bin.
    Indicator { resolution: usize },
    /// Normalized tents on the grid; the width defaults to the grid spacing
    /// when that exceeds the covering radius, otherwise 1.25 times the radius.
    Tent {
        resolution: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<f64>,
    },
}

impl BinningSpec {
    pub fn build(&self, domain: &ConvexDomain) -> Result<Binning> {
        match self {
            BinningSpec::Trivial => Ok(Binning::trivial(domain.dim())),
            BinningSpec::Indicator { resolution } => {
                Ok(Binning::indicator(Arc::new(Grid::uniform(domain, *resolution)?)))
            }
            BinningSpec::Tent { resolution, width } => {
                let grid = Arc::new(Grid::uniform(domain, *resolution)?);
                let w = width.unwrap_or_else(|| default_tent_width(&grid));
                Binning::tent(grid, w)
            }
        }
    }
}

pub fn default_tent_width(grid: &Grid) -> f64 {
    if grid.spacing() > grid.covering_radius() {
        grid.spacing()
    } else {
        1.25 * grid.covering_radius()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Trivial,
    Indicator(Arc<Grid>),
    Tent { grid: Arc<Grid>, width: f64 },
    Custom(Vec<WeightFn>),
}

/// A finite partition of unity (w_i) on the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    kind: Kind,
    dim: usize,
    continuous: bool,
}

impl Binning {
    pub fn trivial(dim: usize) -> Binning {
        Binning { kind: Kind::Trivial, dim, continuous: true }
    }

    /// Indicators of grid points plus one complement bin (always the last).
    pub fn indicator(grid: Arc<Grid>) -> Binning {
        let dim = grid.domain().dim();
        Binning { kind: Kind::Indicator(grid), dim, continuous: false }
    }

    /// Normalized tents `Λ(c, y_i) / Σ_j Λ(c, y_j)`; requires width > covering radius.
    pub fn tent(grid: Arc<Grid>, width: f64) -> Result<Binning> {
        grid.check_width(width)?;
        let dim = grid.domain().dim();
        Ok(Binning { kind: Kind::Tent { grid, width }, dim, continuous: true })
    }

    /// Arbitrary weight functions, checked to form a partition of unity on a
    /// dense sample of the domain.
    pub fn custom(domain: &ConvexDomain, weights: Vec<WeightFn>) -> Result<Binning> {
        if weights.is_empty() {
            return Err(Error::invalid("binning needs at least one weight function"));
        }
        let sample = Grid::uniform(domain, sample_resolution(domain))?;
        for c in sample.points() {
            let mut total = 0.0;
            for w in &weights {
                let v = w.eval(c);
                if !(-TOL_GEOM..=1.0 + TOL_GEOM).contains(&v) {
                    return Err(Error::invalid(format!("weight {v} outside [0,1] at {c:?}")));
                }
                total += v;
            }
            if (total - 1.0).abs() > TOL_GEOM {
                return Err(Error::invalid(format!("weights sum to {total} at {c:?}, not 1")));
            }
        }
        let continuous = weights.iter().all(WeightFn::is_continuous);
        Ok(Binning { kind: Kind::Custom(weights), dim: domain.dim(), continuous })
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            Kind::Trivial => 1,
            Kind::Indicator(g) => g.len() + 1,
            Kind::Tent { grid, .. } => grid.len(),
            Kind::Custom(w) => w.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn grid(&self) -> Option<&Arc<Grid>> {
        match &self.kind {
            Kind::Indicator(g) | Kind::Tent { grid: g, .. } => Some(g),
            _ => None,
        }
    }

    pub fn tent_width(&self) -> Option<f64> {
        match &self.kind {
            Kind::Tent { width, .. } => Some(*width),
            _ => None,
        }
    }

    /// Nonzero weights at c as (bin index, weight) pairs, written into `out`.
    pub fn weights_into(&self, c: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        match &self.kind {
            Kind::Trivial => out.push((0, 1.0)),
            Kind::Indicator(g) => out.push((g.index_of(c).unwrap_or(g.len()), 1.0)),
            Kind::Tent { grid, width } => {
                let mut total = 0.0;
                let w2 = width * width;
                for (i, y) in grid.points().iter().enumerate() {
                    // partial sums only grow, so most far points exit early
                    let mut s = 0.0;
                    for (a, b) in c.iter().zip(y.iter()) {
                        s += (a - b) * (a - b);
                        if s >= w2 {
                            break;
                        }
                    }
                    if s >= w2 {
                        continue;
                    }
                    let l = width - s.sqrt();
                    if l > 0.0 {
                        out.push((i, l));
                        total += l;
                    }
                }
                for (_, w) in out.iter_mut() {
                    *w /= total;
                }
            }
            Kind::Custom(ws) => {
                for (i, w) in ws.iter().enumerate() {
                    let v = w.eval(c);
                    if v != 0.0 {
                        out.push((i, v));
                    }
                }
            }
        }
    }

    /// Dense weight vector at c.
    pub fn weights(&self, c: &[f64]) -> Vec<f64> {
        let mut sparse = Vec::new();
        self.weights_into(c, &mut sparse);
        let mut w = vec![0.0; self.len()];
        for (i, v) in sparse {
            w[i] = v;
        }
        w
    }

    /// The i-th weight function as a standalone value.
    pub fn weight_fn(&self, i: usize) -> WeightFn {
        match &self.kind {
            Kind::Trivial => WeightFn::Constant(1.0),
            Kind::Indicator(g) if i < g.len() => WeightFn::Indicator { center: g.points()[i].clone() },
            Kind::Indicator(g) => WeightFn::OffGrid { grid: g.clone() },
            Kind::Tent { grid, width } => WeightFn::NormalizedTent { index: i, grid: grid.clone(), width: *width },
            Kind::Custom(ws) => ws[i].clone(),
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match &self.kind {
            Kind::Trivial => serde_json::json!({ "kind": "trivial" }),
            Kind::Indicator(g) => serde_json::json!({
                "kind": "indicator", "points": g.len(), "resolution": g.resolution(),
                "covering_radius": g.covering_radius(),
            }),
            Kind::Tent { grid, width } => serde_json::json!({
                "kind": "tent", "points": grid.len(), "resolution": grid.resolution(),
                "width": width, "covering_radius": grid.covering_radius(),
            }),
            Kind::Custom(ws) => serde_json::json!({ "kind": "custom", "functions": ws.len(), "continuous": self.continuous }),
        }
    }
}

fn sample_resolution(domain: &ConvexDomain) -> usize {
    match domain.affine_dim() {
        0 | 1 => 400,
        2 => 60,
        3 => 20,
        _ => 6,
    }
}
