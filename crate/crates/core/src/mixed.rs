//! Finitely supported distributions over forecasts.

use serde::{Deserialize, Serialize};

use crate::domain::TOL_GEOM;
use crate::error::{Error, Result};
use crate::point::{dist, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locality {
    pub center: Point,
    pub radius: f64,
}

/// A probability distribution η on finitely many points, with the support
/// sorted lexicographically (the sampling order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedForecast {
    support: Vec<(Point, f64)>,
    locality: Option<Locality>,
}

impl MixedForecast {
    pub fn new(support: Vec<(Point, f64)>, locality: Option<Locality>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("mixed forecast needs a non-empty support"));
        }
        let dim = support[0].0.dim();
        let mut total = 0.0;
        for (x, p) in &support {
            Error::check_dim(dim, x.dim())?;
            if !(0.0..=1.0 + TOL_GEOM).contains(p) {
                return Err(Error::invalid(format!("probability {p} outside [0,1]")));
            }
            total += p;
        }
        if (total - 1.0).abs() > TOL_GEOM {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        if let Some(loc) = &locality {
            Error::check_dim(dim, loc.center.dim())?;
            for (x, _) in &support {
                let d = dist(x, &loc.center);
                if d > loc.radius + TOL_GEOM {
                    return Err(Error::contract(format!(
                        "support point at distance {d} exceeds locality radius {}",
                        loc.radius
                    )));
                }
            }
        }
        let mut support: Vec<(Point, f64)> = support.into_iter().filter(|(_, p)| *p > 0.0).collect();
        if support.is_empty() {
            return Err(Error::invalid("mixed forecast has no positive mass"));
        }
        support.sort_by(|a, b| a.0.lex_cmp(&b.0));
        Ok(MixedForecast { support, locality })
    }

    pub fn point_mass(x: Point) -> Self {
        let center = x.clone();
        MixedForecast { support: vec![(x, 1.0)], locality: Some(Locality { center, radius: 0.0 }) }
    }

    pub fn support(&self) -> &[(Point, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.support[0].0.dim()
    }

    pub fn locality(&self) -> Option<&Locality> {
        self.locality.as_ref()
    }

    pub fn is_point_mass(&self) -> bool {
        self.support.len() == 1
    }

    pub fn mean(&self) -> Point {
        let mut m = vec![0.0; self.dim()];
        for (x, p) in &self.support {
            crate::point::axpy(&mut m, *p, x);
        }
        Point::from_vec(m)
    }

    pub fn expect(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.support.iter().map(|(x, p)| p * f(x)).sum()
    }

    pub fn support_diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, (a, _)) in self.support.iter().enumerate() {
            for (b, _) in &self.support[i + 1..] {
                d = d.max(dist(a, b));
            }
        }
        d
    }

    /// Inverse-CDF sample for a uniform draw `u` in [0,1).
    pub fn sample_with(&self, u: f64) -> &Point {
        let mut acc = 0.0;
        for (x, p) in &self.support {
            acc += p;
            if u < acc {
                return x;
            }
        }
        // rounding left a sliver of mass at the top
        &self.support[self.support.len() - 1].0
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.support.iter().any(|(y, _)| y.coords() == x)
    }
}
