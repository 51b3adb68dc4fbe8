use serde::{Deserialize, Serialize};

use crate::domain::ConvexDomain;
use crate::grid::Grid;
use crate::point::{dot, norm};

/// How a certificate's maximum over x ∈ C was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    /// Exact maximum through the support function (the expression is linear in x,
    /// so the maximum over C is attained at a vertex).
    ExactSupport,
    /// Maximum over a uniform verification grid.
    Grid { resolution: usize },
}

/// Record that a candidate satisfies an outgoing condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutgoingCertificate {
    /// max over x of the left-hand side minus the allowed right-hand side.
    pub max_violation: f64,
    /// The allowed right-hand side (0 for outgoing points, δ·E‖f‖ for distributions).
    pub allowance: f64,
    pub tolerance: f64,
    pub satisfied: bool,
    pub verification: Verification,
}

impl OutgoingCertificate {
    pub(crate) fn new(max_violation: f64, allowance: f64, tolerance: f64, verification: Verification) -> Self {
        OutgoingCertificate {
            max_violation,
            allowance,
            tolerance,
            satisfied: max_violation <= tolerance,
            verification,
        }
    }
}

/// max_{x∈C} f(y)·(x − y).
pub fn point_violation(domain: &ConvexDomain, y: &[f64], fy: &[f64]) -> f64 {
    domain.support(fy) - dot(fy, y)
}

pub fn point_certificate(domain: &ConvexDomain, y: &[f64], fy: &[f64], tolerance: f64) -> OutgoingCertificate {
    OutgoingCertificate::new(point_violation(domain, y, fy), 0.0, tolerance, Verification::ExactSupport)
}

/// Moments of a distribution over (y, f(y)) pairs that determine the
/// left-hand side E[f(y)·(x − y)] for every x.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean_f: Vec<f64>,
    pub mean_fy: f64,
    pub mean_norm: f64,
}

impl Moments {
    pub fn of<'a>(items: impl IntoIterator<Item = (&'a [f64], &'a [f64], f64)>, dim: usize) -> Self {
        let mut mean_f = vec![0.0; dim];
        let mut mean_fy = 0.0;
        let mut mean_norm = 0.0;
        for (y, fy, p) in items {
            crate::point::axpy(&mut mean_f, p, fy);
            mean_fy += p * dot(fy, y);
            mean_norm += p * norm(fy);
        }
        Moments { mean_f, mean_fy, mean_norm }
    }

    /// E[f(y)·(x − y)] at a given x.
    pub fn lhs_at(&self, x: &[f64]) -> f64 {
        dot(&self.mean_f, x) - self.mean_fy
    }
}

/// max_{x∈C} E[f(y)·(x − y)] − δ E‖f(y)‖.
pub fn mixed_certificate(domain: &ConvexDomain, moments: &Moments, delta: f64, tolerance: f64) -> OutgoingCertificate {
    let allowance = delta * moments.mean_norm;
    let worst = domain.support(&moments.mean_f) - moments.mean_fy;
    OutgoingCertificate::new(worst - allowance, allowance, tolerance, Verification::ExactSupport)
}

/// The same maximum restricted to a uniform verification grid.
pub fn mixed_certificate_on_grid(grid: &Grid, moments: &Moments, delta: f64, tolerance: f64) -> OutgoingCertificate {
    let allowance = delta * moments.mean_norm;
    let worst = grid.points().iter().map(|x| moments.lhs_at(x)).fold(f64::NEG_INFINITY, f64::max);
    let res = grid.resolution().unwrap_or(0);
    OutgoingCertificate::new(worst - allowance, allowance, tolerance, Verification::Grid { resolution: res })
}
