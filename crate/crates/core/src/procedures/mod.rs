//! Forecasting procedures: FP (deterministic), MM (stochastic), AD (almost
//! deterministic) and the one-dimensional binary procedure.

mod engine;
mod run;

pub use engine::{Announcement, EngineKind, ForecastEngine, StepDiagnostics, FP_FALLBACK_FACTOR};
pub use run::{checkpoints, run, RunAborted, RunOptions, RunRecord, StepRecord};

use serde::{Deserialize, Serialize};

use crate::binning::BinningSpec;
use crate::domain::ConvexDomain;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hedging::MaximizerSet;

/// Procedure configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcedureSpec {
    /// Outgoing fixed point of φ_{t−1}(c) = Σ w_i(c) g_{t−1}(w_i) for a continuous binning.
    Fp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        binning: Option<BinningSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
    },
    /// Outgoing minimax distribution of the grid errors with slack ε.
    Mm {
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
        #[serde(default)]
        maximizer: MaximizerSet,
    },
    /// ε-local distribution from the tent-interpolated grid errors.
    Ad {
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
    /// Forecasts on {0, 1/n, …, 1} mixing at most two adjacent points.
    Binary { n: usize },
}

impl ProcedureSpec {
    pub fn kind(&self) -> EngineKind {
        match self {
            ProcedureSpec::Fp { .. } => EngineKind::Fp,
            ProcedureSpec::Mm { .. } => EngineKind::Mm,
            ProcedureSpec::Ad { .. } => EngineKind::Ad,
            ProcedureSpec::Binary { .. } => EngineKind::Binary,
        }
    }

    /// FP binning, defaulting to normalized tents on a 21-point grid for [0,1]
    /// and a resolution-4 grid elsewhere.
    pub fn fp_binning(binning: &Option<BinningSpec>, domain: &ConvexDomain) -> BinningSpec {
        binning.clone().unwrap_or(BinningSpec::Tent {
            resolution: if *domain == ConvexDomain::Interval01 { 20 } else { 4 },
            width: None,
        })
    }

    pub fn validate(&self, domain: &ConvexDomain) -> Result<()> {
        match self {
            ProcedureSpec::Fp { binning, tolerance } => {
                if let Some(t) = tolerance {
                    if !(*t > 0.0 && t.is_finite()) {
                        return Err(Error::Config(format!("tolerance must be positive, got {t}")));
                    }
                }
                let b = ProcedureSpec::fp_binning(binning, domain).build(domain)?;
                if !b.is_continuous() {
                    return Err(Error::Config("the FP procedure needs a continuous binning".into()));
                }
            }
            ProcedureSpec::Mm { epsilon, resolution, .. } | ProcedureSpec::Ad { epsilon, resolution } => {
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
                }
                let g = Grid::uniform(domain, grid_resolution(domain, *epsilon, *resolution)?)?;
                let ok = match self.kind() {
                    EngineKind::Ad => g.covering_radius() < *epsilon,
                    _ => g.covering_radius() <= *epsilon,
                };
                if !ok {
                    return Err(Error::Config(format!(
                        "grid covering radius {} is too large for epsilon {epsilon}",
                        g.covering_radius()
                    )));
                }
            }
            ProcedureSpec::Binary { n } => {
                if *domain != ConvexDomain::Interval01 {
                    return Err(Error::Config("the binary procedure runs on the interval [0,1]".into()));
                }
                if *n == 0 {
                    return Err(Error::Config("the binary grid needs n ≥ 1".into()));
                }
            }
        }
        Ok(())
    }
}

/// Grid resolution for the MM and AD procedures: the smallest one whose
/// spacing is at most ε and whose covering radius is below ε, unless given.
pub fn grid_resolution(domain: &ConvexDomain, epsilon: f64, resolution: Option<usize>) -> Result<usize> {
    if let Some(r) = resolution {
        return Ok(r);
    }
    let base = Grid::uniform(domain, 1)?.spacing();
    let by_spacing = ((base / epsilon) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok(by_spacing.max(Grid::resolution_for_radius(domain, epsilon)?))
}
