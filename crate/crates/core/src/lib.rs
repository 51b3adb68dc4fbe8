//! Calibrated forecasting by forecast hedging.
//!
//! Deterministic forecasts come from outgoing fixed points of the accumulated
//! gap field, stochastic ones from outgoing minimax distributions on a grid.
//! The crate also scores the resulting track records and runs calibrated
//! learning dynamics on finite games.

pub mod adversaries;
pub mod binning;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod hedging;
pub mod history;
pub mod linalg;
pub mod lp;
pub mod mixed;
pub mod point;
pub mod procedures;
pub mod rng;
pub mod scores;

pub use binning::{Binning, BinningSpec, WeightFn};
pub use domain::{ConvexDomain, TOL_GEOM};
pub use error::{Error, Result};
pub use grid::Grid;
pub use history::{HistoryStats, Retention};
pub use mixed::{Locality, MixedForecast};
pub use point::Point;
