//! Outgoing distributions on a grid via a finite zero-sum game.

use serde::{Deserialize, Serialize};

use super::caratheodory::caratheodory_reduce;
use super::certificate::{mixed_certificate, Moments, OutgoingCertificate};
use crate::error::{Error, Result};
use crate::grid::{Grid, MAX_AUX_GRID};
use crate::mixed::MixedForecast;
use crate::point::{dot, norm};

/// Which maximizer points enter the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaximizerSet {
    /// The vertices of C. The payoff is linear in the maximizer's point, so this
    /// is the same as maximizing over all of C.
    #[default]
    Vertices,
    /// A uniform δ₁-grid with δ₁ = δ − δ₀, together with the vertices.
    DeltaOneGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxOptions {
    pub tolerance: f64,
    pub maximizer: MaximizerSet,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        MinimaxOptions { tolerance: 1e-8, maximizer: MaximizerSet::Vertices }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxSolution {
    pub forecast: MixedForecast,
    /// Grid indices of the support, parallel to `weights`.
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub certificate: OutgoingCertificate,
    /// Game value: max_b E[f(y)·(b − y)] − δ₀E‖f(y)‖ for the unreduced solution.
    pub game_value: f64,
    pub maximizer_points: usize,
    pub support_before_reduction: usize,
    pub reduction_degenerate: bool,
}

/// Finds η on the grid with E[f(y)·(x − y)] ≤ δ E‖f(y)‖ for all x ∈ C, with
/// support of at most m+3 points.
///
/// The minimizer picks y ∈ D and the maximizer b ∈ B with payoff
/// f(y)·(b − y) − δ₀‖f(y)‖. Any mixed maximizer strategy has a mean x̄ ∈ C
/// with a grid point within δ₀, so the game value is at most zero.
pub fn outgoing_minimax(grid: &Grid, values: &[Vec<f64>], delta: f64, opts: &MinimaxOptions) -> Result<MinimaxSolution> {
    let domain = grid.domain();
    let m = domain.dim();
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
    }
    for v in values {
        Error::check_dim(m, v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
    }
    let delta0 = grid.covering_radius();
    if !(delta >= delta0) || !delta.is_finite() {
        return Err(Error::invalid(format!("δ = {delta} is below the grid covering radius {delta0}")));
    }
    if values.iter().all(|v| v.iter().all(|x| *x == 0.0)) {
        return point_mass(grid, values, delta, opts.tolerance);
    }

    let mut b_points = domain.vertices()?.into_iter().map(|p| p.into_inner()).collect::<Vec<_>>();
    if opts.maximizer == MaximizerSet::DeltaOneGrid {
        let delta1 = delta - delta0;
        if delta1 > 0.0 {
            let res = Grid::resolution_for_radius(domain, delta1)?;
            match Grid::uniform(domain, res) {
                Ok(g) if g.len() <= MAX_AUX_GRID => b_points.extend(g.points().iter().map(|p| p.to_vec())),
                _ => log::debug!("δ₁-grid too large; vertices alone bound the maximum"),
            }
        }
    }
    let rows = b_points.len();
    let cols = grid.len();
    let mut payoff = vec![0.0; rows * cols];
    for (c, (y, fy)) in grid.points().iter().zip(values).enumerate() {
        let fy_y = dot(fy, y);
        let pen = delta0 * norm(fy);
        for (r, b) in b_points.iter().enumerate() {
            payoff[r * cols + c] = dot(fy, b) - fy_y - pen;
        }
    }
    let sol = crate::lp::solve_column_player(&payoff, rows, cols)?;
    let scale = payoff.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if sol.value > 1e-9 * scale.max(1.0) {
        return Err(Error::MinimaxInfeasible {
            value: sol.value,
            diagnostics: format!(
                "grid of {cols} points, covering radius {delta0:.6e}, δ = {delta:.6e}, {rows} maximizer points, {} pivots",
                sol.pivots
            ),
        });
    }
    let support: Vec<usize> = (0..cols).filter(|&c| sol.strategy[c] > 0.0).collect();
    let features: Vec<Vec<f64>> = support
        .iter()
        .map(|&c| {
            let fy = &values[c];
            let mut v = fy.clone();
            v.push(dot(fy, &grid.points()[c]));
            v.push(norm(fy));
            v
        })
        .collect();
    let w: Vec<f64> = support.iter().map(|&c| sol.strategy[c]).collect();
    let red = caratheodory_reduce(&features, &w)?;
    let indices: Vec<usize> = red.indices.iter().map(|&i| support[i]).collect();
    build(grid, values, delta, opts.tolerance, indices, red.weights, sol.value, rows, support.len(), red.degenerate)
}

#[allow(clippy::too_many_arguments)]
fn build(
    grid: &Grid,
    values: &[Vec<f64>],
    delta: f64,
    tolerance: f64,
    indices: Vec<usize>,
    weights: Vec<f64>,
    game_value: f64,
    maximizer_points: usize,
    support_before_reduction: usize,
    reduction_degenerate: bool,
) -> Result<MinimaxSolution> {
    let domain = grid.domain();
    let moments = Moments::of(
        indices.iter().zip(&weights).map(|(&i, &p)| (grid.points()[i].coords(), values[i].as_slice(), p)),
        domain.dim(),
    );
    let certificate = mixed_certificate(domain, &moments, delta, tolerance);
    let forecast = MixedForecast::new(
        indices.iter().zip(&weights).map(|(&i, &p)| (grid.points()[i].clone(), p)).collect(),
        None,
    )?;
    Ok(MinimaxSolution {
        forecast,
        indices,
        weights,
        certificate,
        game_value,
        maximizer_points,
        support_before_reduction,
        reduction_degenerate,
    })
}

fn point_mass(grid: &Grid, values: &[Vec<f64>], delta: f64, tolerance: f64) -> Result<MinimaxSolution> {
    build(grid, values, delta, tolerance, vec![0], vec![1.0], 0.0, 0, 1, false)
}
