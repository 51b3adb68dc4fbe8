//! Dense simplex method for finite zero-sum games.

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;
/// Non-improving pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    /// Mixed strategy of the minimizing (column) player.
    pub strategy: Vec<f64>,
    /// max_r (M·strategy)_r, evaluated directly from the matrix.
    pub value: f64,
    pub pivots: usize,
}

/// Optimal strategy of the column player for `min_η max_r (M η)_r`, with `m`
/// row-major `rows × cols`.
///
/// Entries are shifted to be at least 1, so the problem becomes
/// `max Σz s.t. M'z ≤ 1, z ≥ 0`: the origin is feasible and no phase I is
/// needed. Then `η = z/Σz` and `value = 1/Σz − shift`.
pub fn solve_column_player(m: &[f64], rows: usize, cols: usize) -> Result<GameSolution> {
    if rows == 0 || cols == 0 || m.len() != rows * cols {
        return Err(Error::invalid("game matrix shape"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("game matrix"));
    }
    let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= EPS * (1.0 + hi.abs()) {
        // constant game: every strategy is optimal
        let mut strategy = vec![0.0; cols];
        strategy[0] = 1.0;
        return Ok(GameSolution { strategy, value: hi, pivots: 0 });
    }
    // scale to unit range for conditioning, then shift to [1, 2]
    let range = hi - lo;
    let width = cols + rows + 1;
    let mut tab = vec![0.0; (rows + 1) * width];
    for r in 0..rows {
        for c in 0..cols {
            tab[r * width + c] = (m[r * cols + c] - lo) / range + 1.0;
        }
        tab[r * width + cols + r] = 1.0;
        tab[r * width + width - 1] = 1.0;
    }
    let obj = rows * width;
    for c in 0..cols {
        tab[obj + c] = -1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    let mut pivots = 0;
    let mut stall = 0;
    let mut best_obj = 0.0;
    loop {
        let bland = stall >= STALL_LIMIT;
        let entering = if bland {
            (0..cols + rows).find(|&j| tab[obj + j] < -EPS)
        } else {
            let mut e = None;
            let mut most = -EPS;
            for j in 0..cols + rows {
                if tab[obj + j] < most {
                    most = tab[obj + j];
                    e = Some(j);
                }
            }
            e
        };
        let Some(e) = entering else { break };
        let mut leave: Option<usize> = None;
        let mut ratio = f64::INFINITY;
        for r in 0..rows {
            let a = tab[r * width + e];
            if a > EPS {
                let q = tab[r * width + width - 1] / a;
                let better = q < ratio - EPS
                    || ((q - ratio).abs() <= EPS && leave.is_some_and(|l| basis[r] < basis[l]));
                if leave.is_none() || better {
                    ratio = q;
                    leave = Some(r);
                }
            }
        }
        // bounded because every column of M' is positive
        let l = leave.ok_or_else(|| Error::contract("unbounded game program"))?;
        pivot(&mut tab, rows + 1, width, l, e);
        basis[l] = e;
        pivots += 1;
        let objective = tab[obj + width - 1];
        if objective > best_obj + EPS {
            best_obj = objective;
            stall = 0;
        } else {
            stall += 1;
        }
        if pivots > MAX_PIVOTS {
            return Err(Error::SolverFailure {
                message: "simplex pivot limit reached".into(),
                best: Vec::new(),
                violation: f64::NAN,
            });
        }
    }
    let mut z = vec![0.0; cols];
    for (r, &b) in basis.iter().enumerate() {
        if b < cols {
            z[b] = tab[r * width + width - 1].max(0.0);
        }
    }
    let total: f64 = z.iter().sum();
    if !(total > 0.0) {
        return Err(Error::contract("degenerate game program solution"));
    }
    let strategy: Vec<f64> = z.iter().map(|v| v / total).collect();
    let value = (0..rows)
        .map(|r| (0..cols).map(|c| m[r * cols + c] * strategy[c]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GameSolution { strategy, value, pivots })
}

fn pivot(tab: &mut [f64], nrows: usize, width: usize, r: usize, c: usize) {
    let d = tab[r * width + c];
    for k in 0..width {
        tab[r * width + k] /= d;
    }
    for i in 0..nrows {
        if i == r {
            continue;
        }
        let f = tab[i * width + c];
        if f != 0.0 {
            for k in 0..width {
                tab[i * width + k] -= f * tab[r * width + k];
            }
        }
    }
}
