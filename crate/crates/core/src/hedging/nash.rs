//! Nash equilibria as outgoing points of the payoff field.

use super::certificate::OutgoingCertificate;
use super::field::VectorField;
use super::fixed_point::{outgoing_fixed_point, FixedPointOptions, SolverStage};
use crate::dynamics::game::GameSpec;
use crate::error::Result;
use crate::point::Point;

/// fⁱ(x) = (uⁱ(s, x⁻ⁱ))_s. An outgoing point y has uⁱ(xⁱ, y⁻ⁱ) ≤ uⁱ(y) for
/// every player and xⁱ, so it is a Nash equilibrium.
struct PayoffField<'a> {
    game: &'a GameSpec,
    offsets: Vec<usize>,
}

impl VectorField for PayoffField<'_> {
    fn dim(&self) -> usize {
        self.game.dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, &o) in self.offsets.iter().enumerate() {
            let m = self.game.strategies()[i];
            self.game.payoffs_against_into(i, x, &mut out[o..o + m]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashSolution {
    /// Mixed strategy of each player.
    pub profile: Vec<Vec<f64>>,
    pub point: Point,
    pub gaps: Vec<f64>,
    /// Largest best-reply gap, measured directly from the payoffs.
    pub gap: f64,
    pub certificate: OutgoingCertificate,
    pub stage: SolverStage,
}

pub fn nash_via_outgoing(game: &GameSpec, tol: f64) -> Result<NashSolution> {
    let field = PayoffField { game, offsets: game.offsets() };
    let opts = FixedPointOptions { tolerance: Some(tol), ..Default::default() };
    let sol = outgoing_fixed_point(&field, &game.domain(), &opts)?;
    let gaps = game.best_reply_gaps(&sol.point)?;
    let gap = gaps.iter().copied().fold(0.0, f64::max);
    let profile = field
        .offsets
        .iter()
        .zip(game.strategies())
        .map(|(&o, &m)| sol.point[o..o + m].to_vec())
        .collect();
    Ok(NashSolution { profile, point: sol.point, gaps, gap, certificate: sol.certificate, stage: sol.stage })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prisoners_dilemma_defects() {
        let g = GameSpec::demo("prisoners_dilemma").unwrap();
        let s = nash_via_outgoing(&g, 1e-8).unwrap();
        assert!(s.gap <= 1e-8);
        assert!((s.profile[0][1] - 1.0).abs() < 1e-6 && (s.profile[1][1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matching_pennies_and_rps_uniform() {
        for (name, m) in [("matching_pennies", 2), ("rock_paper_scissors", 3)] {
            let g = GameSpec::demo(name).unwrap();
            let s = nash_via_outgoing(&g, 1e-8).unwrap();
            assert!(s.gap <= 1e-6, "{name}: {}", s.gap);
            for p in &s.profile {
                for v in p {
                    assert!((v - 1.0 / m as f64).abs() < 1e-4, "{name}: {:?}", s.profile);
                }
            }
        }
    }

    #[test]
    fn shapley_game_solved() {
        let g = GameSpec::demo("shapley").unwrap();
        let s = nash_via_outgoing(&g, 1e-8).unwrap();
        assert!(s.gap <= 1e-6);
    }
}
