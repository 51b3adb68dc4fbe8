//! Continuous ε-best replies.

use super::game::GameSpec;
use crate::error::{Error, Result};

/// Player i's logit response, built from uⁱ alone.
#[derive(Debug, Clone, PartialEq)]
struct PlayerResponse {
    player: usize,
    /// Player i's own payoffs on [0,1], on the full game shape.
    own: GameSpec,
    tau: f64,
}

/// βⁱ(x) ∝ exp(uⁱ(·, x⁻ⁱ)/τ) on payoffs normalized to [0, 1], with
/// τ = ε / max_i ln mⁱ. The Gibbs distribution loses at most τ ln mⁱ ≤ ε
/// against a best reply.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxResponse {
    players: Vec<PlayerResponse>,
    offsets: Vec<usize>,
    strategies: Vec<usize>,
    epsilon: f64,
    tau: f64,
}

pub fn softmax_response(game: &GameSpec, epsilon: f64) -> Result<SoftmaxResponse> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let max_log = game.strategies().iter().map(|&m| (m as f64).ln()).fold(0.0, f64::max);
    let tau = if max_log > 0.0 { epsilon / max_log } else { epsilon };
    let norm = game.normalized();
    let players = (0..game.players())
        .map(|i| {
            // every other player's payoffs are zeroed: the response cannot read them
            let payoffs = (0..game.players())
                .map(|j| if j == i { norm.payoffs(i).to_vec() } else { vec![0.0; norm.profiles()] })
                .collect();
            let own = GameSpec::new(game.strategies().to_vec(), payoffs).expect("shape copied from a valid game");
            PlayerResponse { player: i, own, tau }
        })
        .collect();
    Ok(SoftmaxResponse { players, offsets: game.offsets(), strategies: game.strategies().to_vec(), epsilon, tau })
}

impl SoftmaxResponse {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.strategies.iter().sum()
    }

    /// β(x) for a mixed profile x.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for p in &self.players {
            let o = self.offsets[p.player];
            let block = &mut out[o..o + self.strategies[p.player]];
            p.own.payoffs_against_into(p.player, x, block);
            let top = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in block.iter_mut() {
                *v = ((*v - top) / p.tau).exp();
                z += *v;
            }
            block.iter_mut().for_each(|v| *v /= z);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_profile(strategies: &[usize], seed: &[f64]) -> Vec<f64> {
        let mut x = Vec::new();
        let mut k = 0;
        for &m in strategies {
            let raw: Vec<f64> = (0..m).map(|_| {
                k += 1;
                seed[k % seed.len()] + 1e-3
            }).collect();
            let s: f64 = raw.iter().sum();
            x.extend(raw.iter().map(|v| v / s));
        }
        x
    }

    #[test]
    fn dominant_strategy_concentrates() {
        let g = GameSpec::demo("prisoners_dilemma").unwrap();
        let b = softmax_response(&g, 1e-3).unwrap();
        let y = b.eval(&[0.5, 0.5, 0.5, 0.5]);
        assert!(y[1] > 1.0 - 1e-12 && y[3] > 1.0 - 1e-12);
    }

    #[test]
    fn equal_payoffs_split_evenly() {
        let g = GameSpec::demo("matching_pennies").unwrap();
        let b = softmax_response(&g, 0.05).unwrap();
        assert_eq!(b.eval(&[0.5, 0.5, 0.5, 0.5]), vec![0.5; 4]);
        let g = GameSpec::new(vec![2], vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(softmax_response(&g, 0.1).unwrap().eval(&[0.9, 0.1]), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let g = GameSpec::demo("matching_pennies").unwrap();
        assert!(softmax_response(&g, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn epsilon_best_reply(which in 0usize..5, eps in 0.01f64..0.5, seed in prop::collection::vec(0.0f64..1.0, 16)) {
            let g = GameSpec::demo(GameSpec::DEMOS[which]).unwrap();
            let norm = g.normalized();
            let b = softmax_response(&g, eps).unwrap();
            let x = random_profile(g.strategies(), &seed);
            let y = b.eval(&x);
            let offsets = g.offsets();
            for i in 0..g.players() {
                let mut z = x.clone();
                let m = g.strategies()[i];
                z[offsets[i]..offsets[i] + m].copy_from_slice(&y[offsets[i]..offsets[i] + m]);
                let v = norm.payoffs_against(i, &x);
                let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(norm.expected_payoff(i, &z).unwrap() >= best - eps - 1e-9);
            }
        }
    }
}
