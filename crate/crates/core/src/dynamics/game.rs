//! Finite normal-form games.

use serde::{Deserialize, Serialize};

use crate::domain::ConvexDomain;
use crate::error::{Error, Result};

/// A finite game. `payoffs[i]` holds player i's payoff for every pure profile,
/// flattened row-major in player order: profile (a₀, …, a_{n−1}) sits at
/// ((a₀·m₁ + a₁)·m₂ + a₂)… .
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "GameRepr")]
pub struct GameSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    strategies: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GameRepr {
    #[serde(default)]
    name: Option<String>,
    strategies: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
}

impl TryFrom<GameRepr> for GameSpec {
    type Error = Error;
    fn try_from(r: GameRepr) -> Result<Self> {
        let mut g = GameSpec::new(r.strategies, r.payoffs)?;
        g.name = r.name;
        Ok(g)
    }
}

impl GameSpec {
    pub fn new(strategies: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if strategies.is_empty() || strategies.contains(&0) {
            return Err(Error::invalid("every player needs at least one strategy"));
        }
        if payoffs.len() != strategies.len() {
            return Err(Error::invalid(format!("{} players but {} payoff arrays", strategies.len(), payoffs.len())));
        }
        let profiles = strategies.iter().try_fold(1usize, |a, &m| a.checked_mul(m));
        let Some(profiles) = profiles.filter(|&p| p <= 1 << 22) else {
            return Err(Error::invalid("game too large"));
        };
        for (i, u) in payoffs.iter().enumerate() {
            if u.len() != profiles {
                return Err(Error::invalid(format!("player {i}: {} payoffs for {profiles} profiles", u.len())));
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("payoffs"));
            }
        }
        Ok(GameSpec { name: None, strategies, payoffs })
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    /// Two-player game from row-major bimatrices.
    pub fn bimatrix(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Result<Self> {
        GameSpec::new(vec![rows, cols], vec![a.to_vec(), b.to_vec()])
    }

    pub fn players(&self) -> usize {
        self.strategies.len()
    }

    pub fn strategies(&self) -> &[usize] {
        &self.strategies
    }

    pub fn payoffs(&self, i: usize) -> &[f64] {
        &self.payoffs[i]
    }

    pub fn profiles(&self) -> usize {
        self.payoffs[0].len()
    }

    /// Total number of pure strategies, the dimension of the mixed-profile space.
    pub fn dim(&self) -> usize {
        self.strategies.iter().sum()
    }

    pub fn domain(&self) -> ConvexDomain {
        ConvexDomain::ProductOfSimplices { sizes: self.strategies.clone() }
    }

    /// Offsets of each player's block inside a mixed profile.
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.players());
        let mut acc = 0;
        for &m in &self.strategies {
            o.push(acc);
            acc += m;
        }
        o
    }

    pub fn payoff_range(&self, i: usize) -> (f64, f64) {
        let u = &self.payoffs[i];
        (u.iter().copied().fold(f64::INFINITY, f64::min), u.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Payoffs rescaled to [0, 1] per player (constant payoffs become 0).
    pub fn normalized(&self) -> GameSpec {
        let payoffs = (0..self.players())
            .map(|i| {
                let (lo, hi) = self.payoff_range(i);
                let span = hi - lo;
                self.payoffs[i].iter().map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 }).collect()
            })
            .collect();
        GameSpec { name: self.name.clone(), strategies: self.strategies.clone(), payoffs }
    }

    fn check_profile(&self, x: &[f64]) -> Result<()> {
        Error::check_dim(self.dim(), x.len())
    }

    /// uⁱ(s, x⁻ⁱ) for every pure strategy s of player i.
    pub fn payoffs_against(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.strategies[i]];
        self.payoffs_against_into(i, x, &mut out);
        out
    }

    pub fn payoffs_against_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let offsets = self.offsets();
        let n = self.players();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut idx = vec![0usize; n];
        for &u in &self.payoffs[i] {
            let mut w = 1.0;
            for j in 0..n {
                if j != i {
                    w *= x[offsets[j] + idx[j]];
                }
            }
            if w != 0.0 {
                out[idx[i]] += w * u;
            }
            // advance the odometer, last player fastest
            for j in (0..n).rev() {
                idx[j] += 1;
                if idx[j] < self.strategies[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    /// uⁱ(x).
    pub fn expected_payoff(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_profile(x)?;
        let o = self.offsets()[i];
        let v = self.payoffs_against(i, x);
        Ok(v.iter().zip(&x[o..o + self.strategies[i]]).map(|(a, b)| a * b).sum())
    }

    /// max_s uⁱ(s, x⁻ⁱ) − uⁱ(x) per player.
    pub fn best_reply_gaps(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_profile(x)?;
        let offsets = self.offsets();
        Ok((0..self.players())
            .map(|i| {
                let v = self.payoffs_against(i, x);
                let xi = &x[offsets[i]..offsets[i] + self.strategies[i]];
                let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let cur: f64 = v.iter().zip(xi).map(|(a, b)| a * b).sum();
                (best - cur).max(0.0)
            })
            .collect())
    }

    /// Largest best-reply improvement over players; x ∈ NE(ε) iff this is ≤ ε.
    pub fn ne_gap(&self, x: &[f64]) -> Result<f64> {
        Ok(self.best_reply_gaps(x)?.into_iter().fold(0.0, f64::max))
    }

    /// Mixed profile putting all weight on the given pure profile.
    pub fn pure_profile(&self, actions: &[usize]) -> Result<Vec<f64>> {
        Error::check_dim(self.players(), actions.len())?;
        let mut x = vec![0.0; self.dim()];
        for ((o, &a), &m) in self.offsets().iter().zip(actions).zip(&self.strategies) {
            if a >= m {
                return Err(Error::invalid(format!("action {a} out of range {m}")));
            }
            x[o + a] = 1.0;
        }
        Ok(x)
    }

    pub fn demo(name: &str) -> Result<GameSpec> {
        let g = match name {
            "matching_pennies" => GameSpec::bimatrix(2, 2, &[1.0, -1.0, -1.0, 1.0], &[-1.0, 1.0, 1.0, -1.0])?,
            // strategies (cooperate, defect)
            "prisoners_dilemma" => GameSpec::bimatrix(2, 2, &[3.0, 0.0, 5.0, 1.0], &[3.0, 5.0, 0.0, 1.0])?,
            "coordination" => GameSpec::bimatrix(2, 2, &[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.0])?,
            "rock_paper_scissors" => {
                let a = [0.0, -1.0, 1.0, 1.0, 0.0, -1.0, -1.0, 1.0, 0.0];
                let b: Vec<f64> = a.iter().map(|v| -v).collect();
                GameSpec::bimatrix(3, 3, &a, &b)?
            }
            "shapley" => GameSpec::bimatrix(
                3,
                3,
                &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            )?,
            other => return Err(Error::invalid(format!("unknown demo game {other:?}"))),
        };
        Ok(g.named(name))
    }

    pub const DEMOS: [&'static str; 5] = ["matching_pennies", "prisoners_dilemma", "coordination", "rock_paper_scissors", "shapley"];
}
