//! Experiment configuration files.

use serde::{Deserialize, Serialize};

use crate::adversaries::{AdversarySpec, InfoMode};
use crate::binning::BinningSpec;
use crate::domain::ConvexDomain;
use crate::dynamics::{DynamicsOptions, GameSpec};
use crate::error::{Error, Result};
use crate::history::Retention;
use crate::procedures::{EngineKind, ProcedureSpec, RunOptions};

/// Which runner a configuration is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    RunBinary,
    RunForecast,
    RunDynamics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RunBinary => "run-binary",
            Command::RunForecast => "run-forecast",
            Command::RunDynamics => "run-dynamics",
        }
    }
}

/// Procedure against adversary on a forecast domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    pub procedure: ProcedureSpec,
    pub adversary: AdversarySpec,
    #[serde(default = "ConvexDomain::interval")]
    pub domain: ConvexDomain,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<u64>,
    #[serde(default)]
    pub retention: Retention,
}

/// A demo name or an explicit game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameRef {
    Demo(String),
    Spec(GameSpec),
}

impl GameRef {
    pub fn resolve(&self) -> Result<GameSpec> {
        match self {
            GameRef::Demo(name) => GameSpec::demo(name).map_err(|e| Error::Config(e.to_string())),
            GameRef::Spec(g) => Ok(g.clone()),
        }
    }
}

/// Calibrated learning dynamics on a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub game: GameRef,
    pub epsilon: f64,
    /// Must be an FP procedure when given; its binning lives on the profile space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure: Option<ProcedureSpec>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<u64>,
    #[serde(default)]
    pub retention: Retention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Config {
    Forecast(ForecastConfig),
    Dynamics(DynamicsConfig),
}

impl Config {
    /// Parses and validates a configuration for `command`.
    pub fn parse(text: &str, command: Command, allow_leak_break: bool) -> Result<Config> {
        let cfg = match command {
            Command::RunDynamics => Config::Dynamics(serde_json::from_str(text).map_err(config_err)?),
            _ => Config::Forecast(serde_json::from_str(text).map_err(config_err)?),
        };
        cfg.validate(command, allow_leak_break)?;
        Ok(cfg)
    }

    pub fn seeds(&self) -> &[u64] {
        match self {
            Config::Forecast(c) => &c.seeds,
            Config::Dynamics(c) => &c.seeds,
        }
    }

    pub fn horizon(&self) -> u64 {
        match self {
            Config::Forecast(c) => c.horizon,
            Config::Dynamics(c) => c.horizon,
        }
    }

    pub fn validate(&self, command: Command, allow_leak_break: bool) -> Result<()> {
        if self.horizon() == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.seeds().is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seen = self.seeds().to_vec();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        match self {
            Config::Forecast(c) => {
                let kind = c.procedure.kind();
                match (command, kind) {
                    (Command::RunBinary, EngineKind::Binary) => {}
                    (Command::RunBinary, _) => {
                        return Err(Error::Config("run-binary needs a procedure of kind \"binary\"".into()))
                    }
                    (Command::RunForecast, EngineKind::Binary) => {
                        return Err(Error::Config("use run-binary for the binary procedure".into()))
                    }
                    _ => {}
                }
                c.procedure.validate(&c.domain).map_err(config_err)?;
                crate::adversaries::Adversary::new(&c.adversary, &c.domain, 0).map_err(config_err)?;
                if kind != EngineKind::Fp && c.adversary.mode() == InfoMode::RealizationLeak && !allow_leak_break {
                    return Err(Error::Config(format!(
                        "the {} adversary sees the realized forecast, which breaks the {:?} procedure's \
                         guarantee; pass --allow-leak-break to run it anyway",
                        c.adversary.name(),
                        format!("{kind:?}").to_uppercase()
                    )));
                }
            }
            Config::Dynamics(c) => {
                let game = c.game.resolve()?;
                if !(c.epsilon > 0.0 && c.epsilon.is_finite()) {
                    return Err(Error::Config(format!("epsilon must be positive, got {}", c.epsilon)));
                }
                let opts = c.options(0)?;
                opts.procedure().validate(&game.domain()).map_err(config_err)?;
            }
        }
        Ok(())
    }
}

impl ForecastConfig {
    pub fn run_options(&self, seed: u64) -> RunOptions {
        RunOptions { horizon: self.horizon, seed, checkpoints: self.checkpoints.clone(), retention: self.retention }
    }
}

impl DynamicsConfig {
    pub fn options(&self, seed: u64) -> Result<DynamicsOptions> {
        let (binning, tolerance) = match &self.procedure {
            None => (None, None),
            Some(ProcedureSpec::Fp { binning, tolerance }) => (binning.clone(), *tolerance),
            Some(_) => return Err(Error::Config("dynamics forecasts come from an FP procedure".into())),
        };
        let mut o = DynamicsOptions::new(self.epsilon, self.horizon, seed);
        o.binning = binning.or(Some(BinningSpec::Tent { resolution: 4, width: None }));
        o.tolerance = tolerance;
        o.checkpoints = self.checkpoints.clone();
        Ok(o)
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let ok = r#"{"procedure":{"kind":"fp"},"adversary":{"kind":"iid_bernoulli","p":0.3},"horizon":10,"seeds":[0]}"#;
        Config::parse(ok, Command::RunForecast, false).unwrap();
        let bad = r#"{"procedure":{"kind":"fp"},"adversary":{"kind":"iid_bernoulli","p":0.3},"horizon":10,"seeds":[0],"extra":1}"#;
        assert!(matches!(Config::parse(bad, Command::RunForecast, false), Err(Error::Config(_))));
    }

    #[test]
    fn leak_rule() {
        let text = r#"{"procedure":{"kind":"binary","n":10},"adversary":{"kind":"threshold_leaky","threshold":0.5},"horizon":10,"seeds":[0]}"#;
        assert!(matches!(Config::parse(text, Command::RunBinary, false), Err(Error::Config(_))));
        Config::parse(text, Command::RunBinary, true).unwrap();
        let fp = text.replace(r#"{"kind":"binary","n":10}"#, r#"{"kind":"fp"}"#);
        Config::parse(&fp, Command::RunForecast, false).unwrap();
        let dist = text.replace(r#""threshold":0.5"#, r#""threshold":0.5,"mode":"distribution_leak""#);
        Config::parse(&dist, Command::RunBinary, false).unwrap();
    }

    #[test]
    fn command_must_match_procedure() {
        let text = r#"{"procedure":{"kind":"binary","n":10},"adversary":{"kind":"anti_gap"},"horizon":10,"seeds":[0]}"#;
        assert!(Config::parse(text, Command::RunForecast, false).is_err());
        let mm = text.replace(r#""kind":"binary","n":10"#, r#""kind":"mm","epsilon":0.1"#);
        assert!(Config::parse(&mm, Command::RunBinary, false).is_err());
    }

    #[test]
    fn dynamics_config() {
        let text = r#"{"game":"matching_pennies","epsilon":0.05,"horizon":100,"seeds":[1,2]}"#;
        let c = Config::parse(text, Command::RunDynamics, false).unwrap();
        assert_eq!(c.seeds(), &[1, 2]);
        let bad = r#"{"game":"nope","epsilon":0.05,"horizon":100,"seeds":[1]}"#;
        assert!(matches!(Config::parse(bad, Command::RunDynamics, false), Err(Error::Config(_))));
        let mm = r#"{"game":"coordination","epsilon":0.05,"horizon":100,"seeds":[1],"procedure":{"kind":"mm","epsilon":0.1}}"#;
        assert!(Config::parse(mm, Command::RunDynamics, false).is_err());
        let dup = r#"{"game":"coordination","epsilon":0.05,"horizon":100,"seeds":[1,1]}"#;
        assert!(Config::parse(dup, Command::RunDynamics, false).is_err());
    }
}
