//! Experiment configuration (TOML).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_model::{LevyModelSpec, ModelConfig};
use crate::spectral::SpectralConfig;
use crate::Regime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `sup eta(a, b) |U(a, b) - N(a, b)|` over a log grid.
    EtaWeightedTailSup,
    /// `sup |C(u, v) - C_n(u, v)|` over a uniform ladder.
    CopulaSup,
}

/// Source of the characteristic function fed to the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// Empirical characteristic function of a simulated panel.
    #[default]
    Sample,
    /// Exact characteristic function; replications coincide.
    Exact,
}

fn one() -> f64 {
    1.0
}

fn default_grid() -> usize {
    256
}

fn default_x_max() -> f64 {
    10.0
}

fn default_ladder() -> usize {
    25
}

fn default_tail_points() -> usize {
    15
}

fn default_truth_tol() -> f64 {
    1e-8
}

fn default_bootstrap() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelConfig,
    pub n_ladder: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub regime: Regime,
    pub metric: Metric,
    #[serde(default)]
    pub input: InputKind,
    /// Multiplier `c_h` of the bandwidth rule.
    #[serde(default = "one")]
    pub h_mult: f64,
    /// Fixed bandwidth overriding the rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "one")]
    pub floor_mult: f64,
    #[serde(default = "one")]
    pub delta_mult: f64,
    /// Evaluation rectangle `[lo, hi]^2`; defaults by metric and regime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_rect: Option<[f64; 2]>,
    #[serde(default = "default_ladder")]
    pub ladder_points: usize,
    #[serde(default = "default_tail_points")]
    pub tail_points: usize,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_step: Option<f64>,
    #[serde(default = "default_truth_tol")]
    pub truth_tol: f64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Config with defaults for everything but the essentials.
    pub fn new(
        name: impl Into<String>,
        model: &LevyModelSpec,
        regime: Regime,
        metric: Metric,
        n_ladder: Vec<usize>,
        replications: usize,
        master_seed: u64,
    ) -> Result<Self> {
        Ok(ExperimentConfig {
            name: name.into(),
            model: ModelConfig::from_model(model)?,
            n_ladder,
            replications,
            master_seed,
            regime,
            metric,
            input: InputKind::Sample,
            h_mult: 1.0,
            bandwidth: None,
            grid_points: default_grid(),
            floor_mult: 1.0,
            delta_mult: 1.0,
            eval_rect: None,
            ladder_points: default_ladder(),
            tail_points: default_tail_points(),
            x_max: default_x_max(),
            x_step: None,
            truth_tol: default_truth_tol(),
            bootstrap: default_bootstrap(),
            workers: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ladder.is_empty() || self.n_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "n_ladder must be nonempty and increasing".into(),
            ));
        }
        if self.n_ladder[0] < 16 {
            return Err(Error::InvalidParameter("sample sizes must be at least 16".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        let positive = [
            self.h_mult,
            self.floor_mult,
            self.delta_mult,
            self.x_max,
            self.truth_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "multipliers, x_max and truth_tol must be positive".into(),
            ));
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
            }
        }
        let [lo, hi] = self.rect();
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidParameter(format!(
                "evaluation rectangle [{lo}, {hi}] is empty"
            )));
        }
        if self.metric == Metric::CopulaSup && self.regime == Regime::Cpp && hi >= 1.0 {
            return Err(Error::InvalidParameter("copula ladders must lie inside (0, 1)".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn rect(&self) -> [f64; 2] {
        self.eval_rect.unwrap_or(match (self.metric, self.regime) {
            (Metric::EtaWeightedTailSup, _) => [0.1, 5.0],
            (Metric::CopulaSup, Regime::General) => [0.5, 2.0],
            (Metric::CopulaSup, Regime::Cpp) => [0.2, 0.8],
        })
    }

    pub fn spectral(&self) -> SpectralConfig {
        SpectralConfig {
            grid_points: self.grid_points,
            x_max: self.x_max,
            x_step: self.x_step,
            delta_floor: None,
        }
    }

    pub fn build_model(&self) -> Result<LevyModelSpec> {
        self.model.build()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::JumpDensitySpec;

    #[test]
    fn toml_round_trip_and_defaults() {
        let m = LevyModelSpec::cpp(JumpDensitySpec::single_jump([1.0, 1.0], 1.0).unwrap()).unwrap();
        let cfg = ExperimentConfig::new("smoke", &m, Regime::Cpp, Metric::CopulaSup, vec![64, 128], 2, 7).unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(cfg.rect(), [0.2, 0.8]);
        let minimal = r#"
name = "m"
n_ladder = [100]
replications = 1
master_seed = 1
regime = "levy"
metric = "eta_weighted_tail_sup"

[model]
representation = "compensated"
[model.density]
kind = "beta_family"
beta = 0.5
"#;
        let c = ExperimentConfig::from_toml(minimal).unwrap();
        assert_eq!(c.regime, Regime::General);
        assert_eq!(c.grid_points, 256);
        assert_eq!(c.rect(), [0.1, 5.0]);
    }

    #[test]
    fn validation() {
        let m = LevyModelSpec::cpp(JumpDensitySpec::single_jump([1.0, 1.0], 1.0).unwrap()).unwrap();
        let mut cfg = ExperimentConfig::new("v", &m, Regime::Cpp, Metric::CopulaSup, vec![64, 32], 1, 7).unwrap();
        assert!(cfg.validate().is_err());
        cfg.n_ladder = vec![64];
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
        cfg.replications = 1;
        cfg.eval_rect = Some([0.2, 1.5]);
        assert!(cfg.validate().is_err());
    }
}
