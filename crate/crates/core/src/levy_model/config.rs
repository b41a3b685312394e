//! Text configuration for densities and models (TOML).

use serde::{Deserialize, Serialize};

use super::density::{make_density, DensityKind, DensityParams, JumpDensitySpec, PointMass};
use super::model::{LevyModelSpec, Representation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// `[x1, x2, weight]` triples for point masses.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<[f64; 3]>,
    #[serde(default, alias = "labels", skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl DensityConfig {
    pub fn build(&self) -> Result<JumpDensitySpec> {
        let params = DensityParams {
            beta: self.beta,
            lambda: self.lambda,
            points: self
                .points
                .iter()
                .map(|p| PointMass {
                    location: [p[0], p[1]],
                    weight: p[2],
                })
                .collect(),
            label: self.label.clone(),
        };
        make_density(&self.kind, &params)
    }

    pub fn from_spec(spec: &JumpDensitySpec) -> Result<Self> {
        let label = Some(spec.label.clone());
        Ok(match &spec.kind {
            DensityKind::BetaFamily { beta } => DensityConfig {
                kind: "beta_family".into(),
                beta: Some(*beta),
                lambda: (spec.scale != 1.0).then_some(spec.scale),
                points: vec![],
                label,
            },
            DensityKind::BetaTwo => DensityConfig {
                kind: "beta_two".into(),
                beta: None,
                lambda: (spec.scale != 1.0).then_some(spec.scale),
                points: vec![],
                label,
            },
            DensityKind::CppLog => DensityConfig {
                kind: "cpp_log_density".into(),
                beta: None,
                lambda: spec.intensity().finite(),
                points: vec![],
                label,
            },
            DensityKind::PointMasses(p) => DensityConfig {
                kind: "point_masses".into(),
                beta: None,
                lambda: None,
                points: p.iter().map(|q| [q.location[0], q.location[1], q.weight]).collect(),
                label,
            },
            DensityKind::Custom(_) => return Err(Error::Unsupported("custom densities cannot be serialized".into())),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub sigma: [[f64; 2]; 2],
    #[serde(default)]
    pub alpha: [f64; 2],
    pub representation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub density: DensityConfig,
}

impl ModelConfig {
    pub fn build(&self) -> Result<LevyModelSpec> {
        let jumps = self.density.build()?;
        let m = LevyModelSpec::new(
            self.sigma,
            jumps,
            self.alpha,
            Representation::parse(&self.representation)?,
        )?;
        match self.epsilon {
            Some(e) => m.with_epsilon(Some(e)),
            None => Ok(m),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_model(m: &LevyModelSpec) -> Result<Self> {
        Ok(ModelConfig {
            sigma: m.sigma,
            alpha: m.alpha,
            representation: m.representation.name().into(),
            epsilon: m.small_jump_epsilon,
            density: DensityConfig::from_spec(&m.jumps)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_round_trip() {
        let text = "kind = \"point_masses\"\npoints = [[1.0, 1.0, 0.5], [2.0, 0.5, 1.5]]\nlabel = \"two atoms\"\n";
        let cfg = DensityConfig::from_toml(text).unwrap();
        let spec = cfg.build().unwrap();
        assert_eq!(spec.intensity().finite(), Some(2.0));
        assert_eq!(spec.label, "two atoms");
        let back = DensityConfig::from_spec(&spec).unwrap();
        assert_eq!(back, cfg);
        let again = DensityConfig::from_toml(&back.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn labels_alias_and_unknown_keys() {
        let cfg = DensityConfig::from_toml("kind = \"beta_family\"\nbeta = 0.5\nlabels = \"nu\"\n").unwrap();
        assert_eq!(cfg.label.as_deref(), Some("nu"));
        assert!(DensityConfig::from_toml("kind = \"beta_family\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn model_round_trip() {
        let text = r#"
representation = "uncompensated"
[density]
kind = "cpp_log_density"
lambda = 1.0
"#;
        let cfg: ModelConfig = toml::from_str(text).unwrap();
        let m = cfg.build().unwrap();
        assert_eq!(m.intensity().finite(), Some(1.0));
        let back = ModelConfig::from_model(&m).unwrap();
        assert_eq!(back.build().unwrap().intensity().finite(), Some(1.0));
    }
}
