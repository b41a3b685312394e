use super::density::{Intensity, JumpDensitySpec};
use crate::error::{Error, Result};

/// Default small-jump cutoff used when simulating infinite-activity models.
pub const DEFAULT_SMALL_JUMP_EPSILON: f64 = 1e-3;

/// Form of the characteristic exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// `-u'Su/2 + i<u,alpha> + int (e^{i<u,x>} - 1 - i<u,x>) nu(dx)`
    Compensated,
    /// `i<u,alpha> + int (e^{i<u,x>} - 1) nu(dx)`, finite activity only.
    Uncompensated,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Compensated => "compensated",
            Representation::Uncompensated => "uncompensated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "compensated" => Ok(Representation::Compensated),
            "uncompensated" => Ok(Representation::Uncompensated),
            other => Err(Error::Parse(format!("unknown representation '{other}'"))),
        }
    }
}

/// Bivariate Levy triplet with a jump measure on the positive quadrant.
#[derive(Debug, Clone)]
pub struct LevyModelSpec {
    pub sigma: [[f64; 2]; 2],
    pub jumps: JumpDensitySpec,
    pub alpha: [f64; 2],
    pub representation: Representation,
    /// Cutoff below which jumps are replaced by a Gaussian when simulating.
    pub small_jump_epsilon: Option<f64>,
}

impl LevyModelSpec {
    pub fn new(
        sigma: [[f64; 2]; 2],
        jumps: JumpDensitySpec,
        alpha: [f64; 2],
        representation: Representation,
    ) -> Result<Self> {
        let eps = match jumps.intensity() {
            Intensity::Infinite => Some(DEFAULT_SMALL_JUMP_EPSILON),
            Intensity::Finite(_) => None,
        };
        let m = LevyModelSpec {
            sigma,
            jumps,
            alpha,
            representation,
            small_jump_epsilon: eps,
        };
        m.validate()?;
        Ok(m)
    }

    /// Compound Poisson model in the uncompensated form with zero drift.
    pub fn cpp(jumps: JumpDensitySpec) -> Result<Self> {
        Self::new([[0.0; 2]; 2], jumps, [0.0; 2], Representation::Uncompensated)
    }

    /// Compensated model with diffusion `sigma` and zero drift.
    pub fn compensated(sigma: [[f64; 2]; 2], jumps: JumpDensitySpec) -> Result<Self> {
        Self::new(sigma, jumps, [0.0; 2], Representation::Compensated)
    }

    /// Brownian motion with covariance `sigma` and no jumps.
    pub fn gaussian(sigma: [[f64; 2]; 2]) -> Result<Self> {
        Self::compensated(sigma, JumpDensitySpec::point_masses(vec![])?.with_label("none"))
    }

    pub fn with_epsilon(mut self, eps: Option<f64>) -> Result<Self> {
        self.small_jump_epsilon = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: [f64; 2]) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn intensity(&self) -> Intensity {
        self.jumps.intensity()
    }

    pub fn label(&self) -> String {
        format!("{} [{}]", self.jumps.label, self.representation.name())
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.sigma;
        let finite = s.iter().flatten().chain(self.alpha.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("sigma and alpha must be finite".into()));
        }
        if (s[0][1] - s[1][0]).abs() > 1e-14 * (1.0 + s[0][1].abs()) {
            return Err(Error::InvalidParameter("sigma must be symmetric".into()));
        }
        if s[0][0] < 0.0 || s[1][1] < 0.0 || s[0][0] * s[1][1] - s[0][1] * s[1][0] < -1e-14 {
            return Err(Error::InvalidParameter("sigma must be positive semidefinite".into()));
        }
        if self.representation == Representation::Uncompensated {
            if self.intensity() == Intensity::Infinite {
                return Err(Error::InvalidParameter(
                    "the uncompensated form needs a finite-activity jump measure".into(),
                ));
            }
            if s.iter().flatten().any(|&v| v != 0.0) {
                return Err(Error::InvalidParameter(
                    "the uncompensated form has no Brownian part".into(),
                ));
            }
        }
        if let Some(e) = self.small_jump_epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "small-jump cutoff must be >= 0, got {e}"
                )));
            }
        }
        Ok(())
    }
}
