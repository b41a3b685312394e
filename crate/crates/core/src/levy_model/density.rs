//! Jump densities of the form `(x1^4 + x2^4)^-1 f(x)` on the positive
//! quadrant, point-mass measures, and user-supplied densities.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{integrate_radial, QuadOptions};

/// Radius below which the cutoff is identically one.
pub const CUTOFF_INNER: f64 = 0.5;
/// Radius beyond which the cutoff vanishes.
pub const CUTOFF_OUTER: f64 = 0.75;

/// Radius beyond which the exponentially decaying kinds are treated as zero.
pub(crate) const RADIAL_CUTOFF: f64 = 50.0;

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// C-infinity bump: 1 on `r <= 1/2`, 0 on `r >= 3/4`.
pub fn cutoff(r: f64) -> f64 {
    smooth_step((CUTOFF_OUTER - r) / (CUTOFF_OUTER - CUTOFF_INNER))
}

/// `1 / (cos^4 t + sin^4 t)`, the angular factor of the density in polar form.
pub fn angular_weight(theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    1.0 / (c.powi(4) + s.powi(4))
}

/// Integral of [`angular_weight`] over the quarter circle.
pub const ANGULAR_MASS: f64 = PI / SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub location: [f64; 2],
    pub weight: f64,
}

/// Total mass of the jump measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intensity {
    Finite(f64),
    Infinite,
}

impl Intensity {
    pub fn finite(self) -> Option<f64> {
        match self {
            Intensity::Finite(v) => Some(v),
            Intensity::Infinite => None,
        }
    }
}

type DensityFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Density `f` supplied by the caller; the jump measure is
/// `f(x) / (x1^4 + x2^4) dx`. Only finite-mass densities supported in a
/// ball of radius `support_radius` are accepted.
#[derive(Clone)]
pub struct CustomDensity {
    pub f: Arc<DensityFn>,
    pub support_radius: f64,
    pub name: String,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("CustomDensity")
            .field("name", &self.name)
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum DensityKind {
    BetaFamily { beta: f64 },
    BetaTwo,
    CppLog,
    PointMasses(Vec<PointMass>),
    Custom(CustomDensity),
}

/// Behaviour of the radial factor `g(r) = f(r)/r^3` on `r <= 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmallRadius {
    /// `g(r) = coef * r^power`
    Power { coef: f64, power: f64 },
    /// `g(r) = coef * r^power / log(r)^2`
    PowerLogSq { coef: f64, power: f64 },
}

impl SmallRadius {
    /// `int_lo^hi r^j g(r) dr` for `0 <= lo < hi <= 1/2`, when finite.
    pub fn moment(&self, j: f64, lo: f64, hi: f64, opts: QuadOptions) -> Result<f64> {
        match *self {
            SmallRadius::Power { coef, power } => {
                let p = power + j + 1.0;
                if p <= 0.0 && lo == 0.0 {
                    return Err(Error::OutOfRange(format!("moment of order {j} diverges at 0")));
                }
                Ok(if p.abs() < 1e-14 {
                    coef * (hi.ln() - lo.ln())
                } else {
                    coef * (hi.powf(p) - lo.powf(p)) / p
                })
            }
            SmallRadius::PowerLogSq { coef, power } => {
                let p = power + j;
                if (p + 1.0).abs() < 1e-14 {
                    // antiderivative of 1/(r log^2 r) is -1/log r
                    let at = |r: f64| if r == 0.0 { 0.0 } else { -1.0 / r.ln() };
                    Ok(coef * (at(hi) - at(lo)))
                } else if p < -1.0 && lo == 0.0 {
                    Err(Error::OutOfRange(format!("moment of order {j} diverges at 0")))
                } else {
                    let est = integrate_radial(|r: f64| r.powf(p) / r.ln().powi(2), lo, hi, &[], opts)?;
                    Ok(coef * est.value)
                }
            }
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            SmallRadius::Power { coef, power } => coef * r.powf(power),
            SmallRadius::PowerLogSq { coef, power } => coef * r.powf(power) / r.ln().powi(2),
        }
    }
}

/// A jump measure on the positive quadrant.
#[derive(Debug, Clone)]
pub struct JumpDensitySpec {
    pub kind: DensityKind,
    /// Multiplier applied to the base density.
    pub scale: f64,
    pub label: String,
    intensity: Intensity,
}

/// Raw mass of the unnormalized log density: angular mass times the radial
/// integral, whose part on (0, 1/2] equals 1/log 2.
fn cpp_log_base_mass() -> Result<f64> {
    let outer = integrate_radial(
        |r: f64| cpp_log_base(r) / r.powi(3),
        CUTOFF_INNER,
        RADIAL_CUTOFF,
        &[CUTOFF_OUTER, 1.0],
        QuadOptions::rel(1e-13),
    )?;
    Ok(ANGULAR_MASS * (1.0 / 2f64.ln() + outer.value))
}

fn cpp_log_base(r: f64) -> f64 {
    let c = cutoff(r);
    let mut v = (1.0 - c) * (-r).exp();
    if c > 0.0 {
        v += r * r * c / r.ln().powi(2);
    }
    v
}

fn beta_two_base(r: f64) -> f64 {
    let c = cutoff(r);
    let mut v = (1.0 - c) * (-r).exp();
    if c > 0.0 {
        v += c / r.ln().powi(2);
    }
    v
}

impl JumpDensitySpec {
    /// `f(x) = r^(2-beta) e^-r`, Blumenthal-Getoor index `beta`.
    pub fn beta_family(beta: f64) -> Result<Self> {
        if !(0.0..2.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("beta must lie in [0, 2), got {beta}")));
        }
        Ok(JumpDensitySpec {
            kind: DensityKind::BetaFamily { beta },
            scale: 1.0,
            label: format!("beta_family({beta})"),
            intensity: Intensity::Infinite,
        })
    }

    /// Index-two density `cutoff(r)/log(r)^2 + (1 - cutoff(r)) e^-r`.
    pub fn beta_two() -> Self {
        JumpDensitySpec {
            kind: DensityKind::BetaTwo,
            scale: 1.0,
            label: "beta_two".into(),
            intensity: Intensity::Infinite,
        }
    }

    /// Finite-activity density `r^2 cutoff(r)/log(r)^2 + (1 - cutoff(r)) e^-r`,
    /// rescaled to total mass `lambda`.
    pub fn cpp_log(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "intensity must be positive, got {lambda}"
            )));
        }
        let base = cpp_log_base_mass()?;
        Ok(JumpDensitySpec {
            kind: DensityKind::CppLog,
            scale: lambda / base,
            label: format!("cpp_log_density(lambda={lambda})"),
            intensity: Intensity::Finite(lambda),
        })
    }

    /// Finite sum of weighted atoms; an empty list is the zero measure.
    pub fn point_masses(points: Vec<PointMass>) -> Result<Self> {
        for p in &points {
            if !(p.weight > 0.0 && p.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "point-mass weights must be positive, got {}",
                    p.weight
                )));
            }
            let [x, y] = p.location;
            if !(x >= 0.0 && y >= 0.0 && x.is_finite() && y.is_finite()) || (x == 0.0 && y == 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "point-mass location must lie in the closed quadrant minus the origin, got ({x}, {y})"
                )));
            }
        }
        let total = points.iter().map(|p| p.weight).sum();
        let label = format!("point_masses({})", points.len());
        Ok(JumpDensitySpec {
            kind: DensityKind::PointMasses(points),
            scale: 1.0,
            label,
            intensity: Intensity::Finite(total),
        })
    }

    /// Single atom of mass `weight` at `location`.
    pub fn single_jump(location: [f64; 2], weight: f64) -> Result<Self> {
        Self::point_masses(vec![PointMass { location, weight }])
    }

    /// Custom density; its mass is computed by quadrature.
    pub fn custom(
        name: impl Into<String>,
        support_radius: f64,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(support_radius > 0.0 && support_radius.is_finite()) {
            return Err(Error::InvalidParameter("support radius must be positive".into()));
        }
        let name = name.into();
        let mut spec = JumpDensitySpec {
            kind: DensityKind::Custom(CustomDensity {
                f: Arc::new(f),
                support_radius,
                name: name.clone(),
            }),
            scale: 1.0,
            label: format!("custom({name})"),
            intensity: Intensity::Finite(f64::NAN),
        };
        let mass = super::truth::custom_mass(&spec)?;
        spec.intensity = Intensity::Finite(mass);
        Ok(spec)
    }

    /// Multiplies the measure by `factor`.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {factor}")));
        }
        match &mut self.kind {
            DensityKind::PointMasses(points) => {
                for p in points.iter_mut() {
                    p.weight *= factor;
                }
            }
            _ => self.scale *= factor,
        }
        if let Intensity::Finite(v) = self.intensity {
            self.intensity = Intensity::Finite(v * factor);
        }
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn intensity(&self) -> Intensity {
        self.intensity
    }

    pub fn is_point_masses(&self) -> bool {
        matches!(self.kind, DensityKind::PointMasses(_))
    }

    pub fn points(&self) -> Option<&[PointMass]> {
        match &self.kind {
            DensityKind::PointMasses(p) => Some(p),
            _ => None,
        }
    }

    /// True for kinds whose `f` depends on `|x|` only.
    pub fn is_radial(&self) -> bool {
        matches!(
            self.kind,
            DensityKind::BetaFamily { .. } | DensityKind::BetaTwo | DensityKind::CppLog
        )
    }

    /// Radial profile `f(r)` (including the scale) for radial kinds.
    pub fn radial_f(&self, r: f64) -> f64 {
        let base = match self.kind {
            DensityKind::BetaFamily { beta } => r.powf(2.0 - beta) * (-r).exp(),
            DensityKind::BetaTwo => beta_two_base(r),
            DensityKind::CppLog => cpp_log_base(r),
            _ => panic!("radial_f called on a non-radial density"),
        };
        self.scale * base
    }

    /// Radial factor `g(r) = f(r)/r^3` of the polar form `g(r) w(theta) dr dtheta`.
    pub fn radial_g(&self, r: f64) -> f64 {
        if let DensityKind::BetaFamily { beta } = self.kind {
            return self.scale * r.powf(-1.0 - beta) * (-r).exp();
        }
        self.radial_f(r) / r.powi(3)
    }

    /// Exact form of the radial factor on `r <= 1/2`, when it has one.
    pub fn small_radius(&self) -> Option<SmallRadius> {
        match self.kind {
            // the e^-r factor prevents an exact power form; callers handle
            // the beta family in closed form instead
            DensityKind::BetaFamily { .. } => None,
            DensityKind::BetaTwo => Some(SmallRadius::PowerLogSq {
                coef: self.scale,
                power: -3.0,
            }),
            DensityKind::CppLog => Some(SmallRadius::PowerLogSq {
                coef: self.scale,
                power: -1.0,
            }),
            _ => None,
        }
    }

    /// Weighted density `f(x)`; `None` for point masses.
    pub fn f(&self, x1: f64, x2: f64) -> Option<f64> {
        if x1 < 0.0 || x2 < 0.0 {
            return Some(0.0);
        }
        match &self.kind {
            DensityKind::PointMasses(_) => None,
            DensityKind::Custom(c) => Some(self.scale * (c.f)(x1, x2)),
            _ => Some(self.radial_f(x1.hypot(x2))),
        }
    }

    /// Lebesgue density of the jump measure; `None` for point masses.
    pub fn density(&self, x1: f64, x2: f64) -> Option<f64> {
        self.f(x1, x2).map(|f| f / (x1.powi(4) + x2.powi(4)))
    }

    /// Radius beyond which the measure is treated as zero.
    pub fn outer_radius(&self) -> f64 {
        match &self.kind {
            DensityKind::Custom(c) => c.support_radius,
            DensityKind::PointMasses(p) => p.iter().map(|q| q.location[0].hypot(q.location[1])).fold(0.0, f64::max),
            _ => RADIAL_CUTOFF,
        }
    }

    /// Polar integrand `f(r e_theta) / r^3 * angular_weight(theta)`.
    pub fn polar_integrand(&self, r: f64, theta: f64) -> f64 {
        match &self.kind {
            DensityKind::Custom(c) => {
                let (s, co) = theta.sin_cos();
                self.scale * (c.f)(r * co, r * s) / r.powi(3) * angular_weight(theta)
            }
            DensityKind::PointMasses(_) => panic!("polar_integrand on point masses"),
            _ => self.radial_g(r) * angular_weight(theta),
        }
    }
}

/// Parameters accepted by [`make_density`].
#[derive(Debug, Clone, Default)]
pub struct DensityParams {
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub points: Vec<PointMass>,
    pub label: Option<String>,
}

/// Builds a density from a kind name: `beta_family`, `beta_two`,
/// `cpp_log_density` or `point_masses`. For the beta kinds `lambda` acts as
/// a scale; for `cpp_log_density` it is the total mass (default 1).
pub fn make_density(kind: &str, params: &DensityParams) -> Result<JumpDensitySpec> {
    let spec = match kind {
        "beta_family" => {
            let beta = params
                .beta
                .ok_or_else(|| Error::InvalidParameter("beta_family needs beta".into()))?;
            let s = JumpDensitySpec::beta_family(beta)?;
            match params.lambda {
                Some(l) => s.scaled(l)?,
                None => s,
            }
        }
        "beta_two" => {
            let s = JumpDensitySpec::beta_two();
            match params.lambda {
                Some(l) => s.scaled(l)?,
                None => s,
            }
        }
        "cpp_log_density" | "cpp_log" => JumpDensitySpec::cpp_log(params.lambda.unwrap_or(1.0))?,
        "point_masses" => {
            let s = JumpDensitySpec::point_masses(params.points.clone())?;
            match params.lambda {
                Some(l) => s.scaled(l)?,
                None => s,
            }
        }
        "custom" => {
            return Err(Error::Unsupported(
                "custom densities are built in code, not from a kind name".into(),
            ))
        }
        other => return Err(Error::InvalidParameter(format!("unknown density kind '{other}'"))),
    };
    Ok(match &params.label {
        Some(l) => spec.with_label(l.clone()),
        None => spec,
    })
}

/// Angular moments `int_0^{pi/2} m(theta) angular_weight(theta) dtheta`
/// for `m` in `[1, cos, sin, cos^2, cos sin, sin^2]`.
pub fn angular_moments() -> [f64; 6] {
    let (nodes, weights) = crate::quad::composite_gl(0.0, FRAC_PI_2, 8, 20);
    let mut out = [0.0; 6];
    for (t, w) in nodes.iter().zip(&weights) {
        let (s, c) = t.sin_cos();
        let a = angular_weight(*t) * w;
        out[0] += a;
        out[1] += a * c;
        out[2] += a * s;
        out[3] += a * c * c;
        out[4] += a * c * s;
        out[5] += a * s * s;
    }
    out
}
