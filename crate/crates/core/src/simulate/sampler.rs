//! Jump and increment samplers.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::levy_model::density::{
    angular_moments, angular_weight, DensityKind, JumpDensitySpec, SmallRadius, CUTOFF_INNER,
};
use crate::levy_model::{LevyModelSpec, Representation};
use crate::quad::{integrate_radial, integrate_with_breaks, QuadOptions};

const MOMENT_OPTS: QuadOptions = QuadOptions {
    rel_tol: 1e-11,
    abs_tol: 1e-300,
    max_intervals: 4000,
};

/// `int_lo^hi r^j g(r) dr` for a radial kind.
pub(crate) fn radial_moment(spec: &JumpDensitySpec, j: i32, lo: f64, hi: f64) -> Result<f64> {
    let hi = hi.min(spec.outer_radius());
    if hi <= lo {
        return Ok(0.0);
    }
    let breaks = [CUTOFF_INNER, 0.75, 1.0];
    let mut total = 0.0;
    let mut start = lo;
    if let Some(small) = spec.small_radius() {
        if lo < CUTOFF_INNER {
            let top = hi.min(CUTOFF_INNER);
            total += small.moment(j as f64, lo, top, MOMENT_OPTS)?;
            start = top;
        }
    }
    if start < hi {
        total += integrate_radial(|r: f64| r.powi(j) * spec.radial_g(r), start, hi, &breaks, MOMENT_OPTS)?.value;
    }
    Ok(total)
}

/// `[mass, int x1, int x2, int x1^2, int x1 x2, int x2^2]` of the jump
/// measure restricted to `lo < |x| <= hi`.
pub(crate) fn shell_moments(spec: &JumpDensitySpec, lo: f64, hi: f64) -> Result<[f64; 6]> {
    match &spec.kind {
        DensityKind::PointMasses(points) => {
            let mut m = [0.0; 6];
            for p in points {
                let [x, y] = p.location;
                let r = x.hypot(y);
                if r > lo && r <= hi {
                    let w = p.weight;
                    m[0] += w;
                    m[1] += w * x;
                    m[2] += w * y;
                    m[3] += w * x * x;
                    m[4] += w * x * y;
                    m[5] += w * y * y;
                }
            }
            Ok(m)
        }
        DensityKind::Custom(c) => {
            let mut out = [0.0; 6];
            let hi = hi.min(c.support_radius);
            for (idx, o) in out.iter_mut().enumerate() {
                let est = integrate_with_breaks(
                    |t: f64| {
                        let (s, co) = t.sin_cos();
                        integrate_radial(
                            |r: f64| {
                                let (x, y) = (r * co, r * s);
                                let m = [1.0, x, y, x * x, x * y, y * y][idx];
                                spec.scale * (c.f)(x, y) / r.powi(3) * m
                            },
                            lo,
                            hi,
                            &[],
                            QuadOptions::rel(1e-10),
                        )
                        .map(|e| e.value * angular_weight(t))
                        .unwrap_or(f64::NAN)
                    },
                    0.0,
                    FRAC_PI_2,
                    &[],
                    QuadOptions::rel(1e-9).with_abs(1e-300),
                )?;
                if !est.value.is_finite() {
                    return Err(Error::Quadrature {
                        what: "custom density moments".into(),
                        estimate: est.value,
                        error: est.error,
                    });
                }
                *o = est.value;
            }
            Ok(out)
        }
        _ => {
            let a = angular_moments();
            let m0 = if lo == 0.0 && spec.intensity().finite().is_none() {
                f64::INFINITY
            } else {
                radial_moment(spec, 0, lo, hi)?
            };
            // only the second moments of an inner shell are used
            let m1 = match radial_moment(spec, 1, lo, hi) {
                Err(Error::OutOfRange(_)) if lo == 0.0 => f64::INFINITY,
                other => other?,
            };
            let m2 = radial_moment(spec, 2, lo, hi)?;
            Ok([m0 * a[0], m1 * a[1], m1 * a[2], m2 * a[3], m2 * a[4], m2 * a[5]])
        }
    }
}

/// Draw of `r^p` restricted to `[lo, hi]`.
fn power_draw<R: Rng + ?Sized>(rng: &mut R, p: f64, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    let q = p + 1.0;
    if q.abs() < 1e-12 {
        (lo.ln() + u * (hi / lo).ln()).exp()
    } else {
        let (a, b) = (lo.powf(q), hi.powf(q));
        (a + u * (b - a)).powf(1.0 / q).clamp(lo, hi)
    }
}

#[derive(Debug, Clone)]
enum RadialPiece {
    /// Density proportional to `1/(r log^2 r)` on `[lo, hi]`, drawn exactly
    /// through `y = -1/log r`.
    InvLogSq { lo: f64, hi: f64 },
    /// Rejection from the proposal `r^power` with envelope `bound`.
    Power { lo: f64, hi: f64, power: f64, bound: f64 },
}

/// Radial part of the jump law: pieces chosen by mass, then drawn exactly.
#[derive(Debug, Clone)]
struct RadialSampler {
    pieces: Vec<RadialPiece>,
    cumulative: Vec<f64>,
}

impl RadialSampler {
    fn new(spec: &JumpDensitySpec, eps: f64) -> Result<Self> {
        let outer = spec.outer_radius();
        let power = match spec.kind {
            DensityKind::BetaFamily { beta } => -1.0 - beta,
            DensityKind::BetaTwo => -3.0,
            _ => -1.0,
        };
        let mut edges = Vec::new();
        let mut pieces = Vec::new();
        let mut masses = Vec::new();
        let mut start = eps;
        if let (Some(SmallRadius::PowerLogSq { power: p, .. }), true) = (spec.small_radius(), eps < CUTOFF_INNER) {
            if (p + 1.0).abs() < 1e-14 {
                pieces.push(RadialPiece::InvLogSq {
                    lo: eps,
                    hi: CUTOFF_INNER,
                });
                masses.push(radial_moment(spec, 0, eps, CUTOFF_INNER)?);
                start = CUTOFF_INNER;
            }
        }
        if start <= 0.0 {
            return Err(Error::InvalidParameter(
                "a positive small-jump cutoff is required".into(),
            ));
        }
        let mut x = start;
        edges.push(x);
        while x < 1.0 {
            x = (2.0 * x).min(1.0);
            edges.push(x);
        }
        while x < outer {
            x = (x + 0.5).min(outer);
            edges.push(x);
        }
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mass = radial_moment(spec, 0, lo, hi)?;
            let mut bound: f64 = 0.0;
            for i in 0..=64 {
                let r = lo + (hi - lo) * i as f64 / 64.0;
                bound = bound.max(spec.radial_g(r) / r.powf(power));
            }
            pieces.push(RadialPiece::Power {
                lo,
                hi,
                power,
                bound: 1.05 * bound,
            });
            masses.push(mass);
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in masses {
            acc += m;
            cumulative.push(acc);
        }
        Ok(RadialSampler { pieces, cumulative })
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, spec: &JumpDensitySpec) -> f64 {
        let u = rng.random::<f64>() * self.total();
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.pieces.len() - 1);
        match self.pieces[i] {
            RadialPiece::InvLogSq { lo, hi } => {
                let y_lo = if lo > 0.0 { -1.0 / lo.ln() } else { 0.0 };
                let y_hi = -1.0 / hi.ln();
                let y = y_lo + rng.random::<f64>() * (y_hi - y_lo);
                if y <= 0.0 {
                    f64::MIN_POSITIVE
                } else {
                    (-1.0 / y).exp()
                }
            }
            RadialPiece::Power { lo, hi, power, bound } => loop {
                let r = power_draw(rng, power, lo, hi);
                let ratio = spec.radial_g(r) / (bound * r.powf(power));
                if rng.random::<f64>() < ratio {
                    return r;
                }
            },
        }
    }
}

fn draw_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let t = rng.random::<f64>() * FRAC_PI_2;
        if rng.random::<f64>() * 2.0 < angular_weight(t) {
            return t;
        }
    }
}

#[derive(Debug, Clone)]
enum JumpLaw {
    None,
    Radial(RadialSampler),
    Atoms {
        points: Vec<[f64; 2]>,
        cumulative: Vec<f64>,
    },
    Box {
        side: f64,
        eps: f64,
        bound: f64,
    },
}

/// Per-model state for drawing unit-time increments.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    jumps: JumpDensitySpec,
    law: JumpLaw,
    /// Rate of the simulated jumps (those with `|x| > eps`).
    pub jump_rate: f64,
    pub drift: [f64; 2],
    /// Lower-triangular factor of the total Gaussian covariance.
    chol: [[f64; 2]; 2],
    pub epsilon: f64,
}

fn cholesky(s: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l11 = s[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { s[1][0] / l11 } else { 0.0 };
    let l22 = (s[1][1] - l21 * l21).max(0.0).sqrt();
    [[l11, 0.0], [l21, l22]]
}

impl ModelSampler {
    pub fn new(model: &LevyModelSpec) -> Result<Self> {
        model.validate()?;
        let spec = &model.jumps;
        let finite = spec.intensity().finite().is_some();
        let eps = match (model.representation, model.small_jump_epsilon) {
            (Representation::Uncompensated, _) => 0.0,
            (_, Some(e)) => e,
            (_, None) if finite => 0.0,
            (_, None) => {
                return Err(Error::InvalidParameter(
                    "a small-jump cutoff is required to simulate an infinite-activity model".into(),
                ))
            }
        };
        if !finite && eps <= 0.0 {
            return Err(Error::InvalidParameter("the small-jump cutoff must be positive".into()));
        }
        let outer = spec.outer_radius();
        let big = shell_moments(spec, eps, f64::INFINITY)?;
        let small = if eps > 0.0 {
            shell_moments(spec, 0.0, eps).map(|m| [0.0, 0.0, 0.0, m[3], m[4], m[5]])?
        } else {
            [0.0; 6]
        };
        let law = match &spec.kind {
            _ if big[0] == 0.0 => JumpLaw::None,
            DensityKind::PointMasses(points) => {
                let mut cumulative = Vec::new();
                let mut pts = Vec::new();
                let mut acc = 0.0;
                for p in points.iter().filter(|p| p.location[0].hypot(p.location[1]) > eps) {
                    acc += p.weight;
                    cumulative.push(acc);
                    pts.push(p.location);
                }
                JumpLaw::Atoms {
                    points: pts,
                    cumulative,
                }
            }
            DensityKind::Custom(_) => {
                let mut bound: f64 = 0.0;
                let steps = 400;
                for i in 0..=steps {
                    for j in 0..=steps {
                        let (x, y) = (outer * i as f64 / steps as f64, outer * j as f64 / steps as f64);
                        if x.hypot(y) > eps && (i, j) != (0, 0) {
                            bound = bound.max(spec.density(x, y).unwrap_or(0.0));
                        }
                    }
                }
                if !bound.is_finite() || bound <= 0.0 {
                    return Err(Error::Unsupported(
                        "custom density is unbounded on the sampling box".into(),
                    ));
                }
                JumpLaw::Box {
                    side: outer,
                    eps,
                    bound: 1.1 * bound,
                }
            }
            _ => JumpLaw::Radial(RadialSampler::new(spec, eps)?),
        };
        let mut drift = model.alpha;
        if model.representation == Representation::Compensated {
            drift[0] -= big[1];
            drift[1] -= big[2];
        }
        let s = model.sigma;
        let cov = [
            [s[0][0] + small[3], s[0][1] + small[4]],
            [s[1][0] + small[4], s[1][1] + small[5]],
        ];
        Ok(ModelSampler {
            jumps: spec.clone(),
            law,
            jump_rate: big[0],
            drift,
            chol: cholesky(cov),
            epsilon: eps,
        })
    }

    /// One jump from the normalized law of the simulated jumps.
    pub fn draw_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        match &self.law {
            JumpLaw::None => [0.0, 0.0],
            JumpLaw::Atoms { points, cumulative } => {
                let u = rng.random::<f64>() * cumulative.last().unwrap();
                points[cumulative.partition_point(|&c| c <= u).min(points.len() - 1)]
            }
            JumpLaw::Radial(rs) => {
                let r = rs.draw(rng, &self.jumps);
                let (s, c) = draw_angle(rng).sin_cos();
                [r * c, r * s]
            }
            JumpLaw::Box { side, eps, bound } => loop {
                let x = rng.random::<f64>() * side;
                let y = rng.random::<f64>() * side;
                if x.hypot(y) <= *eps {
                    continue;
                }
                let d = self.jumps.density(x, y).unwrap_or(0.0);
                if rng.random::<f64>() * bound < d {
                    return [x, y];
                }
            },
        }
    }

    /// One increment together with its number of simulated jumps.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ([f64; 2], u64) {
        let mut z = self.drift;
        let count = if self.jump_rate > 0.0 {
            Poisson::new(self.jump_rate).map(|p| p.sample(rng) as u64).unwrap_or(0)
        } else {
            0
        };
        for _ in 0..count {
            let j = self.draw_jump(rng);
            z[0] += j[0];
            z[1] += j[1];
        }
        let l = self.chol;
        if l[0][0] > 0.0 || l[1][1] > 0.0 || l[1][0] != 0.0 {
            let g1: f64 = StandardNormal.sample(rng);
            let g2: f64 = StandardNormal.sample(rng);
            z[0] += l[0][0] * g1;
            z[1] += l[1][0] * g1 + l[1][1] * g2;
        }
        (z, count)
    }
}
