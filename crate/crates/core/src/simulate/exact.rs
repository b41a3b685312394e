//! Exact characteristic function of a model and its pure partial derivatives.
//!
//! The jump part of the exponent is written in polar form. For a radial
//! density the inner radial integrals depend on `u` only through
//! `w = u1 cos(t) + u2 sin(t)`, so they are evaluated in closed form (beta
//! family) or tabulated in `w` once per model (log densities).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::charfn::CharFnGrid;
use crate::error::{Error, Result};
use crate::levy_model::density::{angular_weight, DensityKind, SmallRadius, CUTOFF_INNER};
use crate::levy_model::{LevyModelSpec, Representation};
use crate::quad::{composite_gl_edges, gauss_legendre, QuadOptions};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);
const I_POW: [Complex64; 5] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
    Complex64::new(1.0, 0.0),
];

/// Table spacing in `w`.
const TABLE_STEP: f64 = 0.01;

/// `e^{ix} - sum_{j<m} (ix)^j / j!`.
fn exp_tail(m: usize, x: f64) -> Complex64 {
    if x.abs() < 2.0 {
        let mut term = Complex64::new(1.0, 0.0);
        for j in 1..=m {
            term *= I * x / j as f64;
        }
        let mut sum = ZERO;
        let mut j = m;
        loop {
            sum += term;
            j += 1;
            term *= I * x / j as f64;
            if term.norm() <= 1e-18 * sum.norm().max(1e-300) || j > m + 60 {
                break;
            }
        }
        sum
    } else {
        let mut s = Complex64::from_polar(1.0, x);
        let mut term = Complex64::new(1.0, 0.0);
        for j in 0..m {
            s -= term;
            term *= I * x / (j + 1) as f64;
        }
        s
    }
}

/// Number of Taylor terms of `e^{iwr}` removed by the compensation for the
/// radial integral of order `l`.
fn subtracted_terms(l: usize, compensated: bool) -> usize {
    match (l, compensated) {
        (0, true) => 2,
        (1, true) | (0, false) => 1,
        _ => 0,
    }
}

/// Radial integrals `R_l(w)`, `l = 0..=4`, where
/// `R_l(w) = int r^l (e^{iwr} - T_l(wr)) g(r) dr` and `T_l` is the part of
/// the Taylor polynomial removed by the representation.
#[derive(Debug, Clone)]
enum RadialTransform {
    Beta { beta: f64, scale: f64 },
    Table { values: Vec<[Complex64; 6]> },
}

impl RadialTransform {
    fn beta(beta: f64, scale: f64) -> Self {
        RadialTransform::Beta { beta, scale }
    }

    fn table(model: &LevyModelSpec, w_max: f64) -> Result<Self> {
        let spec = &model.jumps;
        let compensated = model.representation == Representation::Compensated;
        let (coef, power) = match spec.small_radius() {
            Some(SmallRadius::PowerLogSq { coef, power }) => (coef, power),
            _ => return Err(Error::Unsupported("no tabulation rule for this density".into())),
        };
        let mut edges: Vec<f64> = (0..=46).rev().map(|k| CUTOFF_INNER * 0.5f64.powi(k)).collect();
        edges.insert(0, 0.0);
        let (small_r, small_w) = composite_gl_edges(&edges, 16);
        // fine panels across the cutoff transition, which is smooth but not analytic
        let mut outer_edges: Vec<f64> = (0..=20).map(|i| CUTOFF_INNER + 0.025 * i as f64).collect();
        let outer = spec.outer_radius();
        while *outer_edges.last().unwrap() < outer {
            let next = (outer_edges.last().unwrap() + 0.2).min(outer);
            outer_edges.push(next);
        }
        let (out_r, out_w) = composite_gl_edges(&outer_edges, 16);
        let out_g: Vec<f64> = out_r.iter().zip(&out_w).map(|(r, w)| w * spec.radial_g(*r)).collect();
        let small_g: Vec<f64> = small_r
            .iter()
            .zip(&small_w)
            .map(|(r, w)| w * coef * r.powf(power) / r.ln().powi(2))
            .collect();

        // Taylor orders and analytic moments on (0, 1/2]
        let mut orders = [0usize; 6];
        let mut moments = [f64::NAN; 16];
        let opts = QuadOptions::rel(1e-12);
        let small = SmallRadius::PowerLogSq { coef, power };
        for (l, order) in orders.iter_mut().enumerate() {
            let j0 = subtracted_terms(l, compensated);
            let m = j0.max((1.0 - l as f64 - power).ceil().max(0.0) as usize);
            *order = m;
            for j in j0..m {
                if moments[l + j].is_nan() {
                    moments[l + j] = small.moment((l + j) as f64, 0.0, CUTOFF_INNER, opts)?;
                }
            }
        }
        let count = (w_max / TABLE_STEP).ceil() as usize + 2;
        let values: Vec<[Complex64; 6]> = (0..count)
            .into_par_iter()
            .map(|i| {
                let w = i as f64 * TABLE_STEP;
                let mut out = [ZERO; 6];
                for (l, o) in out.iter_mut().enumerate() {
                    let j0 = subtracted_terms(l, compensated);
                    let m = orders[l];
                    let mut acc = ZERO;
                    let mut c = Complex64::new(1.0, 0.0);
                    for j in 0..m {
                        if j >= j0 {
                            acc += c * moments[l + j];
                        }
                        c *= I * w / (j + 1) as f64;
                    }
                    for (r, g) in small_r.iter().zip(&small_g) {
                        acc += exp_tail(m, w * r) * (g * r.powi(l as i32));
                    }
                    *o = acc;
                }
                for (r, g) in out_r.iter().zip(&out_g) {
                    let e = Complex64::from_polar(1.0, w * r);
                    let mut rl = *g;
                    for (l, o) in out.iter_mut().enumerate() {
                        let t = match subtracted_terms(l, compensated) {
                            2 => Complex64::new(1.0, w * r),
                            1 => Complex64::new(1.0, 0.0),
                            _ => ZERO,
                        };
                        *o += (e - t) * rl;
                        rl *= r;
                    }
                }
                out
            })
            .collect();
        Ok(RadialTransform::Table { values })
    }

    fn eval(&self, w: f64) -> [Complex64; 5] {
        match self {
            RadialTransform::Beta { beta, scale } => beta_transform(*beta, *scale, w),
            RadialTransform::Table { values } => {
                if w < 0.0 {
                    return self.eval(-w).map(|v| v.conj());
                }
                let x = w / TABLE_STEP;
                let i = (x.floor() as usize).min(values.len() - 2);
                let t = x - i as f64;
                let (a, b) = (&values[i], &values[i + 1]);
                // cubic Hermite with dR_l/dw = i R_{l+1}
                let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
                let h10 = t * (1.0 - t) * (1.0 - t);
                let h01 = t * t * (3.0 - 2.0 * t);
                let h11 = t * t * (t - 1.0);
                let mut out = [ZERO; 5];
                for (l, o) in out.iter_mut().enumerate() {
                    *o =
                        a[l] * h00 + I * a[l + 1] * (h10 * TABLE_STEP) + b[l] * h01 + I * b[l + 1] * (h11 * TABLE_STEP);
                }
                out
            }
        }
    }

    fn w_max(&self) -> f64 {
        match self {
            RadialTransform::Beta { .. } => f64::INFINITY,
            RadialTransform::Table { values } => (values.len() - 2) as f64 * TABLE_STEP,
        }
    }
}

/// Closed forms for `g(r) = scale r^{-1-beta} e^{-r}` in the compensated
/// representation, with `z = 1 - iw`.
fn beta_transform(beta: f64, scale: f64, w: f64) -> [Complex64; 5] {
    let z = Complex64::new(1.0, -w);
    let log_z = z.ln();
    let pow = |e: f64| (log_z * e).exp();
    let near = |v: f64| (beta - v).abs() < 1e-9;
    let r0 = if near(0.0) {
        -log_z - I * w
    } else if near(1.0) {
        z * log_z + I * w
    } else {
        (pow(beta) - 1.0) * libm::tgamma(-beta) - I * w * libm::tgamma(1.0 - beta)
    };
    let r1 = if near(1.0) {
        -log_z
    } else {
        (pow(beta - 1.0) - 1.0) * libm::tgamma(1.0 - beta)
    };
    let mut out = [r0 * scale, r1 * scale, ZERO, ZERO, ZERO];
    for (l, o) in out.iter_mut().enumerate().skip(2) {
        let a = l as f64 - beta;
        *o = pow(-a) * (libm::tgamma(a) * scale);
    }
    out
}

/// `Psi(u)` and `d^l Psi / du_k^l` for `l = 1..=4`, `k = 1, 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentDerivs {
    pub psi: Complex64,
    pub derivs: [[Complex64; 4]; 2],
}

/// Prepared evaluator of the exact characteristic function of a model.
#[derive(Debug, Clone)]
pub struct ExactCharFn {
    model: LevyModelSpec,
    radial: Option<RadialTransform>,
    gl: (Vec<f64>, Vec<f64>),
}

impl ExactCharFn {
    /// Prepares tables valid for `|u| <= u_max`.
    pub fn new(model: &LevyModelSpec, u_max: f64) -> Result<Self> {
        model.validate()?;
        let spec = &model.jumps;
        let radial = match &spec.kind {
            DensityKind::BetaFamily { beta } => Some(RadialTransform::beta(*beta, spec.scale)),
            DensityKind::BetaTwo | DensityKind::CppLog => Some(RadialTransform::table(model, u_max * 1.001 + 0.1)?),
            DensityKind::PointMasses(_) => None,
            DensityKind::Custom(_) => {
                return Err(Error::Unsupported(
                    "the exact characteristic function is not available for custom densities".into(),
                ))
            }
        };
        Ok(ExactCharFn {
            model: model.clone(),
            radial,
            gl: gauss_legendre(16),
        })
    }

    pub fn exponent(&self, u: [f64; 2]) -> Result<ExponentDerivs> {
        let m = &self.model;
        let compensated = m.representation == Representation::Compensated;
        let s = m.sigma;
        let su = [s[0][0] * u[0] + s[0][1] * u[1], s[1][0] * u[0] + s[1][1] * u[1]];
        let mut psi = Complex64::new(
            -0.5 * (u[0] * su[0] + u[1] * su[1]),
            u[0] * m.alpha[0] + u[1] * m.alpha[1],
        );
        let mut d = [[ZERO; 4]; 2];
        for k in 0..2 {
            d[k][0] = Complex64::new(-su[k], m.alpha[k]);
            d[k][1] = Complex64::new(-s[k][k], 0.0);
        }
        if let Some(points) = m.jumps.points() {
            for p in points {
                let x = p.location;
                let e = Complex64::from_polar(p.weight, u[0] * x[0] + u[1] * x[1]);
                let wt = Complex64::new(p.weight, 0.0);
                psi += e - wt;
                if compensated {
                    psi -= I * (p.weight * (u[0] * x[0] + u[1] * x[1]));
                }
                for k in 0..2 {
                    let ix = I * x[k];
                    d[k][0] += ix * if compensated { e - wt } else { e };
                    let mut f = ix * ix;
                    for l in 1..4 {
                        d[k][l] += f * e;
                        f *= ix;
                    }
                }
            }
        }
        if let Some(rt) = &self.radial {
            let r = u[0].hypot(u[1]);
            if r > rt.w_max() {
                return Err(Error::OutOfRange(format!(
                    "|u| = {r} exceeds the prepared range {}",
                    rt.w_max()
                )));
            }
            // panels short enough that w varies by O(1) across each
            let panels = ((r * std::f64::consts::FRAC_PI_4).ceil() as usize).max(4);
            let width = std::f64::consts::FRAC_PI_2 / panels as f64;
            let (nodes, weights) = &self.gl;
            for p in 0..panels {
                let mid = (p as f64 + 0.5) * width;
                for (x, wt) in nodes.iter().zip(weights) {
                    let t = mid + 0.5 * width * x;
                    let (sn, cs) = t.sin_cos();
                    let a = angular_weight(t) * wt * 0.5 * width;
                    let vals = rt.eval(u[0] * cs + u[1] * sn);
                    psi += vals[0] * a;
                    for (k, c) in [cs, sn].into_iter().enumerate() {
                        let mut f = a * c;
                        for l in 1..=4 {
                            d[k][l - 1] += I_POW[l] * vals[l] * f;
                            f *= c;
                        }
                    }
                }
            }
        }
        Ok(ExponentDerivs { psi, derivs: d })
    }

    /// `phi(u)` and `d^l phi / du_k^l` through the chain expansions of `exp(Psi)`.
    pub fn eval(&self, u: [f64; 2]) -> Result<(Complex64, [[Complex64; 4]; 2])> {
        let e = self.exponent(u)?;
        let phi = e.psi.exp();
        let mut out = [[ZERO; 4]; 2];
        for k in 0..2 {
            let [p1, p2, p3, p4] = e.derivs[k];
            out[k][0] = phi * p1;
            out[k][1] = phi * (p1 * p1 + p2);
            out[k][2] = phi * (p1 * p1 * p1 + p1 * p2 * 3.0 + p3);
            out[k][3] = phi * (p1.powi(4) + p1 * p1 * p2 * 6.0 + p2 * p2 * 3.0 + p1 * p3 * 4.0 + p4);
        }
        Ok((phi, out))
    }

    pub fn grid(&self, u1: &[f64], u2: &[f64]) -> Result<CharFnGrid> {
        let mut g = CharFnGrid::zeros(u1.to_vec(), u2.to_vec(), 0);
        let n2 = u2.len();
        let rows: Vec<Vec<(Complex64, [[Complex64; 4]; 2])>> = u1
            .par_iter()
            .map(|&a| u2.iter().map(|&b| self.eval([a, b])).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        for (i, row) in rows.into_iter().enumerate() {
            for (j, (phi, d)) in row.into_iter().enumerate() {
                let idx = i * n2 + j;
                g.phi[idx] = phi;
                for k in 0..2 {
                    for l in 0..4 {
                        g.derivs[k][l][idx] = d[k][l];
                    }
                }
            }
        }
        Ok(g)
    }
}

/// Exact characteristic function and derivatives on the grid `u1 x u2`.
pub fn exact_charfn(model: &LevyModelSpec, u1: &[f64], u2: &[f64]) -> Result<CharFnGrid> {
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let u_max = max(u1).hypot(max(u2));
    ExactCharFn::new(model, u_max)?.grid(u1, u2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::symmetric_axis;
    use crate::levy_model::JumpDensitySpec;
    use crate::quad::integrate_radial;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn exp_tail_branches_agree() {
        for m in 0..6 {
            for x in [1.999_999, 2.000_001, -1.999_999, 0.3] {
                let direct = {
                    let mut s = Complex64::from_polar(1.0, x);
                    let mut t = Complex64::new(1.0, 0.0);
                    for j in 0..m {
                        s -= t;
                        t *= I * x / (j + 1) as f64;
                    }
                    s
                };
                assert!((exp_tail(m, x) - direct).norm() < 1e-13, "m={m} x={x}");
            }
        }
    }

    #[test]
    fn gaussian_value() {
        let m = LevyModelSpec::gaussian([[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let e = ExactCharFn::new(&m, 5.0).unwrap();
        let (phi, d) = e.eval([1.0, 0.0]).unwrap();
        assert!((phi.re - (-0.5f64).exp()).abs() < 1e-15 && phi.im == 0.0);
        // d/du1 exp(-|u|^2/2) = -u1 phi
        assert!(close(d[0][0], -phi, 1e-15));
    }

    #[test]
    fn single_jump_closed_form() {
        let m = LevyModelSpec::cpp(JumpDensitySpec::single_jump([1.0, 1.0], 1.0).unwrap()).unwrap();
        let ax = symmetric_axis(6, 0.9);
        let g = exact_charfn(&m, &ax, &ax).unwrap();
        for idx in 0..g.len() {
            let u = g.point(idx);
            let e = Complex64::from_polar(1.0, u[0] + u[1]);
            let phi = (e - 1.0).exp();
            assert!(close(g.phi[idx], phi, 1e-14));
            assert!(g.phi[idx].norm() >= (-2f64).exp());
            // d/du1 phi = i e phi
            assert!(close(g.values(1, 1)[idx], I * e * phi, 1e-14));
        }
    }

    #[test]
    fn beta_transform_matches_quadrature() {
        for beta in [0.0, 0.5, 1.0, 1.5] {
            for w in [-3.0, 0.7, 11.0] {
                let closed = beta_transform(beta, 1.0, w);
                for l in 0..5 {
                    let est = integrate_radial(
                        |r: f64| {
                            let t = match l {
                                0 => Complex64::new(1.0, w * r),
                                1 => Complex64::new(1.0, 0.0),
                                _ => ZERO,
                            };
                            let e = if w * r < 1e-3 && l < 2 {
                                exp_tail(2 - l, w * r)
                            } else {
                                Complex64::from_polar(1.0, w * r) - t
                            };
                            e * (r.powi(l as i32) * r.powf(-1.0 - beta) * (-r).exp())
                        },
                        0.0,
                        200.0,
                        &[1.0, 2.0, 5.0, 10.0, 20.0, 40.0],
                        QuadOptions::rel(1e-11).with_abs(1e-13),
                    )
                    .unwrap();
                    assert!(
                        close(closed[l], est.value, 1e-8),
                        "beta={beta} w={w} l={l}: {} vs {}",
                        closed[l],
                        est.value
                    );
                }
            }
        }
    }

    #[test]
    fn table_matches_direct_quadrature() {
        // independent oracle: adaptive quadrature on [d, R] plus the leading
        // Taylor term of the compensated integrand on (0, d]
        let spec = JumpDensitySpec::beta_two();
        let m = LevyModelSpec::compensated([[0.0; 2]; 2], spec.clone()).unwrap();
        let rt = RadialTransform::table(&m, 20.0).unwrap();
        let d = 1e-7;
        for w in [0.013, 1.0, 7.3, -15.2] {
            let tab = rt.eval(w);
            let direct = integrate_radial(
                |r: f64| exp_tail(2, w * r) * spec.radial_g(r),
                d,
                50.0,
                &[0.5, 0.75, 1.0],
                QuadOptions::rel(1e-12).with_abs(1e-14),
            )
            .unwrap()
            .value
                + Complex64::new(-0.5 * w * w * (-1.0 / d.ln()), 0.0);
            assert!(close(tab[0], direct, 1e-7), "w={w}: {} vs {}", tab[0], direct);
            let direct4 = integrate_radial(
                |r: f64| Complex64::from_polar(r.powi(4) * spec.radial_g(r), w * r),
                0.0,
                50.0,
                &[0.5, 0.75, 1.0],
                QuadOptions::rel(1e-12).with_abs(1e-14),
            )
            .unwrap()
            .value;
            assert!(close(tab[4], direct4, 1e-7), "w={w}: {} vs {}", tab[4], direct4);
        }
    }

    #[test]
    fn moments_at_origin() {
        // phi'(0) = i E Z_1 and phi''(0) = -E Z_1^2
        let spec = JumpDensitySpec::cpp_log(2.0).unwrap();
        let m = LevyModelSpec::cpp(spec.clone()).unwrap();
        let e = ExactCharFn::new(&m, 1.0).unwrap();
        let (phi, d) = e.eval([0.0, 0.0]).unwrap();
        assert_eq!(phi, Complex64::new(1.0, 0.0));
        let mom = crate::simulate::sampler::shell_moments(&spec, 0.0, f64::INFINITY).unwrap();
        assert!(close(d[0][0], I * mom[1], 1e-8), "{} vs {}", d[0][0], mom[1]);
        let second = mom[3] + mom[1] * mom[1];
        assert!(close(d[0][1], Complex64::new(-second, 0.0), 1e-8));
    }

    #[test]
    fn custom_unsupported() {
        let s = JumpDensitySpec::custom("c", 10.0, |x, y| (-x - y).exp() * (x.powi(4) + y.powi(4))).unwrap();
        let m = LevyModelSpec::cpp(s).unwrap();
        assert!(matches!(ExactCharFn::new(&m, 1.0), Err(Error::Unsupported(_))));
    }
}
