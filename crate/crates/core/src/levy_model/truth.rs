//! Reference tail integrals, marginal inverses and copulas by quadrature.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::Path;

use super::density::{DensityKind, Intensity, JumpDensitySpec, CUTOFF_INNER, CUTOFF_OUTER};
use crate::error::{Error, Result};
use crate::quad::{brent, integrate_radial, integrate_with_breaks, QuadOptions};
use crate::Regime;

/// Default relative tolerance for truth quadratures.
pub const DEFAULT_TRUTH_TOL: f64 = 1e-8;

const RADIAL_BREAKS: [f64; 3] = [CUTOFF_INNER, CUTOFF_OUTER, 1.0];

/// `int_rho^R f(r e_theta)/r^3 dr` (without the angular factor).
fn radial_tail(spec: &JumpDensitySpec, theta: f64, rho: f64, tol: f64) -> Result<f64> {
    let outer = spec.outer_radius();
    if rho >= outer {
        return Ok(0.0);
    }
    let opts = QuadOptions::rel(tol).with_abs(1e-300);
    let est = match &spec.kind {
        DensityKind::Custom(c) => {
            let (s, co) = theta.sin_cos();
            integrate_radial(
                |r: f64| spec.scale * (c.f)(r * co, r * s) / r.powi(3),
                rho,
                outer,
                &[],
                opts,
            )?
        }
        _ => integrate_radial(|r: f64| spec.radial_g(r), rho, outer, &RADIAL_BREAKS, opts)?,
    };
    Ok(est.value)
}

pub(crate) fn custom_mass(spec: &JumpDensitySpec) -> Result<f64> {
    let opts = QuadOptions::rel(1e-10);
    let est = integrate_with_breaks(
        |t: f64| {
            radial_tail(spec, t, 0.0, 1e-12)
                .map(|v| v * super::density::angular_weight(t))
                .unwrap_or(f64::NAN)
        },
        0.0,
        FRAC_PI_2,
        &[],
        opts,
    )?;
    if !est.value.is_finite() {
        return Err(Error::Quadrature {
            what: "custom density mass".into(),
            estimate: est.value,
            error: est.error,
        });
    }
    Ok(est.value)
}

fn check_query(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "tail integral arguments must be finite and nonnegative, got ({a}, {b})"
        )));
    }
    Ok(())
}

/// `U(a, b) = nu([a, inf) x [b, inf))` to relative accuracy `tol`.
pub fn tail_integral_truth(spec: &JumpDensitySpec, a: f64, b: f64, tol: f64) -> Result<f64> {
    check_query(a, b)?;
    if let DensityKind::PointMasses(points) = &spec.kind {
        return Ok(points
            .iter()
            .filter(|p| p.location[0] >= a && p.location[1] >= b)
            .map(|p| p.weight)
            .sum());
    }
    if a == 0.0 && b == 0.0 {
        return match spec.intensity() {
            Intensity::Finite(l) => Ok(l),
            Intensity::Infinite => Err(Error::OutOfRange(
                "U(0, 0) is infinite for an infinite-activity measure".into(),
            )),
        };
    }
    let outer = spec.outer_radius();
    if a.hypot(b) >= outer {
        return Ok(0.0);
    }
    // angular range where the corner region meets the ball of radius `outer`
    let t_lo = if b > 0.0 { (b / outer).asin() } else { 0.0 };
    let t_hi = if a > 0.0 { (a / outer).acos() } else { FRAC_PI_2 };
    let t_mid = b.atan2(a);
    let inner_tol = tol * 1e-2;
    let mut failure = None;
    let est = integrate_with_breaks(
        |t: f64| {
            let (s, c) = t.sin_cos();
            let ra = if a > 0.0 { a / c } else { 0.0 };
            let rb = if b > 0.0 { b / s } else { 0.0 };
            let rho = ra.max(rb);
            match radial_tail(spec, t, rho, inner_tol) {
                Ok(v) => v * super::density::angular_weight(t),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        t_lo,
        t_hi,
        &[t_mid],
        QuadOptions::rel(tol).with_abs(1e-300),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(est.value)
}

/// Marginal tail `U_k(x)`.
pub fn marginal_tail_truth(spec: &JumpDensitySpec, k: usize, x: f64, tol: f64) -> Result<f64> {
    match k {
        1 => tail_integral_truth(spec, x, 0.0, tol),
        2 => tail_integral_truth(spec, 0.0, x, tol),
        _ => Err(Error::InvalidParameter(format!("coordinate must be 1 or 2, got {k}"))),
    }
}

fn marginal_sup(spec: &JumpDensitySpec) -> f64 {
    spec.intensity().finite().unwrap_or(f64::INFINITY)
}

/// `U_k^{-1}(u)`: the `x` with `U_k(x) = u`. For point masses this is the
/// largest atom coordinate `x` with `U_k(x) >= u`.
pub fn marginal_inverse_truth(spec: &JumpDensitySpec, k: usize, u: f64, tol: f64) -> Result<f64> {
    if !(k == 1 || k == 2) {
        return Err(Error::InvalidParameter(format!("coordinate must be 1 or 2, got {k}")));
    }
    let sup = marginal_sup(spec);
    if !(u > 0.0 && u < sup) && !(spec.is_point_masses() && u > 0.0 && u <= sup) {
        return Err(Error::OutOfRange(format!(
            "u = {u} outside the range (0, {sup}) of the marginal tail"
        )));
    }
    if let Some(points) = spec.points() {
        let mut coords: Vec<f64> = points.iter().map(|p| p.location[k - 1]).collect();
        coords.sort_by(|a, b| b.total_cmp(a));
        for x in coords {
            if marginal_tail_truth(spec, k, x, tol)? >= u {
                return Ok(x);
            }
        }
        unreachable!("u <= total mass guarantees an atom");
    }
    let tail = |x: f64| marginal_tail_truth(spec, k, x, tol * 0.1);
    let mut lo = 1.0;
    while tail(lo)? < u {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(Error::OutOfRange(format!("cannot bracket U_{k}^-1({u}) from below")));
        }
    }
    let mut hi = 1.0;
    while tail(hi)? > u {
        hi *= 2.0;
        if hi > spec.outer_radius() * 2.0 {
            return Err(Error::OutOfRange(format!("cannot bracket U_{k}^-1({u}) from above")));
        }
    }
    if lo == hi {
        return Ok(lo);
    }
    let mut failure = None;
    let x = brent(
        |x| match tail(x) {
            Ok(v) => v - u,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        1e-13 * hi,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(x)
}

/// Levy copula `U(U_1^{-1}(u), U_2^{-1}(v))`.
pub fn levy_copula_truth(spec: &JumpDensitySpec, u: f64, v: f64, tol: f64) -> Result<f64> {
    let a = marginal_inverse_truth(spec, 1, u, tol)?;
    let b = marginal_inverse_truth(spec, 2, v, tol)?;
    tail_integral_truth(spec, a, b, tol)
}

/// `M(a, b) = 1 + (U(a, b) - U(a, 0) - U(0, b)) / lambda`.
pub fn cpp_joint_cdf_truth(spec: &JumpDensitySpec, a: f64, b: f64, tol: f64) -> Result<f64> {
    let lambda = cpp_intensity(spec)?;
    let u = tail_integral_truth(spec, a, b, tol)?;
    let u1 = tail_integral_truth(spec, a, 0.0, tol)?;
    let u2 = tail_integral_truth(spec, 0.0, b, tol)?;
    Ok(1.0 + (u - u1 - u2) / lambda)
}

fn cpp_intensity(spec: &JumpDensitySpec) -> Result<f64> {
    match spec.intensity() {
        Intensity::Finite(l) if l > 0.0 => Ok(l),
        _ => Err(Error::OutOfRange(
            "the ordinary copula needs a finite positive intensity".into(),
        )),
    }
}

/// Copula `M(V_1^{-1}(u), V_2^{-1}(v))` of the normalized jump distribution,
/// with `V_k^{-1}(u) = U_k^{-1}(lambda (1 - u))`.
pub fn cpp_copula_truth(spec: &JumpDensitySpec, u: f64, v: f64, tol: f64) -> Result<f64> {
    let lambda = cpp_intensity(spec)?;
    if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
        return Err(Error::OutOfRange(format!(
            "copula arguments must lie in (0,1), got ({u}, {v})"
        )));
    }
    let a = marginal_inverse_truth(spec, 1, lambda * (1.0 - u), tol)?;
    let b = marginal_inverse_truth(spec, 2, lambda * (1.0 - v), tol)?;
    cpp_joint_cdf_truth(spec, a, b, tol)
}

pub fn copula_truth(spec: &JumpDensitySpec, regime: Regime, u: f64, v: f64, tol: f64) -> Result<f64> {
    match regime {
        Regime::General => levy_copula_truth(spec, u, v, tol),
        Regime::Cpp => cpp_copula_truth(spec, u, v, tol),
    }
}

/// Truth callables bundled with their tolerance.
#[derive(Debug, Clone)]
pub struct TruthTables {
    pub spec: JumpDensitySpec,
    pub quadrature_tol: f64,
}

impl TruthTables {
    pub fn new(spec: JumpDensitySpec, quadrature_tol: f64) -> Self {
        TruthTables { spec, quadrature_tol }
    }

    pub fn u(&self, a: f64, b: f64) -> Result<f64> {
        tail_integral_truth(&self.spec, a, b, self.quadrature_tol)
    }

    pub fn u1(&self, a: f64) -> Result<f64> {
        marginal_tail_truth(&self.spec, 1, a, self.quadrature_tol)
    }

    pub fn u2(&self, b: f64) -> Result<f64> {
        marginal_tail_truth(&self.spec, 2, b, self.quadrature_tol)
    }

    pub fn copula(&self, regime: Regime, u: f64, v: f64) -> Result<f64> {
        copula_truth(&self.spec, regime, u, v, self.quadrature_tol)
    }

    /// Writes `a,b,U,U1_a,U2_b` rows for every pair of the two grids.
    pub fn write_csv(&self, path: &Path, a_grid: &[f64], b_grid: &[f64]) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# model: {}", self.spec.label).map_err(io)?;
        writeln!(w, "a,b,U,U1_a,U2_b").map_err(io)?;
        for &a in a_grid {
            let u1 = self.u1(a)?;
            for &b in b_grid {
                writeln!(w, "{a},{b},{},{u1},{}", self.u(a, b)?, self.u2(b)?).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::density::PointMass;

    fn beta_half() -> JumpDensitySpec {
        JumpDensitySpec::beta_family(0.5).unwrap()
    }

    #[test]
    fn point_mass_tails() {
        let s = JumpDensitySpec::single_jump([1.0, 1.0], 1.0).unwrap();
        assert_eq!(tail_integral_truth(&s, 0.5, 0.5, 1e-8).unwrap(), 1.0);
        assert_eq!(tail_integral_truth(&s, 2.0, 0.5, 1e-8).unwrap(), 0.0);
        assert_eq!(tail_integral_truth(&s, 0.0, 0.0, 1e-8).unwrap(), 1.0);
    }

    #[test]
    fn origin_query_on_infinite_activity_fails() {
        assert!(tail_integral_truth(&beta_half(), 0.0, 0.0, 1e-8).is_err());
    }

    /// Independent Cartesian route: tensor Gauss-Legendre over the
    /// quadrant corner in x-coordinates, truncated at 60.
    fn cartesian_tail(spec: &JumpDensitySpec, a: f64, b: f64, panels: usize) -> f64 {
        let edges = |lo: f64| -> Vec<f64> {
            let mut e = vec![lo];
            let mut x = lo;
            let mut w = 0.01_f64.max(lo * 0.1);
            while x < 60.0 {
                x = (x + w).min(60.0);
                e.push(x);
                w = (w * 1.5).min(60.0 / panels as f64);
            }
            e
        };
        let (x1, w1) = crate::quad::composite_gl_edges(&edges(a), 12);
        let (x2, w2) = crate::quad::composite_gl_edges(&edges(b), 12);
        let mut s = 0.0;
        for (p, wp) in x1.iter().zip(&w1) {
            for (q, wq) in x2.iter().zip(&w2) {
                s += wp * wq * spec.density(*p, *q).unwrap();
            }
        }
        s
    }

    #[test]
    fn beta_tail_matches_cartesian_oracle() {
        let s = beta_half();
        let polar = tail_integral_truth(&s, 1.0, 1.0, 1e-8).unwrap();
        let cart = cartesian_tail(&s, 1.0, 1.0, 120);
        let cart_fine = cartesian_tail(&s, 1.0, 1.0, 240);
        assert!((cart - cart_fine).abs() < 1e-10 * cart);
        assert!((polar - cart).abs() < 1e-8 * cart, "{polar} vs {cart}");
        // frozen from the Cartesian oracle
        assert!((polar - 0.063_827_279_0).abs() < 1e-9, "{polar}");
    }

    #[test]
    fn marginal_consistency() {
        let s = beta_half();
        let t = TruthTables::new(s, 1e-9);
        let a = 0.7;
        assert_eq!(t.u(a, 0.0).unwrap(), t.u1(a).unwrap());
        // symmetric density: both marginals coincide
        assert!((t.u1(a).unwrap() - t.u2(a).unwrap()).abs() < 1e-9 * t.u1(a).unwrap());
        assert!(t.u(a, 0.3).unwrap() <= t.u1(a).unwrap().min(t.u2(0.3).unwrap()));
    }

    #[test]
    fn inverse_round_trip() {
        let s = beta_half();
        for u in [0.1, 1.0, 5.0] {
            let x = marginal_inverse_truth(&s, 1, u, 1e-8).unwrap();
            let back = marginal_tail_truth(&s, 1, x, 1e-10).unwrap();
            assert!((back - u).abs() < 1e-8 * u, "u={u} x={x} back={back}");
        }
        let u1 = marginal_tail_truth(&s, 1, 1.0, 1e-10).unwrap();
        let x = marginal_inverse_truth(&s, 1, u1, 1e-8).unwrap();
        assert!((x - 1.0).abs() < 1e-7);
    }

    #[test]
    fn cpp_inverse_half_mass() {
        let s = JumpDensitySpec::cpp_log(1.0).unwrap();
        let x = marginal_inverse_truth(&s, 1, 0.5, 1e-8).unwrap();
        // bisection oracle against the quadrature marginal
        let (mut lo, mut hi) = (1e-6, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if marginal_tail_truth(&s, 1, mid, 1e-10).unwrap() > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((x - lo).abs() < 1e-7, "{x} vs {lo}");
        assert!((x - 0.256_423_83).abs() < 1e-6, "{x}");
        assert!(marginal_inverse_truth(&s, 1, 1.0, 1e-8).is_err());
    }

    #[test]
    fn diagonal_point_masses_give_comonotone_copula() {
        let pts: Vec<PointMass> = (1..=5)
            .map(|j| PointMass {
                location: [j as f64 * 0.4, j as f64 * 0.4],
                weight: 0.2 * j as f64,
            })
            .collect();
        let s = JumpDensitySpec::point_masses(pts).unwrap();
        // marginal tail values at the atoms
        let levels: Vec<f64> = (1..=5)
            .map(|j| marginal_tail_truth(&s, 1, j as f64 * 0.4, 1e-8).unwrap())
            .collect();
        for &u in &levels {
            for &v in &levels {
                let c = levy_copula_truth(&s, u, v, 1e-8).unwrap();
                assert!((c - u.min(v)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn independence_product_gives_product_copula() {
        let s = JumpDensitySpec::custom("exp_product", 45.0, |x, y| (-x - y).exp() * (x.powi(4) + y.powi(4))).unwrap();
        assert!((s.intensity().finite().unwrap() - 1.0).abs() < 1e-8);
        for (u, v) in [(0.2, 0.3), (0.5, 0.5), (0.8, 0.35)] {
            let c = cpp_copula_truth(&s, u, v, 1e-9).unwrap();
            assert!((c - u * v).abs() < 1e-6, "{u},{v}: {c}");
        }
    }

    #[test]
    fn cpp_single_atom_joint_cdf() {
        let s = JumpDensitySpec::single_jump([1.0, 1.0], 1.0).unwrap();
        assert_eq!(cpp_joint_cdf_truth(&s, 0.5, 0.5, 1e-8).unwrap(), 0.0);
        assert_eq!(cpp_joint_cdf_truth(&s, 2.0, 2.0, 1e-8).unwrap(), 1.0);
    }

    #[test]
    fn beta_levy_copula_golden() {
        let c = levy_copula_truth(&beta_half(), 1.0, 1.0, 1e-8).unwrap();
        assert!((c - 0.504_937_25).abs() < 1e-6, "{c}");
    }

    #[test]
    fn blumenthal_getoor_index() {
        // int_{eps<|x|<1} |x|^p nu(dx) grows like eps^{p - beta}; estimate
        // beta from the log-slope of the power-free mass between two eps.
        for beta in [0.5, 1.5] {
            let s = JumpDensitySpec::beta_family(beta).unwrap();
            let mass = |eps: f64| {
                super::super::density::ANGULAR_MASS
                    * integrate_radial(|r: f64| s.radial_g(r), eps, 1.0, &[], QuadOptions::rel(1e-12))
                        .unwrap()
                        .value
            };
            let (e1, e2) = (1e-6, 1e-5);
            let slope = (mass(e1).ln() - mass(e2).ln()) / (e2.ln() - e1.ln());
            assert!((slope - beta).abs() < 0.1, "beta {beta}: {slope}");
        }
    }
}
