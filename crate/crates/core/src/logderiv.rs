//! Fourth partial derivatives of the log characteristic function.
//!
//! For `Psi = log phi`,
//! `d^4 Psi = phi''''/phi - 4 phi' phi'''/phi^2 - 3 (phi''/phi)^2
//!            + 12 phi'^2 phi''/phi^3 - 6 (phi'/phi)^4`
//! along each coordinate. The Gaussian part of `Psi` is quadratic, so it
//! drops out of the sum over both coordinates.

use num_complex::Complex64;

use crate::charfn::CharFnGrid;
use crate::error::{Error, Result};

/// `c / sqrt(n)`, or 0 for exact grids (`n = 0`).
pub fn default_floor(n: usize, c: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        c / (n as f64).sqrt()
    }
}

/// `phi` with its modulus raised to at least `floor`, phase kept.
fn floored(phi: Complex64, floor: f64) -> (Complex64, bool) {
    let m = phi.norm();
    if m >= floor {
        (phi, false)
    } else if m > 0.0 {
        (phi * (floor / m), true)
    } else {
        (Complex64::new(floor, 0.0), true)
    }
}

fn combine(phi: Complex64, d: [Complex64; 4]) -> Complex64 {
    let r1 = d[0] / phi;
    let r2 = d[1] / phi;
    let r3 = d[2] / phi;
    let r4 = d[3] / phi;
    r4 - r1 * r3 * 4.0 - r2 * r2 * 3.0 + r1 * r1 * r2 * 12.0 - r1.powi(4) * 6.0
}

/// `d^4 Psi / du_k^4` on the grid (`k` in {1, 2}) and the number of points
/// where the floor was applied.
pub fn fourth_log_derivative(grid: &CharFnGrid, k: usize, floor: f64) -> Result<(Vec<Complex64>, usize)> {
    if k != 1 && k != 2 {
        return Err(Error::InvalidParameter(format!("coordinate must be 1 or 2, got {k}")));
    }
    if !(floor >= 0.0) {
        return Err(Error::InvalidParameter(format!("floor must be >= 0, got {floor}")));
    }
    let mut clipped = 0;
    let out = (0..grid.len())
        .map(|i| {
            let (phi, hit) = floored(grid.phi[i], floor);
            clipped += hit as usize;
            let d = [1, 2, 3, 4].map(|l| grid.values(l, k)[i]);
            combine(phi, d)
        })
        .collect();
    Ok((out, clipped))
}

/// `Q(u) = d^4 Psi/du1^4 + d^4 Psi/du2^4` with conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct LogDerivGrid {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub q: Vec<Complex64>,
    pub min_modulus: f64,
    pub clipped_fraction: f64,
    pub floor: f64,
    pub n: usize,
}

pub fn log_derivative_grid(grid: &CharFnGrid, floor: f64) -> Result<LogDerivGrid> {
    let (q1, clipped) = fourth_log_derivative(grid, 1, floor)?;
    let (q2, _) = fourth_log_derivative(grid, 2, floor)?;
    let q: Vec<Complex64> = q1.iter().zip(&q2).map(|(a, b)| a + b).collect();
    if q.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Degenerate(
            "the characteristic function vanishes on the grid; use a positive floor".into(),
        ));
    }
    let min_modulus = grid.phi.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    Ok(LogDerivGrid {
        u1: grid.u1.clone(),
        u2: grid.u2.clone(),
        q,
        min_modulus,
        clipped_fraction: if grid.is_empty() {
            0.0
        } else {
            clipped as f64 / grid.len() as f64
        },
        floor,
        n: grid.n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditioningReport {
    pub min_modulus: f64,
    pub clipped_fraction: f64,
    pub well_conditioned: bool,
}

/// Diagnostics over the support square `[-1/h, 1/h]^2`.
pub fn conditioning_report(grid: &CharFnGrid, h: f64, floor: f64) -> Result<ConditioningReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
    }
    let lim = 1.0 / h * (1.0 + 1e-12);
    let mut min_modulus = f64::INFINITY;
    let (mut total, mut clipped) = (0usize, 0usize);
    for i in 0..grid.len() {
        let u = grid.point(i);
        if u[0].abs() <= lim && u[1].abs() <= lim {
            let m = grid.phi[i].norm();
            min_modulus = min_modulus.min(m);
            total += 1;
            clipped += (m < floor) as usize;
        }
    }
    if total == 0 {
        return Err(Error::GridMismatch("no grid point lies in the support square".into()));
    }
    let clipped_fraction = clipped as f64 / total as f64;
    Ok(ConditioningReport {
        min_modulus,
        clipped_fraction,
        well_conditioned: clipped == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::{ecf_from_points, symmetric_axis, EcfMethod};
    use crate::levy_model::{JumpDensitySpec, LevyModelSpec};
    use crate::simulate::{exact_charfn, ExactCharFn};
    use proptest::prelude::*;

    fn max_norm(v: &[Complex64]) -> f64 {
        v.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn gaussian_grid_vanishes() {
        let m = LevyModelSpec::gaussian([[1.0, 0.3], [0.3, 2.0]]).unwrap();
        let ax = symmetric_axis(10, 0.4);
        let g = exact_charfn(&m, &ax, &ax).unwrap();
        let q = log_derivative_grid(&g, 0.0).unwrap();
        assert!(max_norm(&q.q) <= 1e-10, "{}", max_norm(&q.q));
    }

    #[test]
    fn single_jump_fourth_derivative() {
        let m = LevyModelSpec::cpp(JumpDensitySpec::single_jump([1.0, 1.0], 1.0).unwrap()).unwrap();
        let ax = symmetric_axis(8, 0.6);
        let g = exact_charfn(&m, &ax, &ax).unwrap();
        let (d1, clipped) = fourth_log_derivative(&g, 1, 0.0).unwrap();
        assert_eq!(clipped, 0);
        for i in 0..g.len() {
            let u = g.point(i);
            let e = Complex64::from_polar(1.0, u[0] + u[1]);
            assert!((d1[i] - e).norm() < 1e-12, "{} vs {}", d1[i], e);
        }
        let centre = g.index(8, 8);
        assert!((d1[centre] - 1.0).norm() < 1e-14);
        let rep = conditioning_report(&g, 1.0 / 4.8, 0.0).unwrap();
        assert!(rep.min_modulus >= (-2f64).exp() && rep.well_conditioned);
    }

    #[test]
    fn q_at_origin_is_weighted_mass() {
        // Q(0) = int (x1^4 + x2^4) nu = int f over the quadrant = (pi/2) Gamma(3.5)
        let m = LevyModelSpec::compensated([[0.0; 2]; 2], JumpDensitySpec::beta_family(0.5).unwrap()).unwrap();
        let e = ExactCharFn::new(&m, 1.0).unwrap();
        let g = e.grid(&[0.0], &[0.0]).unwrap();
        let q = log_derivative_grid(&g, 0.0).unwrap();
        let expected = std::f64::consts::FRAC_PI_2 * 3.323_350_970_447_842_6;
        assert!((q.q[0].re - expected).abs() < 1e-10 * expected, "{}", q.q[0]);
        assert!(q.q[0].im.abs() < 1e-12);
    }

    #[test]
    fn matches_weighted_fourier_transform() {
        // Q(u) = F((x1^4 + x2^4) nu)(u), against an independent tensor quadrature
        let spec = JumpDensitySpec::cpp_log(1.0).unwrap();
        let m = LevyModelSpec::cpp(spec.clone()).unwrap();
        let wf = crate::levy_model::WeightedFourier::new(&spec).unwrap();
        let ax: Vec<f64> = (-4..=4).map(|k| 1.7 * k as f64).collect();
        let g = exact_charfn(&m, &ax, &ax).unwrap();
        let q = log_derivative_grid(&g, 0.0).unwrap();
        let reference = wf.eval_grid(&ax, &ax);
        for (a, b) in q.q.iter().zip(&reference) {
            assert!((a - b).norm() < 1e-6 * (1.0 + b.norm()), "{a} vs {b}");
        }
    }

    #[test]
    fn brownian_invariance_and_additivity() {
        let a = LevyModelSpec::cpp(JumpDensitySpec::single_jump([1.0, 0.5], 0.7).unwrap()).unwrap();
        let b = LevyModelSpec::cpp(JumpDensitySpec::single_jump([0.2, 2.0], 0.4).unwrap()).unwrap();
        let ax = symmetric_axis(7, 0.55);
        let ga = exact_charfn(&a, &ax, &ax).unwrap();
        let gb = exact_charfn(&b, &ax, &ax).unwrap();
        let qa = log_derivative_grid(&ga, 0.0).unwrap();
        let qb = log_derivative_grid(&gb, 0.0).unwrap();
        let gs = ga.times_gaussian([[1.0, 0.4], [0.4, 0.8]]);
        let qs = log_derivative_grid(&gs, 0.0).unwrap();
        for (x, y) in qa.q.iter().zip(&qs.q) {
            assert!((x - y).norm() <= 1e-9);
        }
        // product of independent characteristic functions via the Leibniz rule
        let mut prod = ga.clone();
        for i in 0..ga.len() {
            prod.phi[i] = ga.phi[i] * gb.phi[i];
            for k in 1..=2 {
                let fa: Vec<Complex64> = (0..=4).map(|l| ga.values(l, k)[i]).collect();
                let fb: Vec<Complex64> = (0..=4).map(|l| gb.values(l, k)[i]).collect();
                const BINOM: [[f64; 5]; 5] = [
                    [1.0, 0.0, 0.0, 0.0, 0.0],
                    [1.0, 1.0, 0.0, 0.0, 0.0],
                    [1.0, 2.0, 1.0, 0.0, 0.0],
                    [1.0, 3.0, 3.0, 1.0, 0.0],
                    [1.0, 4.0, 6.0, 4.0, 1.0],
                ];
                for l in 1..=4 {
                    let v: Complex64 = (0..=l).map(|j| fa[j] * fb[l - j] * BINOM[l][j]).sum();
                    prod.values_mut(l, k)[i] = v;
                }
            }
        }
        let qp = log_derivative_grid(&prod, 0.0).unwrap();
        for i in 0..qp.q.len() {
            assert!((qp.q[i] - qa.q[i] - qb.q[i]).norm() <= 1e-9);
        }
    }

    #[test]
    fn conditioning_of_constant_and_wild_panels() {
        let ax = symmetric_axis(6, 0.5);
        let g = ecf_from_points(&[[0.0, 0.0], [0.0, 0.0]], &ax, &ax, EcfMethod::Direct).unwrap();
        let rep = conditioning_report(&g, 1.0 / 3.0, default_floor(2, 1.0)).unwrap();
        assert_eq!(rep.min_modulus, 1.0);
        assert_eq!(rep.clipped_fraction, 0.0);
        assert!(rep.well_conditioned);
        // two points at distance pi along u1: phi_hat(1, 0) = 0 exactly
        let w = ecf_from_points(&[[0.0, 0.0], [std::f64::consts::PI, 0.0]], &ax, &ax, EcfMethod::Direct).unwrap();
        let floor = default_floor(2, 1.0);
        let rep = conditioning_report(&w, 1.0 / 3.0, floor).unwrap();
        assert!(rep.clipped_fraction > 0.0 && !rep.well_conditioned);
        let q = log_derivative_grid(&w, floor).unwrap();
        assert!(q.q.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
        assert!(q.clipped_fraction > 0.0);
    }

    #[test]
    fn zero_without_floor_is_degenerate() {
        let ax = symmetric_axis(2, 0.5);
        let w = CharFnGrid::zeros(ax.clone(), ax, 3);
        assert!(log_derivative_grid(&w, 0.0).is_err());
        assert!(log_derivative_grid(&w, 0.1).is_ok());
    }

    proptest! {
        #[test]
        fn floor_keeps_phase(re in -1.0f64..1.0, im in -1.0f64..1.0, floor in 0.0f64..2.0) {
            let z = Complex64::new(re, im);
            let (f, hit) = floored(z, floor);
            prop_assert!(f.norm() >= floor * (1.0 - 1e-12));
            if hit && z.norm() > 0.0 {
                prop_assert!((f.arg() - z.arg()).abs() < 1e-12);
            } else if !hit {
                prop_assert_eq!(f, z);
            }
        }

        #[test]
        fn point_mass_fourth_derivative(x in 0.1f64..3.0, y in 0.1f64..3.0, w in 0.1f64..2.0, u1 in -5.0f64..5.0, u2 in -5.0f64..5.0) {
            // Psi = w (e^{i<u,x>} - 1): d^4/du1^4 Psi = w x^4 e^{i<u,x>}
            let m = LevyModelSpec::cpp(JumpDensitySpec::single_jump([x, y], w).unwrap()).unwrap();
            let g = exact_charfn(&m, &[u1], &[u2]).unwrap();
            let (d, _) = fourth_log_derivative(&g, 1, 0.0).unwrap();
            let e = Complex64::from_polar(w * x.powi(4), u1 * x + u2 * y);
            prop_assert!((d[0] - e).norm() < 1e-9 * (1.0 + e.norm()));
        }
    }
}
