//! Empirical characteristic function and derivatives on a grid.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::CharFnGrid;
use crate::error::{Error, Result};
use crate::simulate::IncrementPanel;

/// Evaluation path for [`ecf_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcfMethod {
    /// Direct summation over the (deduplicated) sample.
    Direct,
    /// Gaussian-gridding non-uniform FFT; needs uniform symmetric axes.
    Gridding,
    /// Gridding when the axes allow it and the direct cost is large.
    Auto,
}

const I_POW: [Complex64; 5] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
    Complex64::new(1.0, 0.0),
];

/// Groups identical increments; returns (point, multiplicity) in a fixed order.
fn dedupe(z: &[[f64; 2]]) -> Vec<([f64; 2], f64)> {
    let mut map: BTreeMap<(u64, u64), ([f64; 2], f64)> = BTreeMap::new();
    for p in z {
        let e = map.entry((p[0].to_bits(), p[1].to_bits())).or_insert((*p, 0.0));
        e.1 += 1.0;
    }
    map.into_values().collect()
}

/// `phi_hat(u) = n^-1 sum_t e^{i<u,Z_t>}` and `d^l/du_k^l phi_hat(u) =
/// n^-1 sum_t (i Z_{t,k})^l e^{i<u,Z_t>}` on the tensor grid `u1 x u2`.
pub fn ecf_grid(panel: &IncrementPanel, u1: &[f64], u2: &[f64], method: EcfMethod) -> Result<CharFnGrid> {
    ecf_from_points(&panel.z, u1, u2, method)
}

pub fn ecf_from_points(z: &[[f64; 2]], u1: &[f64], u2: &[f64], method: EcfMethod) -> Result<CharFnGrid> {
    if z.is_empty() {
        return Err(Error::Empty("the increment panel has no observations".into()));
    }
    if u1.is_empty() || u2.is_empty() || u1.iter().chain(u2).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("grid axes must be nonempty and finite".into()));
    }
    let uniform = uniform_symmetric(u1).zip(uniform_symmetric(u2));
    let use_gridding = match method {
        EcfMethod::Direct => false,
        EcfMethod::Gridding => {
            if uniform.is_none() {
                return Err(Error::GridMismatch(
                    "gridding needs uniform axes symmetric about zero".into(),
                ));
            }
            true
        }
        EcfMethod::Auto => uniform.is_some() && (z.len() as f64) * (u1.len() * u2.len()) as f64 > 5e7,
    };
    let mut g = if use_gridding {
        let ((k1, d1), (k2, d2)) = uniform.unwrap();
        gridding(z, u1, u2, k1, d1, k2, d2)
    } else {
        direct(z, u1, u2)
    };
    g.approximate = use_gridding;
    Ok(g)
}

/// Returns `(K, du)` when the axis is `k du`, `k = -K..=K`.
pub(crate) fn uniform_symmetric(axis: &[f64]) -> Option<(usize, f64)> {
    if axis.len().is_multiple_of(2) {
        return None;
    }
    let k = axis.len() / 2;
    if k == 0 {
        return if axis[0] == 0.0 { Some((0, 1.0)) } else { None };
    }
    let du = axis[axis.len() - 1] / k as f64;
    if du <= 0.0 {
        return None;
    }
    let ok = axis
        .iter()
        .enumerate()
        .all(|(i, &u)| (u - (i as f64 - k as f64) * du).abs() <= 1e-12 * du * k as f64);
    ok.then_some((k, du))
}

fn direct(z: &[[f64; 2]], u1: &[f64], u2: &[f64]) -> CharFnGrid {
    let n = z.len();
    let pts = dedupe(z);
    let (n1, n2) = (u1.len(), u2.len());
    let mut g = CharFnGrid::zeros(u1.to_vec(), u2.to_vec(), n);
    // sums of z_k^l e^{i<u,z>} weighted by multiplicity
    let mut acc = vec![[Complex64::new(0.0, 0.0); 9]; n1 * n2];
    let mut b = vec![Complex64::new(0.0, 0.0); n2];
    for (p, c) in &pts {
        for (bj, &v) in b.iter_mut().zip(u2) {
            *bj = Complex64::from_polar(1.0, v * p[1]);
        }
        let pw1 = [1.0, p[0], p[0] * p[0], p[0].powi(3), p[0].powi(4)];
        let pw2 = [1.0, p[1], p[1] * p[1], p[1].powi(3), p[1].powi(4)];
        for (i, &v) in u1.iter().enumerate() {
            let a = Complex64::from_polar(*c, v * p[0]);
            let row = &mut acc[i * n2..(i + 1) * n2];
            for (cell, bj) in row.iter_mut().zip(&b) {
                let e = a * bj;
                cell[0] += e;
                for l in 1..=4 {
                    cell[l] += e * pw1[l];
                    cell[4 + l] += e * pw2[l];
                }
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for (idx, cell) in acc.iter().enumerate() {
        g.phi[idx] = cell[0] * inv_n;
        for l in 1..=4 {
            g.derivs[0][l - 1][idx] = cell[l] * I_POW[l] * inv_n;
            g.derivs[1][l - 1][idx] = cell[4 + l] * I_POW[l] * inv_n;
        }
    }
    g
}

/// Half-width of the Gaussian spreading window, in oversampled grid cells.
const SPREAD: usize = 12;
const OVERSAMPLE: f64 = 2.0;

fn fft_size(min: usize) -> usize {
    let mut m = min.max(2);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 && m.is_multiple_of(2) {
            return m;
        }
        m += 1;
    }
}

struct Axis {
    modes: usize,
    half: usize,
    size: usize,
    tau: f64,
}

impl Axis {
    fn new(half: usize) -> Self {
        let modes = 2 * half + 1;
        let size = fft_size(((OVERSAMPLE * modes as f64).ceil() as usize).max(2 * SPREAD + 2));
        let ratio = size as f64 / modes as f64;
        let tau = std::f64::consts::PI * SPREAD as f64 / ((modes * modes) as f64 * ratio * (ratio - 0.5));
        Axis { modes, half, size, tau }
    }

    /// Window start index and kernel values for a point at angle `x`.
    fn window(&self, x: f64, out: &mut [f64]) -> i64 {
        let h = 2.0 * std::f64::consts::PI / self.size as f64;
        let m0 = (x / h).floor() as i64;
        let start = m0 - SPREAD as i64 + 1;
        for (j, o) in out.iter_mut().enumerate() {
            let d = x - (start + j as i64) as f64 * h;
            *o = (-d * d / (4.0 * self.tau)).exp();
        }
        start
    }

    /// Deconvolution factor `sqrt(pi/tau) e^{k^2 tau} / size`.
    fn correction(&self, k: i64) -> f64 {
        (std::f64::consts::PI / self.tau).sqrt() * ((k * k) as f64 * self.tau).exp() / self.size as f64
    }
}

/// Type-1 non-uniform FFT (Greengard-Lee Gaussian gridding) of the nine
/// strength sets `z_k^l / n`.
fn gridding(z: &[[f64; 2]], u1: &[f64], u2: &[f64], k1: usize, du1: f64, k2: usize, du2: f64) -> CharFnGrid {
    let n = z.len();
    let ax1 = Axis::new(k1);
    let ax2 = Axis::new(k2);
    let w = 2 * SPREAD;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut starts = Vec::with_capacity(n);
    let mut kern1 = vec![0.0; n * w];
    let mut kern2 = vec![0.0; n * w];
    for (t, p) in z.iter().enumerate() {
        let x1 = (du1 * p[0]).rem_euclid(two_pi);
        let x2 = (du2 * p[1]).rem_euclid(two_pi);
        let s1 = ax1.window(x1, &mut kern1[t * w..(t + 1) * w]);
        let s2 = ax2.window(x2, &mut kern2[t * w..(t + 1) * w]);
        starts.push((s1, s2));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft1: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(ax1.size);
    let fft2: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(ax2.size);
    let (r1, r2) = (ax1.size, ax2.size);
    let mut buf = vec![Complex64::new(0.0, 0.0); r1 * r2];
    let mut col = vec![Complex64::new(0.0, 0.0); r1];
    let mut g = CharFnGrid::zeros(u1.to_vec(), u2.to_vec(), n);
    let inv_n = 1.0 / n as f64;
    let corr1: Vec<f64> = (-(k1 as i64)..=k1 as i64).map(|k| ax1.correction(k)).collect();
    let corr2: Vec<f64> = (-(k2 as i64)..=k2 as i64).map(|k| ax2.correction(k)).collect();
    for set in 0..9 {
        let (coord, power) = if set == 0 {
            (0, 0)
        } else {
            ((set - 1) / 4, (set - 1) % 4 + 1)
        };
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (t, p) in z.iter().enumerate() {
            let c = p[coord].powi(power as i32) * inv_n;
            if c == 0.0 {
                continue;
            }
            let (s1, s2) = starts[t];
            let e1 = &kern1[t * w..(t + 1) * w];
            let e2 = &kern2[t * w..(t + 1) * w];
            for (a, &v1) in e1.iter().enumerate() {
                let m1 = (s1 + a as i64).rem_euclid(r1 as i64) as usize;
                let cv = c * v1;
                let row = &mut buf[m1 * r2..(m1 + 1) * r2];
                let m2s = s2.rem_euclid(r2 as i64) as usize;
                for (b, &v2) in e2.iter().enumerate() {
                    let mut m2 = m2s + b;
                    if m2 >= r2 {
                        m2 -= r2;
                    }
                    row[m2].re += cv * v2;
                }
            }
        }
        for row in buf.chunks_mut(r2) {
            fft2.process(row);
        }
        for j in 0..r2 {
            for i in 0..r1 {
                col[i] = buf[i * r2 + j];
            }
            fft1.process(&mut col);
            for i in 0..r1 {
                buf[i * r2 + j] = col[i];
            }
        }
        let phase = if set == 0 { I_POW[0] } else { I_POW[power] };
        let target = if set == 0 {
            &mut g.phi
        } else {
            &mut g.derivs[coord][power - 1]
        };
        for (i1, kk1) in (-(k1 as i64)..=k1 as i64).enumerate() {
            let m1 = kk1.rem_euclid(r1 as i64) as usize;
            for (i2, kk2) in (-(k2 as i64)..=k2 as i64).enumerate() {
                let m2 = kk2.rem_euclid(r2 as i64) as usize;
                target[i1 * u2.len() + i2] = buf[m1 * r2 + m2] * (corr1[i1] * corr2[i2]) * phase;
            }
        }
    }
    // exact moments at the origin
    let centre = ax1.half * u2.len() + ax2.half;
    g.phi[centre] = Complex64::new(1.0, 0.0);
    for coord in 0..2 {
        for l in 1..=4 {
            let m: f64 = z.iter().map(|p| p[coord].powi(l as i32)).sum::<f64>() * inv_n;
            g.derivs[coord][l - 1][centre] = I_POW[l] * m;
        }
    }
    debug_assert_eq!(ax1.modes, u1.len());
    debug_assert_eq!(ax2.modes, u2.len());
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::grid::symmetric_axis;
    use rand::{Rng, SeedableRng};

    fn pts(v: &[[f64; 2]]) -> Vec<[f64; 2]> {
        v.to_vec()
    }

    #[test]
    fn origin_panel() {
        let ax = symmetric_axis(3, 0.7);
        let g = ecf_from_points(&pts(&[[0.0, 0.0]]), &ax, &ax, EcfMethod::Direct).unwrap();
        assert!(g.phi.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        assert!(g.derivs.iter().flatten().flatten().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn two_point_symmetry() {
        let ax = symmetric_axis(5, 0.37);
        let g = ecf_from_points(&pts(&[[1.0, 0.0], [-1.0, 0.0]]), &ax, &ax, EcfMethod::Direct).unwrap();
        for idx in 0..g.len() {
            let u = g.point(idx);
            assert!((g.phi[idx] - Complex64::new(u[0].cos(), 0.0)).norm() < 1e-15);
            assert!((g.values(2, 1)[idx] + Complex64::new(u[0].cos(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn single_point_fourth_derivative() {
        let ax = symmetric_axis(4, 0.5);
        let g = ecf_from_points(&pts(&[[1.0, 1.0]]), &ax, &ax, EcfMethod::Direct).unwrap();
        for idx in 0..g.len() {
            let u = g.point(idx);
            let e = Complex64::from_polar(1.0, u[0] + u[1]);
            assert!((g.values(4, 2)[idx] - e).norm() < 1e-15);
        }
    }

    #[test]
    fn empty_panel_rejected() {
        assert!(ecf_from_points(&[], &[0.0], &[0.0], EcfMethod::Direct).is_err());
    }

    #[test]
    fn gridding_matches_direct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let z: Vec<[f64; 2]> = (0..700)
            .map(|_| [rng.random_range(-3.0..8.0), rng.random_range(-2.0..12.0)])
            .collect();
        let a1 = symmetric_axis(20, 0.31);
        let a2 = symmetric_axis(13, 0.45);
        let d = ecf_from_points(&z, &a1, &a2, EcfMethod::Direct).unwrap();
        let f = ecf_from_points(&z, &a1, &a2, EcfMethod::Gridding).unwrap();
        assert!(f.approximate && !d.approximate);
        for l in 0..=4 {
            for k in 1..=2 {
                let scale = 1.0 + 12f64.powi(l as i32);
                let err = d
                    .values(l, k)
                    .iter()
                    .zip(f.values(l, k))
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-10 * scale, "l={l} k={k} err={err:e}");
            }
        }
    }

    #[test]
    fn gridding_needs_uniform_axes() {
        let z = pts(&[[1.0, 2.0]]);
        assert!(ecf_from_points(&z, &[0.0, 1.0, 3.0], &[0.0], EcfMethod::Gridding).is_err());
    }
}
