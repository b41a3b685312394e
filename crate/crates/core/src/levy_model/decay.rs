//! Fourier decay of the weighted density `(x1^4 + x2^4) nu`.

use num_complex::Complex64;

use super::density::{DensityKind, JumpDensitySpec, CUTOFF_INNER, CUTOFF_OUTER};
use crate::error::{Error, Result};
use crate::quad::{composite_gl_edges, integrate_with_breaks, QuadOptions};

/// Outcome of [`check_fourier_decay`].
#[derive(Debug, Clone, Copy)]
pub struct DecayReport {
    /// `max |F f(u)| (1 + |u1|)(1 + |u2|)` over the grid.
    pub c_estimate: f64,
    pub worst_u: [f64; 2],
    /// Total-variation constant bounding `|u1 u2| |F f(u)|`.
    pub lambda_g: f64,
}

/// Tensor Gauss-Legendre evaluation of `F f(u) = int e^{i<u,x>} f(x) dx`
/// over the quadrant, where `f` is the weighted density.
pub struct WeightedFourier {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `f` at node pairs, row-major in (x1, x2)
    values: Vec<f64>,
}

impl WeightedFourier {
    pub fn new(spec: &JumpDensitySpec) -> Result<Self> {
        if spec.is_point_masses() {
            return Err(Error::Unsupported(
                "Fourier decay needs a density, not point masses".into(),
            ));
        }
        let radius = match &spec.kind {
            DensityKind::Custom(c) => c.support_radius,
            _ => 36.0,
        };
        let mut edges = vec![
            0.0,
            1e-3,
            3e-3,
            1e-2,
            3e-2,
            0.1,
            0.2,
            0.3,
            0.4,
            CUTOFF_INNER,
            0.625,
            CUTOFF_OUTER,
            1.0,
        ];
        edges.retain(|&e| e < radius);
        let mut x = *edges.last().unwrap();
        while x < radius {
            x = (x + 0.2).min(radius);
            edges.push(x);
        }
        let (nodes, weights) = composite_gl_edges(&edges, 16);
        let n = nodes.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = spec.f(nodes[i], nodes[j]).unwrap_or(0.0);
            }
        }
        Ok(WeightedFourier { nodes, weights, values })
    }

    fn phases(&self, u: f64) -> Vec<Complex64> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| Complex64::from_polar(*w, u * x))
            .collect()
    }

    /// Values on the tensor grid `u1s x u2s`, row-major in `u1`.
    pub fn eval_grid(&self, u1s: &[f64], u2s: &[f64]) -> Vec<Complex64> {
        let n = self.nodes.len();
        let a: Vec<Vec<Complex64>> = u1s.iter().map(|&u| self.phases(u)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); u1s.len() * u2s.len()];
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for (j2, &u2) in u2s.iter().enumerate() {
            let b = self.phases(u2);
            for i in 0..n {
                let row = &self.values[i * n..(i + 1) * n];
                let mut s = Complex64::new(0.0, 0.0);
                for (v, bj) in row.iter().zip(&b) {
                    s += bj * *v;
                }
                col[i] = s;
            }
            for (j1, ai) in a.iter().enumerate() {
                let mut s = Complex64::new(0.0, 0.0);
                for (x, c) in ai.iter().zip(&col) {
                    s += x * c;
                }
                out[j1 * u2s.len() + j2] = s;
            }
        }
        out
    }

    pub fn eval(&self, u: [f64; 2]) -> Complex64 {
        self.eval_grid(&[u[0]], &[u[1]])[0]
    }
}

/// Terms of the total-variation constant of a function `g` on the shifted
/// quadrant `[a, inf) x [b, inf)`.
#[derive(Debug, Clone, Copy)]
pub struct AppendixTerms {
    pub corner: f64,
    pub edge1: f64,
    pub edge2: f64,
    pub mixed: f64,
}

impl AppendixTerms {
    pub fn total(&self) -> f64 {
        self.corner + self.edge1 + self.edge2 + self.mixed
    }
}

fn fd_step(x: f64) -> f64 {
    1e-3 * x.abs().max(1e-2)
}

fn geometric_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut x = lo.max(1e-3) * 2.0;
    while x < hi {
        v.push(x);
        x *= 2.0;
    }
    v
}

/// Computes the corner, edge and mixed-derivative terms numerically, with
/// derivatives by central differences and the domain truncated at `a + reach`.
pub fn appendix_constant<G: Fn(f64, f64) -> f64>(g: G, a: f64, b: f64, reach: f64) -> Result<AppendixTerms> {
    let opts = QuadOptions::rel(1e-8).with_abs(1e-14);
    // fourth-order central differences
    const STENCIL: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let d1 = |x: f64, y: f64| {
        let h = fd_step(x);
        STENCIL.iter().map(|(o, c)| c * g(x + o * h, y)).sum::<f64>() / (12.0 * h)
    };
    let d2 = |x: f64, y: f64| {
        let h = fd_step(y);
        STENCIL.iter().map(|(o, c)| c * g(x, y + o * h)).sum::<f64>() / (12.0 * h)
    };
    let d12 = |x: f64, y: f64| {
        let hx = fd_step(x);
        let hy = fd_step(y);
        let mut s = 0.0;
        for (ox, cx) in STENCIL {
            for (oy, cy) in STENCIL {
                s += cx * cy * g(x + ox * hx, y + oy * hy);
            }
        }
        s / (144.0 * hx * hy)
    };
    let bx = geometric_breaks(a, a + reach);
    let by = geometric_breaks(b, b + reach);
    let edge1 = integrate_with_breaks(|x| d1(x, b).abs(), a, a + reach, &bx, opts)?.value;
    let edge2 = integrate_with_breaks(|y| d2(a, y).abs(), b, b + reach, &by, opts)?.value;
    let mut failure = None;
    let mixed = integrate_with_breaks(
        |x| match integrate_with_breaks(
            |y| d12(x, y).abs(),
            b,
            b + reach,
            &by,
            QuadOptions::rel(1e-9).with_abs(1e-16),
        ) {
            Ok(e) => e.value,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        a,
        a + reach,
        &bx,
        opts,
    )?
    .value;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(AppendixTerms {
        corner: g(a, b).abs(),
        edge1,
        edge2,
        mixed,
    })
}

/// Total-variation constant of a radial weighted density `F(|x|)` on the
/// whole quadrant: `|F(0)| + 2 int |F'| + (1/2) int |r F'' - F'| dr`.
fn radial_appendix_constant(spec: &JumpDensitySpec) -> Result<f64> {
    let f = |r: f64| spec.radial_f(r);
    let d1 = |r: f64| {
        let h = fd_step(r);
        (f(r + h) - f((r - h).max(0.0))) / (r + h - (r - h).max(0.0))
    };
    let d2 = |r: f64| {
        let h = fd_step(r).min(0.5 * r);
        (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h)
    };
    let opts = QuadOptions::rel(1e-8).with_abs(1e-14);
    let breaks = [1e-3, 1e-2, 0.1, CUTOFF_INNER, CUTOFF_OUTER, 1.0, 2.0, 4.0, 8.0];
    let tv = integrate_with_breaks(|r| d1(r).abs(), 1e-9, 50.0, &breaks, opts)?.value;
    let mixed = integrate_with_breaks(|r| (r * d2(r) - d1(r)).abs(), 1e-9, 50.0, &breaks, opts)?.value;
    Ok(f(0.0).abs() + 2.0 * tv + 0.5 * mixed)
}

/// Sweeps `|F((x1^4 + x2^4) nu)(u)| (1 + |u1|)(1 + |u2|)` over `u_axes`.
pub fn check_fourier_decay(spec: &JumpDensitySpec, u1s: &[f64], u2s: &[f64]) -> Result<DecayReport> {
    let wf = WeightedFourier::new(spec)?;
    let vals = wf.eval_grid(u1s, u2s);
    let mut best = (0.0, [0.0, 0.0]);
    for (i, &u1) in u1s.iter().enumerate() {
        for (j, &u2) in u2s.iter().enumerate() {
            let c = vals[i * u2s.len() + j].norm() * (1.0 + u1.abs()) * (1.0 + u2.abs());
            if c > best.0 {
                best = (c, [u1, u2]);
            }
        }
    }
    let lambda_g = if spec.is_radial() {
        radial_appendix_constant(spec)?
    } else {
        let reach = spec.outer_radius();
        appendix_constant(|x, y| spec.f(x.max(0.0), y.max(0.0)).unwrap_or(0.0), 0.0, 0.0, reach)?.total()
    };
    Ok(DecayReport {
        c_estimate: best.0,
        worst_u: best.1,
        lambda_g,
    })
}
