//! Fourier inversion of `Q FK_h` and tail-integral queries.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::kernel::kernel_fk;
use crate::charfn::{symmetric_axis, uniform_symmetric};
use crate::error::{Error, Result};
use crate::logderiv::{ConditioningReport, LogDerivGrid};

/// Grid settings for the inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Number of u-points per axis (rounded up to odd); refined when the
    /// induced x-period would not cover `[-x_max, x_max]` with margin.
    pub grid_points: usize,
    /// Extent of the x-grid kept after inversion.
    pub x_max: f64,
    /// Target x spacing; defaults to `min(0.01, h/2)`.
    pub x_step: Option<f64>,
    /// Smallest admissible `max(a, b)`; at least four x steps.
    pub delta_floor: Option<f64>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            grid_points: 1024,
            x_max: 10.0,
            x_step: None,
            delta_floor: None,
        }
    }
}

/// Period of the x-grid relative to `x_max`.
const PERIOD_MARGIN: f64 = 2.4;

/// Largest transform length accepted.
const MAX_FFT_LEN: f64 = (1u64 << 22) as f64;

fn fft_len(min: f64) -> Result<usize> {
    if !(min <= MAX_FFT_LEN) {
        return Err(Error::InvalidParameter(format!(
            "x-grid needs a transform of length {min:e}; coarsen x_step or shrink the bandwidth"
        )));
    }
    let mut m = (min.ceil() as usize).max(8);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return Ok(m);
        }
        m += 1;
    }
}

/// u- and x-grids induced by a bandwidth and a [`SpectralConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPlan {
    pub h: f64,
    /// u-axis is `k du` for `|k| <= half`, with `half du = 1/h`.
    pub half: usize,
    pub du: f64,
    pub fft_len: usize,
    pub dx: f64,
    /// Kept x-points are `m dx` for `m = -2..=last`.
    pub last: usize,
}

impl GridPlan {
    pub fn new(h: f64, cfg: &SpectralConfig) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
        }
        if !(cfg.x_max > 0.0) {
            return Err(Error::InvalidParameter("x_max must be positive".into()));
        }
        let needed = (PERIOD_MARGIN * cfg.x_max / (2.0 * PI * h)).ceil() as usize;
        let half = (cfg.grid_points / 2).max(needed).max(1);
        let du = 1.0 / (h * half as f64);
        let target = cfg.x_step.unwrap_or((0.5 * h).min(0.01));
        if !(target > 0.0) {
            return Err(Error::InvalidParameter("x_step must be positive".into()));
        }
        let fft_len = fft_len(2.0 * PI / (du * target))?;
        let dx = 2.0 * PI / (du * fft_len as f64);
        let last = (cfg.x_max / dx).ceil() as usize;
        Ok(GridPlan {
            h,
            half,
            du,
            fft_len,
            dx,
            last,
        })
    }

    pub fn u_axis(&self) -> Vec<f64> {
        symmetric_axis(self.half, self.du)
    }

    pub fn x_axis(&self) -> Vec<f64> {
        (-2..=self.last as i64).map(|m| m as f64 * self.dx).collect()
    }
}

/// Smoothed weighted density on the x-grid with tail-integral queries.
#[derive(Debug, Clone)]
pub struct TailEstimate {
    pub plan: GridPlan,
    /// Abscissae `m dx`, `m = -2..=last`, shared by both axes.
    pub x_axis: Vec<f64>,
    /// `Re F^-1(Q FK_h)`, row-major in `x1`.
    pub q_x: Vec<f64>,
    /// Max of `|Im F^-1(Q FK_h)|` over the kept grid.
    pub imag_residual: f64,
    /// `q_x / (x1^4 + x2^4)`, zero at the origin.
    weighted: Vec<f64>,
    /// Row-wise suffix sums of `weighted`.
    pub cum_tail: Vec<f64>,
    pub delta_floor: f64,
    pub conditioning: Option<ConditioningReport>,
    /// Fraction of floored points in the log-derivative stage.
    pub clipped_fraction: f64,
    pub n: usize,
}

/// Inverts `Q FK_h` onto the x-grid. The u-axes of `q` must be uniform,
/// symmetric, and end exactly at `+-1/h`.
pub fn smoothed_weighted_density(q: &LogDerivGrid, h: f64, cfg: &SpectralConfig) -> Result<TailEstimate> {
    let plan = GridPlan::new(h, cfg)?;
    let (k1, du1) =
        uniform_symmetric(&q.u1).ok_or_else(|| Error::GridMismatch("u1 axis is not uniform and symmetric".into()))?;
    let (k2, du2) =
        uniform_symmetric(&q.u2).ok_or_else(|| Error::GridMismatch("u2 axis is not uniform and symmetric".into()))?;
    let ends = [k1 as f64 * du1, k2 as f64 * du2];
    if k1 != k2 || (du1 - du2).abs() > 1e-12 * du1 || ends.iter().any(|e| (e * h - 1.0).abs() > 1e-9) {
        return Err(Error::GridMismatch(format!(
            "u-grid must span exactly [-1/h, 1/h]^2 = [-{}, {}]^2 with equal axes",
            1.0 / h,
            1.0 / h
        )));
    }
    let plan = if plan.half == k1 {
        plan
    } else {
        // honour the supplied grid; x-period checks still apply
        let du = du1;
        if 2.0 * PI / du < PERIOD_MARGIN * cfg.x_max {
            return Err(Error::GridMismatch(format!(
                "u spacing {du} gives an x-period below {} x_max; refine the u-grid",
                PERIOD_MARGIN
            )));
        }
        let target = cfg.x_step.unwrap_or((0.5 * h).min(0.01));
        let fft_len = fft_len(2.0 * PI / (du * target))?;
        let dx = 2.0 * PI / (du * fft_len as f64);
        GridPlan {
            h,
            half: k1,
            du,
            fft_len,
            dx,
            last: (cfg.x_max / dx).ceil() as usize,
        }
    };
    let (q_x, imag_residual) = invert(q, &plan);
    let mut te = TailEstimate::from_density(plan, q_x, cfg.delta_floor)?;
    te.imag_residual = imag_residual;
    te.clipped_fraction = q.clipped_fraction;
    te.n = q.n;
    Ok(te)
}

/// `(du^2 / 4 pi^2) sum_k Q(k du) FK_h(k du) e^{-i <k du, x>}` on the kept
/// x-grid, by two pruned passes of length-`fft_len` transforms.
fn invert(q: &LogDerivGrid, plan: &GridPlan) -> (Vec<f64>, f64) {
    let n = 2 * plan.half + 1;
    let m = plan.fft_len;
    let width = plan.last + 3;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let zero = Complex64::new(0.0, 0.0);
    let bin = |k: i64| k.rem_euclid(m as i64) as usize;
    let mut buf = vec![zero; m];
    let mut stage = vec![zero; n * width];
    for i in 0..n {
        buf.iter_mut().for_each(|v| *v = zero);
        let u1 = q.u1[i];
        for j in 0..n {
            let w = kernel_fk([u1, q.u2[j]], plan.h);
            if w > 0.0 {
                buf[bin(j as i64 - plan.half as i64)] += q.q[i * n + j] * w;
            }
        }
        fft.process(&mut buf);
        for c in 0..width {
            stage[i * width + c] = buf[bin(c as i64 - 2)];
        }
    }
    let scale = plan.du * plan.du / (4.0 * PI * PI);
    let mut out = vec![0.0; width * width];
    let mut imag: f64 = 0.0;
    for c in 0..width {
        buf.iter_mut().for_each(|v| *v = zero);
        for i in 0..n {
            buf[bin(i as i64 - plan.half as i64)] += stage[i * width + c];
        }
        fft.process(&mut buf);
        for r in 0..width {
            let v = buf[bin(r as i64 - 2)] * scale;
            out[r * width + c] = v.re;
            imag = imag.max(v.im.abs());
        }
    }
    (out, imag)
}

/// Gregory end corrections of orders one to three.
const GREGORY: [f64; 3] = [1.0 / 12.0, 1.0 / 24.0, 19.0 / 720.0];

impl TailEstimate {
    /// Builds the query structure from a density sampled at `m dx`,
    /// `m = -2..=plan.last`, in both coordinates.
    pub fn from_density(plan: GridPlan, q_x: Vec<f64>, delta_floor: Option<f64>) -> Result<Self> {
        let width = plan.last + 3;
        if q_x.len() != width * width {
            return Err(Error::GridMismatch("density array does not match the x-grid".into()));
        }
        let x_axis = plan.x_axis();
        let floor = delta_floor.unwrap_or(0.0).max(4.0 * plan.dx);
        if plan.last < 8 {
            return Err(Error::GridMismatch("x-grid too coarse for tail queries".into()));
        }
        let mut weighted = vec![0.0; width * width];
        let mut cum_tail = vec![0.0; width * width];
        for r in 0..width {
            let x4 = x_axis[r].powi(4);
            for c in 0..width {
                let d = x4 + x_axis[c].powi(4);
                weighted[r * width + c] = if d > 0.0 { q_x[r * width + c] / d } else { 0.0 };
            }
            let mut acc = 0.0;
            for c in (0..width).rev() {
                acc += weighted[r * width + c];
                cum_tail[r * width + c] = acc;
            }
        }
        Ok(TailEstimate {
            plan,
            x_axis,
            q_x,
            imag_residual: 0.0,
            weighted,
            cum_tail,
            delta_floor: floor,
            conditioning: None,
            clipped_fraction: 0.0,
            n: 0,
        })
    }

    fn width(&self) -> usize {
        self.plan.last + 3
    }

    pub fn x_max(&self) -> f64 {
        self.plan.last as f64 * self.plan.dx
    }

    /// `q_x` at grid indices `m1, m2` in `-2..=last`.
    pub fn density_at(&self, m1: i64, m2: i64) -> f64 {
        self.q_x[(m1 + 2) as usize * self.width() + (m2 + 2) as usize]
    }

    fn check(&self, a: f64, b: f64) -> Result<()> {
        let top = self.x_max();
        if !(a >= 0.0 && b >= 0.0 && a <= top && b <= top) {
            return Err(Error::OutOfRange(format!(
                "query ({a}, {b}) outside the grid [0, {top}]^2"
            )));
        }
        if a.max(b) < self.delta_floor {
            return Err(Error::OutOfRange(format!(
                "query ({a}, {b}) has both coordinates below the floor {}",
                self.delta_floor
            )));
        }
        Ok(())
    }

    /// Unclipped estimate of `U(a, b)`.
    pub fn raw(&self, a: f64, b: f64) -> Result<f64> {
        self.check(a, b)?;
        let width = self.width();
        let rule_b = TailRule::new(b, self.plan.dx, self.plan.last);
        let rule_a = TailRule::new(a, self.plan.dx, self.plan.last);
        let first = rule_a.first_index();
        let mut rows = vec![0.0; width];
        for (r, v) in rows.iter_mut().enumerate().skip(first) {
            let row = &self.weighted[r * width..(r + 1) * width];
            let suffix = self.cum_tail[r * width + rule_b.p + 2];
            *v = rule_b.apply(|m| row[(m + 2) as usize], suffix);
        }
        let suffix: f64 = rows[rule_a.p + 2..].iter().sum();
        Ok(rule_a.apply(|m| rows[(m + 2) as usize], suffix))
    }

    /// `Re_+` of [`TailEstimate::raw`].
    pub fn clipped(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.raw(a, b)?.max(0.0))
    }

    /// Writes `a,b,n_hat_clipped,n_hat_raw` for every admissible pair.
    pub fn write_csv(&self, path: &Path, a_grid: &[f64], b_grid: &[f64]) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# h: {}", self.plan.h).map_err(io)?;
        writeln!(w, "# n: {}", self.n).map_err(io)?;
        writeln!(w, "# delta_floor: {}", self.delta_floor).map_err(io)?;
        writeln!(w, "a,b,n_hat_clipped,n_hat_raw").map_err(io)?;
        for &a in a_grid {
            for &b in b_grid {
                if let Ok(v) = self.raw(a, b) {
                    writeln!(w, "{a},{b},{},{v}", v.max(0.0)).map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)
    }
}

/// Composite rule for `int_t^X f` on the grid `m dx`, `m = -2..=last`,
/// with `X = last dx`: Gregory-corrected trapezoid from the first node
/// `p >= t`, plus a cubic Lagrange head on `[t, p dx]`.
struct TailRule {
    p: usize,
    last: usize,
    dx: f64,
    head: [f64; 4],
}

impl TailRule {
    fn new(t: f64, dx: f64, last: usize) -> Self {
        let beta = t / dx;
        let mut p = beta.ceil() as usize;
        if p as f64 - beta > 1.0 - 1e-12 {
            p -= 1;
        }
        let p = p.min(last);
        let theta = p as f64 - beta;
        // two-point Gauss on [-theta, 0] is exact for the cubic interpolant
        let g = 1.0 / 3f64.sqrt();
        let nodes = [-0.5 * theta * (1.0 + g), -0.5 * theta * (1.0 - g)];
        let basis = |s: f64| {
            [
                -s * (s + 1.0) * (s - 1.0) / 6.0,
                (s + 2.0) * s * (s - 1.0) / 2.0,
                -(s + 2.0) * (s + 1.0) * (s - 1.0) / 2.0,
                (s + 2.0) * (s + 1.0) * s / 6.0,
            ]
        };
        let mut head = [0.0; 4];
        for s in nodes {
            let b = basis(s);
            for j in 0..4 {
                head[j] += 0.5 * theta * dx * b[j];
            }
        }
        TailRule { p, last, dx, head }
    }

    fn first_index(&self) -> usize {
        self.p.saturating_sub(2)
    }

    /// `suffix` is `sum_{m >= p} f_m`.
    fn apply<F: Fn(i64) -> f64>(&self, f: F, suffix: f64) -> f64 {
        let (p, l) = (self.p as i64, self.last as i64);
        let mut body = suffix - 0.5 * f(p) - 0.5 * f(l);
        if l - p >= 6 {
            let d1 = f(p + 1) - f(p);
            let d2 = f(p + 2) - 2.0 * f(p + 1) + f(p);
            let d3 = f(p + 3) - 3.0 * f(p + 2) + 3.0 * f(p + 1) - f(p);
            let b1 = f(l) - f(l - 1);
            let b2 = f(l) - 2.0 * f(l - 1) + f(l - 2);
            let b3 = f(l) - 3.0 * f(l - 1) + 3.0 * f(l - 2) - f(l - 3);
            body += GREGORY[0] * (d1 - b1) - GREGORY[1] * (d2 + b2) + GREGORY[2] * (d3 - b3);
        }
        let mut total = self.dx * body;
        if self.head.iter().any(|w| *w != 0.0) {
            let top = (p + 1).min(l);
            let idx = [p - 2, p - 1, p, top];
            for (w, m) in self.head.iter().zip(idx) {
                total += w * f(m);
            }
        }
        total
    }
}

/// Tail curve `x -> N(x, 0)` (axis 1) or `x -> N(0, x)` (axis 2) on
/// `[delta, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn tail_curve(te: &TailEstimate, axis: usize, delta: f64) -> Result<TailCurve> {
    if axis != 1 && axis != 2 {
        return Err(Error::InvalidParameter(format!("axis must be 1 or 2, got {axis}")));
    }
    if !(delta >= te.delta_floor) {
        return Err(Error::OutOfRange(format!(
            "delta {delta} is below the grid resolution floor {}",
            te.delta_floor
        )));
    }
    let mut abscissae = vec![delta];
    abscissae.extend(
        te.x_axis
            .iter()
            .copied()
            .filter(|&x| x > delta * (1.0 + 1e-12) && x <= te.x_max()),
    );
    let values = abscissae
        .iter()
        .map(|&x| {
            if axis == 1 {
                te.clipped(x, 0.0)
            } else {
                te.clipped(0.0, x)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailCurve { abscissae, values })
}

pub fn tail_integral_estimate(te: &TailEstimate, a: f64, b: f64) -> Result<f64> {
    te.clipped(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::{JumpDensitySpec, LevyModelSpec};
    use crate::logderiv::log_derivative_grid;
    use crate::quad::{integrate_with_breaks, QuadOptions};
    use crate::simulate::exact_charfn;
    use crate::spectral::kernel::KernelSpec;

    fn single_jump_estimate(at: [f64; 2], h: f64, cfg: &SpectralConfig) -> TailEstimate {
        let m = LevyModelSpec::cpp(JumpDensitySpec::single_jump(at, 1.0).unwrap()).unwrap();
        let plan = GridPlan::new(h, cfg).unwrap();
        let ax = plan.u_axis();
        let g = exact_charfn(&m, &ax, &ax).unwrap();
        let q = log_derivative_grid(&g, 0.0).unwrap();
        smoothed_weighted_density(&q, h, cfg).unwrap()
    }

    fn small_cfg() -> SpectralConfig {
        SpectralConfig {
            grid_points: 128,
            x_max: 6.0,
            x_step: Some(0.02),
            delta_floor: None,
        }
    }

    #[test]
    fn zero_input_gives_zero() {
        let cfg = small_cfg();
        let plan = GridPlan::new(0.5, &cfg).unwrap();
        let ax = plan.u_axis();
        let q = LogDerivGrid {
            u1: ax.clone(),
            u2: ax.clone(),
            q: vec![Complex64::new(0.0, 0.0); ax.len() * ax.len()],
            min_modulus: 1.0,
            clipped_fraction: 0.0,
            floor: 0.0,
            n: 0,
        };
        let te = smoothed_weighted_density(&q, 0.5, &cfg).unwrap();
        assert!(te.q_x.iter().all(|v| *v == 0.0));
        assert_eq!(tail_integral_estimate(&te, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn single_jump_density_is_the_kernel() {
        let h = 0.25;
        let cfg = small_cfg();
        let te = single_jump_estimate([1.0, 1.0], h, &cfg);
        let k = KernelSpec::fejer(h).unwrap();
        let mut best = (f64::MIN, 0, 0);
        let mut err: f64 = 0.0;
        for r in 0..te.x_axis.len() {
            for c in 0..te.x_axis.len() {
                let v = te.q_x[r * te.x_axis.len() + c];
                let want = 2.0 * k.spatial([te.x_axis[r] - 1.0, te.x_axis[c] - 1.0]);
                err = err.max((v - want).abs());
                if v > best.0 {
                    best = (v, r, c);
                }
            }
        }
        // the difference is the periodic aliasing of the kernel tails
        assert!(err < 2e-3 * 2.0 * k.spatial([0.0, 0.0]), "{err}");
        assert!((te.x_axis[best.1] - 1.0).abs() <= 0.5 * te.plan.dx + 1e-12);
        assert!((te.x_axis[best.2] - 1.0).abs() <= 0.5 * te.plan.dx + 1e-12);
        assert!(te.imag_residual < 1e-10, "{}", te.imag_residual);
    }

    #[test]
    fn query_rule_matches_direct_quadrature() {
        // adaptive quadrature of the closed-form kernel; aliasing is below
        // the tolerance
        let h = 0.25;
        let cfg = small_cfg();
        let te = single_jump_estimate([1.0, 1.0], h, &cfg);
        let k = KernelSpec::fejer(h).unwrap();
        let top = te.x_max();
        for (a, b) in [(0.5, 0.5), (0.3, 1.21), (1.037, 0.0), (0.0, 0.77), (2.0, 2.0)] {
            let opts = QuadOptions::rel(1e-9).with_abs(1e-12);
            let inner = |x: f64| {
                integrate_with_breaks(
                    |y: f64| 2.0 * k.spatial([x - 1.0, y - 1.0]) / (x.powi(4) + y.powi(4)),
                    b,
                    top,
                    &[1.0],
                    opts,
                )
                .unwrap()
                .value
            };
            let want = integrate_with_breaks(inner, a, top, &[1.0], opts).unwrap().value;
            let got = te.raw(a, b).unwrap();
            assert!(
                (got - want).abs() < 2e-3 * want.abs().max(1e-3),
                "({a},{b}): {got} vs {want}"
            );
        }
    }

    #[test]
    fn floor_and_range_checks() {
        let te = single_jump_estimate([1.0, 1.0], 0.5, &small_cfg());
        assert!(te.raw(0.0, 0.0).is_err());
        assert!(te.raw(te.delta_floor * 0.5, te.delta_floor * 0.5).is_err());
        assert!(te.raw(100.0, 1.0).is_err());
        assert!(tail_curve(&te, 1, 0.5 * te.delta_floor).is_err());
        let c = tail_curve(&te, 1, 0.2).unwrap();
        assert_eq!(c.abscissae[0], 0.2);
        assert_eq!(c.values[0], tail_integral_estimate(&te, 0.2, 0.0).unwrap());
        assert!(c.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn clipping_keeps_raw_value() {
        let plan = GridPlan::new(0.5, &small_cfg()).unwrap();
        let w = plan.last + 3;
        let te = TailEstimate::from_density(plan, vec![-1.0; w * w], None).unwrap();
        let raw = te.raw(1.0, 1.0).unwrap();
        assert!(raw < 0.0);
        assert_eq!(te.clipped(1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn gregory_rule_is_high_order() {
        // int_t^X e^-x dx on a coarse grid
        let dx = 0.05;
        let last = 200;
        let f = |m: i64| (-(m as f64) * dx).exp();
        for t in [0.0, 0.013, 0.5, 1.2345] {
            let rule = TailRule::new(t, dx, last);
            let suffix: f64 = (rule.p as i64..=last as i64).map(f).sum();
            let got = rule.apply(f, suffix);
            let want = (-t).exp() - (-(last as f64) * dx).exp();
            assert!((got - want).abs() < 1e-7, "t={t}: {got} vs {want}");
        }
    }
}
