//! Named checks `ac1` .. `ac9` with pinned tolerances.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Metric};
use super::metrics::CopulaTruth;
use super::regression::{least_squares, median};
use super::report::emit_report;
use super::run::{estimate_copula, estimate_tail, run_experiment};
use crate::charfn::{ecf_grid, symmetric_axis, weighted_sup_distance, EcfMethod, WeightedMetricConfig};
use crate::copula::marginal_inverses;
use crate::error::{Error, Result};
use crate::inversion::running_infimum;
use crate::levy_model::{tail_integral_truth, JumpDensitySpec, LevyModelSpec, PointMass};
use crate::logderiv::{fourth_log_derivative, log_derivative_grid};
use crate::quad::{composite_gl, composite_gl_edges};
use crate::simulate::{exact_charfn, sample_stream};
use crate::spectral::{kernel_fk, kernel_k1, GridPlan, KernelSpec, SpectralConfig};
use crate::Regime;

pub const PRESET_IDS: [&str; 9] = ["ac1", "ac2", "ac3", "ac4", "ac5", "ac6", "ac7", "ac8", "ac9"];

#[derive(Debug, Clone, PartialEq)]
pub struct PresetOutcome {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Weaker check that is still meaningful when the stated criterion is
    /// out of reach; see the README for the AC-4 and AC-5 analyses.
    pub fallback: Option<Fallback>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fallback {
    pub passed: bool,
    pub detail: String,
}

impl PresetOutcome {
    fn new(id: &'static str, passed: bool, detail: String) -> Self {
        PresetOutcome {
            id,
            passed,
            detail,
            fallback: None,
        }
    }

    fn with_fallback(mut self, passed: bool, detail: String) -> Self {
        self.fallback = Some(Fallback { passed, detail });
        self
    }
}

pub fn run_preset(id: &str) -> Result<PresetOutcome> {
    match id {
        "ac1" => ac1_kernel(),
        "ac2" => ac2_brownian(),
        "ac3" => ac3_oracle(),
        "ac4" => ac4_bias(),
        "ac5" => ac5_cpp_rate(),
        "ac6" => ac6_inverse_bound(),
        "ac7" => ac7_ecf_rate(),
        "ac8" => ac8_general(),
        "ac9" => ac9_determinism(),
        other => Err(Error::InvalidParameter(format!(
            "unknown preset '{other}'; expected one of {}",
            PRESET_IDS.join(", ")
        ))),
    }
}

pub const AC1_INTEGRAL_TOL: f64 = 1e-4;
pub const AC1_FK_TOL: f64 = 1e-12;

fn ac1_kernel() -> Result<PresetOutcome> {
    // panels between consecutive zeros of K_1
    let reach = 1e4;
    let k = (reach / (2.0 * PI)).floor() as i64;
    let mut edges = vec![-reach];
    edges.extend((-k..=k).map(|j| 2.0 * PI * j as f64));
    edges.push(reach);
    let (x, w) = composite_gl_edges(&edges, 16);
    let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * kernel_k1(*x)).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let h: f64 = rng.random_range(0.01..1.0);
        let u = [rng.random_range(-1.5 / h..1.5 / h), rng.random_range(-1.5 / h..1.5 / h)];
        let want = (1.0 - h * u[0].abs()).max(0.0) * (1.0 - h * u[1].abs()).max(0.0);
        let spec = KernelSpec::fejer(h)?;
        worst = worst
            .max((kernel_fk(u, h) - want).abs())
            .max((spec.fourier(u) - want).abs());
    }
    let passed = (integral - 1.0).abs() <= AC1_INTEGRAL_TOL && worst <= AC1_FK_TOL;
    Ok(PresetOutcome::new(
        "ac1",
        passed,
        format!(
            "|int K1 - 1| = {:.2e}, max FK deviation = {worst:.1e}",
            (integral - 1.0).abs()
        ),
    ))
}

pub const AC2_GAUSS_TOL: f64 = 1e-10;
pub const AC2_SHIFT_TOL: f64 = 1e-9;

fn ac2_brownian() -> Result<PresetOutcome> {
    let sigma = [[1.0, 0.3], [0.3, 0.5]];
    let axis = symmetric_axis(32, 0.25);
    let gauss = exact_charfn(&LevyModelSpec::gaussian(sigma)?, &axis, &axis)?;
    let mut null: f64 = 0.0;
    for k in 1..=2 {
        let (q, _) = fourth_log_derivative(&gauss, k, 0.0)?;
        null = null.max(q.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let atoms = vec![
        PointMass {
            location: [1.0, 1.0],
            weight: 0.7,
        },
        PointMass {
            location: [0.3, 2.0],
            weight: 0.4,
        },
        PointMass {
            location: [2.5, 0.6],
            weight: 0.2,
        },
    ];
    let cpp = exact_charfn(
        &LevyModelSpec::cpp(JumpDensitySpec::point_masses(atoms)?)?,
        &axis,
        &axis,
    )?;
    let base = log_derivative_grid(&cpp, 0.0)?;
    let mut shift: f64 = 0.0;
    for s in [sigma, [[2.0, -0.5], [-0.5, 1.0]]] {
        let moved = log_derivative_grid(&cpp.times_gaussian(s), 0.0)?;
        shift = shift.max(
            base.q
                .iter()
                .zip(&moved.q)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        );
    }
    Ok(PresetOutcome::new(
        "ac2",
        null <= AC2_GAUSS_TOL && shift <= AC2_SHIFT_TOL,
        format!("Gaussian fourth log-derivative {null:.1e}, change under Gaussian factor {shift:.1e}"),
    ))
}

pub const AC3_REL_TOL: f64 = 1e-3;

/// `(1 / 4 pi^2) int Fg(-u) Q(u) FK_h(u) du` for a unit atom at `(1, 1)`,
/// where `g` is `(x1^4 + x2^4)^-1` on `[a, top] x [b, top]`. `Q` and `FK_h`
/// factor over the axes, so the `u` integral is done per axis by
/// Gauss-Legendre and the `x` integral by a tensor rule.
pub fn plancherel_single_jump(h: f64, a: f64, b: f64, top: f64) -> f64 {
    let lim = 1.0 / h;
    let refine = |lo: f64| -> (Vec<f64>, Vec<f64>) {
        let mut edges = vec![lo];
        let mut e = lo;
        while e < top {
            e = (e + 0.02 + 0.1 * e).min(top);
            edges.push(e);
        }
        composite_gl_edges(&edges, 12)
    };
    // kernel row: (1 / 2 pi) int FK_h(u) e^{i u (1 - x)} du
    let row = |xs: &[f64]| -> Vec<f64> {
        let panels: Vec<(Vec<f64>, Vec<f64>)> = [(-lim, 0.0), (0.0, lim)]
            .iter()
            .map(|&(lo, hi)| composite_gl(lo, hi, (16.0 * lim).ceil() as usize, 16))
            .collect();
        xs.iter()
            .map(|&x| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (n, w) in &panels {
                    for (u, wu) in n.iter().zip(w) {
                        let fk = (1.0 - h * u.abs()).max(0.0);
                        acc += Complex64::from_polar(wu * fk, u * (1.0 - x));
                    }
                }
                acc.re / (2.0 * PI)
            })
            .collect()
    };
    let (xa, wa) = refine(a);
    let (xb, wb) = refine(b);
    let (ka, kb) = (row(&xa), row(&xb));
    let mut total = 0.0;
    for i in 0..xa.len() {
        let x4 = xa[i].powi(4);
        let mut inner = 0.0;
        for j in 0..xb.len() {
            inner += wb[j] * kb[j] / (x4 + xb[j].powi(4));
        }
        total += wa[i] * ka[i] * inner;
    }
    2.0 * total
}

fn ac3_oracle() -> Result<PresetOutcome> {
    let h = 0.1;
    let model = LevyModelSpec::cpp(JumpDensitySpec::single_jump([1.0, 1.0], 1.0)?)?;
    let cfg = SpectralConfig {
        grid_points: 512,
        ..Default::default()
    };
    let plan = GridPlan::new(h, &cfg)?;
    let axis = plan.u_axis();
    let te = estimate_tail(&exact_charfn(&model, &axis, &axis)?, h, 0.0, &cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (a, b) = (rng.random_range(0.1..2.0), rng.random_range(0.1..2.0));
        let x_space = te.raw(a, b)?;
        let u_space = plancherel_single_jump(h, a, b, te.x_max());
        worst = worst.max((x_space - u_space).abs() / u_space.abs());
    }
    Ok(PresetOutcome::new(
        "ac3",
        worst <= AC3_REL_TOL,
        format!(
            "max relative gap x-space vs u-space over 20 pairs: {worst:.2e} ({}^2 u-grid)",
            axis.len()
        ),
    ))
}

pub const AC4_SLOPE_WINDOW: [f64; 2] = [0.7, 1.3];
pub const AC4_BANDWIDTHS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

/// `(h, |U(1,1) - N(1,1)|)` from exact input for `beta_family(0.5)`.
pub fn smoothing_bias(hs: &[f64], grid_points: usize) -> Result<Vec<(f64, f64)>> {
    let jumps = JumpDensitySpec::beta_family(0.5)?;
    let truth = tail_integral_truth(&jumps, 1.0, 1.0, 1e-10)?;
    let model = LevyModelSpec::compensated([[0.0; 2]; 2], jumps)?;
    let cfg = SpectralConfig {
        grid_points,
        ..Default::default()
    };
    hs.iter()
        .map(|&h| {
            let plan = GridPlan::new(h, &cfg)?;
            let axis = plan.u_axis();
            let te = estimate_tail(&exact_charfn(&model, &axis, &axis)?, h, 0.0, &cfg)?;
            Ok((h, (truth - te.clipped(1.0, 1.0)?).abs()))
        })
        .collect()
}

fn ac4_bias() -> Result<PresetOutcome> {
    let pts = smoothing_bias(&AC4_BANDWIDTHS, 256)?;
    let x: Vec<f64> = pts.iter().map(|(h, _)| (h * h.ln().abs()).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|(_, e)| e.ln()).collect();
    let (slope, _) = least_squares(&x, &y)?;
    let lx: Vec<f64> = pts.iter().map(|(h, _)| h.ln()).collect();
    let (slope_h, _) = least_squares(&lx, &y)?;
    let errs: Vec<String> = pts.iter().map(|(h, e)| format!("h={h}: {e:.3e}")).collect();
    let in_window = |s: f64| (AC4_SLOPE_WINDOW[0]..=AC4_SLOPE_WINDOW[1]).contains(&s);
    Ok(PresetOutcome::new(
        "ac4",
        in_window(slope),
        format!("slope {slope:.3} on log(h|log h|); {}", errs.join(", ")),
    )
    // the bias here is linear in h; h|log h| only bounds it
    .with_fallback(
        in_window(slope_h),
        format!("slope {slope_h:.3} on log h, window {AC4_SLOPE_WINDOW:?}"),
    ))
}

pub const AC5_SLOPE_WINDOW: [f64; 2] = [-0.65, -0.35];

/// Compound Poisson rate experiment on `cpp_log_density`.
pub fn ac5_config() -> Result<ExperimentConfig> {
    let model = LevyModelSpec::cpp(JumpDensitySpec::cpp_log(1.0)?)?;
    let n_ladder = (10..=15).map(|k| 1usize << k).collect();
    let mut cfg = ExperimentConfig::new("ac5", &model, Regime::Cpp, Metric::CopulaSup, n_ladder, 20, 20_250_501)?;
    cfg.h_mult = 1.0;
    cfg.grid_points = 64;
    cfg.x_step = Some(0.005);
    Ok(cfg)
}

fn ac5_cpp_rate() -> Result<PresetOutcome> {
    let res = run_experiment(&ac5_config()?)?;
    let meds: Vec<String> = res
        .summaries
        .iter()
        .map(|s| format!("{}:{:.4}", s.n, s.median))
        .collect();
    Ok(match res.fit {
        Some(f) => {
            let first = res.summaries.first().map_or(f64::NAN, |s| s.median);
            let last = res.summaries.last().map_or(f64::NAN, |s| s.median);
            PresetOutcome::new(
                "ac5",
                (AC5_SLOPE_WINDOW[0]..=AC5_SLOPE_WINDOW[1]).contains(&f.slope),
                format!(
                    "slope {:.3} (95% bootstrap [{:.3}, {:.3}]); medians {}",
                    f.slope,
                    f.ci_lo,
                    f.ci_hi,
                    meds.join(" ")
                ),
            )
            // bias-dominated at these sizes: insist on decay only
            .with_fallback(
                f.ci_hi < 0.0 && last < first,
                format!(
                    "error decays: bootstrap upper {:.3} < 0, median {first:.4} -> {last:.4}",
                    f.ci_hi
                ),
            )
        }
        None => PresetOutcome::new(
            "ac5",
            false,
            format!("no rate fit: {}", res.fit_failure.unwrap_or_default()),
        ),
    })
}

/// One randomized instance: `f = e^-x` plus bounded noise on `[delta, 20]`.
/// Returns `(observed sup error over z in [0.1, 0.5], bound)`.
pub fn inverse_bound_instance(rng: &mut impl Rng) -> Result<(f64, f64)> {
    let (a, b) = (0.1, 0.5);
    let delta = rng.random_range(0.001..0.5);
    let gamma = rng.random_range(1e-4..0.02);
    let step = rng.random_range(5e-4..5e-3);
    let count = ((20.0 - delta) / step) as usize + 1;
    let xs: Vec<f64> = (0..count).map(|i| delta + i as f64 * step).collect();
    let smooth_amp = rng.random_range(0.0..1.0);
    let freq = rng.random_range(0.5..20.0);
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let noise = smooth_amp * (freq * x).sin() + (1.0 - smooth_amp) * rng.random_range(-1.0..1.0);
            ((-x).exp() + gamma * noise).max(0.0)
        })
        .collect();
    let inv = running_infimum(&xs, &ys, "perturbed exp")?;
    let mut worst: f64 = 0.0;
    for k in 0..=200 {
        let z = a + (b - a) * k as f64 / 200.0;
        let r = inv.pseudo_inverse(z);
        worst = worst.max((r.x + z.ln()).abs());
    }
    // inf |f'| on (0, f^-1(a/2)] is a/2
    Ok((worst, 2.0 * gamma / (0.5 * a) + step))
}

fn ac6_inverse_bound() -> Result<PresetOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..1000 {
        let (err, bound) = inverse_bound_instance(&mut rng)?;
        violations += (err > bound) as usize;
        worst_ratio = worst_ratio.max(err / bound);
    }
    Ok(PresetOutcome::new(
        "ac6",
        violations == 0,
        format!("{violations} violations in 1000 instances; max error/bound {worst_ratio:.3}"),
    ))
}

pub const AC7_RATIO_MAX: f64 = 3.0;

/// Median of `sqrt(n) d(phi_n, phi)` for each `n`, single-jump model.
pub fn ecf_scaled_distances(ns: &[usize], reps: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let model = LevyModelSpec::cpp(JumpDensitySpec::single_jump([1.0, 1.0], 1.0)?)?;
    let axis = symmetric_axis(40, 0.25);
    let exact = exact_charfn(&model, &axis, &axis)?;
    let metric = WeightedMetricConfig::default();
    ns.iter()
        .map(|&n| {
            let d = (0..reps)
                .map(|r| {
                    let panel = sample_stream(&model, n, seed, ((n as u64) << 32) | r as u64)?;
                    let g = ecf_grid(&panel, &axis, &axis, EcfMethod::Auto)?;
                    Ok(weighted_sup_distance(&g, &exact, &metric)? * (n as f64).sqrt())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((n, median(&d)))
        })
        .collect()
}

fn ac7_ecf_rate() -> Result<PresetOutcome> {
    let ns: Vec<usize> = (8..=14).map(|k| 1usize << k).collect();
    let meds = ecf_scaled_distances(&ns, 50, 7)?;
    let hi = meds.iter().map(|m| m.1).fold(f64::MIN, f64::max);
    let lo = meds.iter().map(|m| m.1).fold(f64::MAX, f64::min);
    let list: Vec<String> = meds.iter().map(|(n, m)| format!("{n}:{m:.3}")).collect();
    Ok(PresetOutcome::new(
        "ac7",
        hi / lo <= AC7_RATIO_MAX,
        format!("max/min of median sqrt(n) d = {:.3}; {}", hi / lo, list.join(" ")),
    ))
}

/// Levy-copula sup error from exact input at bandwidth `h`, together with
/// invariant checks along the way.
pub struct GeneralRun {
    pub h: f64,
    pub error: f64,
    pub brownian_shift: f64,
    pub min_value: f64,
    pub inverses_monotone: bool,
}

pub fn general_copula_run(h: f64, truth: &CopulaTruth, grid_points: usize) -> Result<GeneralRun> {
    let jumps = JumpDensitySpec::beta_family(0.5)?;
    let with_bm = LevyModelSpec::compensated([[1.0, 0.0], [0.0, 1.0]], jumps.clone())?;
    let without = LevyModelSpec::compensated([[0.0; 2]; 2], jumps)?;
    let cfg = SpectralConfig {
        grid_points,
        ..Default::default()
    };
    let plan = GridPlan::new(h, &cfg)?;
    let axis = plan.u_axis();
    let g = exact_charfn(&with_bm, &axis, &axis)?;
    let q1 = log_derivative_grid(&g, 0.0)?;
    let q0 = log_derivative_grid(&exact_charfn(&without, &axis, &axis)?, 0.0)?;
    let brownian_shift =
        q1.q.iter()
            .zip(&q0.q)
            .map(|(a, b)| (a - b).norm() / (1.0 + b.norm()))
            .fold(0.0, f64::max);
    let te = estimate_tail(&g, h, 0.0, &cfg)?;
    let delta = 0.05;
    let s = estimate_copula(&te, Regime::General, None, delta, &truth.ladder)?;
    let [i1, i2] = marginal_inverses(&te, delta.max(te.delta_floor))?;
    let zs: Vec<f64> = (1..=200).map(|k| 0.05 * k as f64).collect();
    let inverses_monotone = [i1, i2].iter().all(|inv| {
        let xs: Vec<f64> = zs.iter().map(|&z| inv.pseudo_inverse(z).x).collect();
        xs.windows(2).all(|w| w[1] <= w[0]) && xs.iter().all(|&x| x >= inv.delta)
    });
    Ok(GeneralRun {
        h,
        error: truth.error(&s)?,
        brownian_shift,
        min_value: s.values.iter().copied().fold(f64::INFINITY, f64::min),
        inverses_monotone,
    })
}

fn ac8_general() -> Result<PresetOutcome> {
    let truth = CopulaTruth::new(&JumpDensitySpec::beta_family(0.5)?, Regime::General, 0.5, 2.0, 25, 1e-9)?;
    let fine = general_copula_run(0.1, &truth, 256)?;
    let coarse = general_copula_run(0.4, &truth, 256)?;
    let invariants = [&fine, &coarse]
        .iter()
        .all(|r| r.brownian_shift <= AC2_SHIFT_TOL && r.min_value >= 0.0 && r.inverses_monotone);
    Ok(PresetOutcome::new(
        "ac8",
        fine.error < coarse.error && invariants,
        format!(
            "sup error h=0.1: {:.4}, h=0.4: {:.4}; Brownian shift {:.1e}; invariants {}",
            fine.error,
            coarse.error,
            fine.brownian_shift.max(coarse.brownian_shift),
            if invariants { "hold" } else { "violated" }
        ),
    ))
}

/// Small compound Poisson experiment used for the schedule check.
pub fn ac9_config() -> Result<ExperimentConfig> {
    let mut cfg = ac5_config()?;
    cfg.name = "ac9".into();
    cfg.n_ladder = vec![256, 512, 1024];
    cfg.replications = 4;
    cfg.bootstrap = 200;
    Ok(cfg)
}

fn ac9_determinism() -> Result<PresetOutcome> {
    let dir = std::env::temp_dir().join(format!("levycop-ac9-{}", std::process::id()));
    let mut texts = Vec::new();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    for (k, workers) in [1, cores.max(4), 1].into_iter().enumerate() {
        let mut cfg = ac9_config()?;
        cfg.workers = Some(workers);
        let out = dir.join(format!("run{k}"));
        let files = emit_report(&run_experiment(&cfg)?, &out)?;
        texts.push(std::fs::read(&files.errors).map_err(|e| Error::io(&files.errors, e))?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    let same = texts.windows(2).all(|w| w[0] == w[1]);
    Ok(PresetOutcome::new(
        "ac9",
        same,
        format!("errors.csv identical across 1 and {} workers: {same}", cores.max(4)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plancherel_oracle_matches_closed_form_kernel() {
        // N(a, b) = 2 int int K_h(x - 1) K_h(y - 1) / (x^4 + y^4)
        let h = 0.25;
        let k = KernelSpec::fejer(h).unwrap();
        let (xs, ws) = composite_gl(0.8, 6.0, 200, 8);
        let mut direct = 0.0;
        for (x, wx) in xs.iter().zip(&ws) {
            for (y, wy) in xs.iter().zip(&ws) {
                direct += wx * wy * 2.0 * k.spatial([x - 1.0, y - 1.0]) / (x.powi(4) + y.powi(4));
            }
        }
        let u = plancherel_single_jump(h, 0.8, 0.8, 6.0);
        assert!((u - direct).abs() < 1e-6 * direct, "{u} vs {direct}");
    }

    #[test]
    fn inverse_bound_holds_on_a_few_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let (e, b) = inverse_bound_instance(&mut rng).unwrap();
            assert!(e <= b, "{e} > {b}");
        }
    }

    #[test]
    fn quick_presets_pass() {
        for id in ["ac1", "ac2", "ac6"] {
            let o = run_preset(id).unwrap();
            assert!(o.passed, "{}: {}", o.id, o.detail);
        }
        assert!(run_preset("ac10").is_err());
    }
}
