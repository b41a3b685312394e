//! End-to-end pipelines and Monte Carlo replication.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, InputKind, Metric};
use super::metrics::{CopulaTruth, TailTruth};
use super::regression::{median, quantile, rate_regression, RateFit};
use crate::charfn::{ecf_grid, CharFnGrid, EcfMethod};
use crate::copula::{cpp_copula_estimate, levy_copula_estimate, offset_delta, CopulaSurface, FLAG_OUT_OF_RANGE};
use crate::error::{Error, Result};
use crate::levy_model::{Intensity, LevyModelSpec};
use crate::logderiv::{conditioning_report, default_floor, log_derivative_grid};
use crate::simulate::{exact_charfn, sample_stream};
use crate::spectral::{bandwidth, smoothed_weighted_density, GridPlan, SpectralConfig, TailEstimate};
use crate::Regime;

/// Log-derivative, inversion and conditioning diagnostics for one grid.
pub fn estimate_tail(grid: &CharFnGrid, h: f64, floor: f64, cfg: &SpectralConfig) -> Result<TailEstimate> {
    let q = log_derivative_grid(grid, floor)?;
    let mut te = smoothed_weighted_density(&q, h, cfg)?;
    te.conditioning = Some(conditioning_report(grid, h, floor)?);
    Ok(te)
}

/// Copula surface of the requested regime; `delta` is raised to the grid
/// floor when needed.
pub fn estimate_copula(
    te: &TailEstimate,
    regime: Regime,
    lambda: Option<f64>,
    delta: f64,
    ladder: &[f64],
) -> Result<CopulaSurface> {
    let delta = delta.max(te.delta_floor);
    let ill = te.conditioning.is_some_and(|c| !c.well_conditioned);
    match regime {
        Regime::General => levy_copula_estimate(te, delta, ill, ladder, ladder),
        Regime::Cpp => {
            let lambda = lambda
                .ok_or_else(|| Error::InvalidParameter("the compound Poisson copula needs the intensity".into()))?;
            cpp_copula_estimate(te, lambda, delta, ill, ladder, ladder)
        }
    }
}

/// Reference values shared by all replications.
#[derive(Debug, Clone)]
pub enum Reference {
    Tail(TailTruth),
    Copula(CopulaTruth),
}

impl Reference {
    pub fn new(cfg: &ExperimentConfig, model: &LevyModelSpec) -> Result<Self> {
        let [lo, hi] = cfg.rect();
        Ok(match cfg.metric {
            Metric::EtaWeightedTailSup => {
                Reference::Tail(TailTruth::new(&model.jumps, lo, hi, cfg.tail_points, cfg.truth_tol)?)
            }
            Metric::CopulaSup => Reference::Copula(CopulaTruth::new(
                &model.jumps,
                cfg.regime,
                lo,
                hi,
                cfg.ladder_points,
                cfg.truth_tol,
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub n: usize,
    pub rep: usize,
    /// NaN when the replication failed.
    pub error: f64,
    pub h: f64,
    pub delta_n: f64,
    pub clipped_fraction: f64,
    pub min_modulus: f64,
    pub flagged_cells: usize,
    pub runtime_ms: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Sorted by `(n, rep)`.
    pub records: Vec<ErrorRecord>,
    pub summaries: Vec<Summary>,
    pub fit: Option<RateFit>,
    pub fit_failure: Option<String>,
    pub elapsed_ms: f64,
}

/// RNG stream of replication `rep` at sample size `n`.
pub fn stream_index(n: usize, rep: usize) -> u64 {
    ((n as u64) << 32) | rep as u64
}

fn run_inner(
    cfg: &ExperimentConfig,
    model: &LevyModelSpec,
    reference: &Reference,
    n: usize,
    rep: usize,
    rec: &mut ErrorRecord,
) -> Result<f64> {
    let h = match cfg.bandwidth {
        Some(h) => h,
        None => bandwidth(n, cfg.regime, cfg.h_mult)?,
    };
    rec.h = h;
    let spectral = cfg.spectral();
    let plan = GridPlan::new(h, &spectral)?;
    let axis = plan.u_axis();
    let (grid, floor) = match cfg.input {
        InputKind::Sample => {
            let panel = sample_stream(model, n, cfg.master_seed, stream_index(n, rep))?;
            (
                ecf_grid(&panel, &axis, &axis, EcfMethod::Auto)?,
                default_floor(n, cfg.floor_mult),
            )
        }
        InputKind::Exact => (exact_charfn(model, &axis, &axis)?, 0.0),
    };
    let te = estimate_tail(&grid, h, floor, &spectral)?;
    if let Some(c) = te.conditioning {
        rec.clipped_fraction = c.clipped_fraction;
        rec.min_modulus = c.min_modulus;
    }
    match reference {
        Reference::Tail(t) => t.error(&te),
        Reference::Copula(t) => {
            let delta = offset_delta(n, cfg.regime, cfg.delta_mult)?;
            rec.delta_n = delta;
            let lambda = model.intensity().finite();
            let s = estimate_copula(&te, cfg.regime, lambda, delta, &t.ladder)?;
            rec.flagged_cells = s.flagged_cells(FLAG_OUT_OF_RANGE);
            t.error(&s)
        }
    }
}

/// One replication; failures are recorded in the returned value.
pub fn run_replication(
    cfg: &ExperimentConfig,
    model: &LevyModelSpec,
    reference: &Reference,
    n: usize,
    rep: usize,
) -> ErrorRecord {
    let start = Instant::now();
    let mut rec = ErrorRecord {
        n,
        rep,
        error: f64::NAN,
        h: f64::NAN,
        delta_n: f64::NAN,
        clipped_fraction: f64::NAN,
        min_modulus: f64::NAN,
        flagged_cells: 0,
        runtime_ms: 0.0,
        failure: None,
    };
    match run_inner(cfg, model, reference, n, rep, &mut rec) {
        Ok(e) => rec.error = e,
        Err(e) => {
            log::warn!("replication n={n} rep={rep} failed: {e}");
            rec.failure = Some(e.to_string());
        }
    }
    rec.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    rec
}

/// Medians, quartiles and the rate fit from canonical records.
pub fn aggregate(config: ExperimentConfig, mut records: Vec<ErrorRecord>, elapsed_ms: f64) -> ExperimentResult {
    records.sort_by_key(|r| (r.n, r.rep));
    let mut groups: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut summaries = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let n = records[i].n;
        let j = i + records[i..].iter().take_while(|r| r.n == n).count();
        let mut ok: Vec<f64> = records[i..j]
            .iter()
            .filter(|r| r.failure.is_none())
            .map(|r| r.error)
            .collect();
        ok.sort_by(f64::total_cmp);
        summaries.push(Summary {
            n,
            median: quantile(&ok, 0.5),
            q25: quantile(&ok, 0.25),
            q75: quantile(&ok, 0.75),
            successes: ok.len(),
            failures: j - i - ok.len(),
        });
        groups.push((n, ok));
        i = j;
    }
    let (fit, fit_failure) = if groups.len() >= 3 {
        match rate_regression(&groups, config.bootstrap, config.master_seed) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    ExperimentResult {
        config,
        records,
        summaries,
        fit,
        fit_failure,
        elapsed_ms,
    }
}

/// Runs every `(n, rep)` pair of the config on a pool of `cfg.workers`
/// threads and aggregates in canonical order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let start = Instant::now();
    let model = cfg.build_model()?;
    if cfg.regime == Regime::General && matches!(model.intensity(), Intensity::Finite(_)) {
        log::warn!("finite-activity model run with the general-regime bandwidth and offset");
    }
    let reference = Reference::new(cfg, &model)?;
    let jobs: Vec<(usize, usize)> = cfg
        .n_ladder
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let records: Vec<ErrorRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, rep)| run_replication(cfg, &model, &reference, n, rep))
            .collect()
    });
    Ok(aggregate(cfg.clone(), records, start.elapsed().as_secs_f64() * 1e3))
}

impl ExperimentResult {
    pub fn medians(&self) -> Vec<(usize, f64)> {
        self.summaries.iter().map(|s| (s.n, s.median)).collect()
    }

    /// Median of the successful errors over all sample sizes.
    pub fn overall_median(&self) -> f64 {
        let ok: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.failure.is_none())
            .map(|r| r.error)
            .collect();
        median(&ok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::JumpDensitySpec;

    fn smoke_cfg(reps: usize) -> ExperimentConfig {
        let m = LevyModelSpec::cpp(JumpDensitySpec::single_jump([1.0, 1.5], 1.0).unwrap()).unwrap();
        let mut c = ExperimentConfig::new(
            "smoke",
            &m,
            Regime::Cpp,
            Metric::EtaWeightedTailSup,
            vec![1024],
            reps,
            5,
        )
        .unwrap();
        c.grid_points = 64;
        c.x_max = 6.0;
        c.x_step = Some(0.02);
        c.tail_points = 6;
        c
    }

    #[test]
    fn single_record_smoke() {
        let r = run_experiment(&smoke_cfg(1)).unwrap();
        assert_eq!(r.records.len(), 1);
        assert!(r.records[0].error.is_finite(), "{:?}", r.records[0]);
        assert_eq!(r.summaries[0].median, r.records[0].error);
        assert_eq!(r.summaries[0].q25, r.summaries[0].q75);
        assert!(r.fit.is_none());
    }

    #[test]
    fn deterministic_across_runs_and_workers() {
        let mut c = smoke_cfg(3);
        c.workers = Some(1);
        let a = run_experiment(&c).unwrap();
        c.workers = Some(3);
        let b = run_experiment(&c).unwrap();
        let key = |r: &ExperimentResult| {
            r.records
                .iter()
                .map(|x| (x.n, x.rep, x.error.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&a), key(&b));
        assert_ne!(a.records[0].error, a.records[1].error);
    }

    #[test]
    fn failures_are_recorded() {
        let mut c = smoke_cfg(1);
        c.bandwidth = Some(1e6);
        let r = run_experiment(&c).unwrap();
        assert!(r.records[0].failure.is_some());
        assert_eq!(r.summaries[0].failures, 1);
        assert!(r.summaries[0].median.is_nan());
    }

    #[test]
    fn streams_are_distinct() {
        assert_ne!(stream_index(1024, 1), stream_index(2048, 1));
        assert_eq!(stream_index(1, 2), (1 << 32) | 2);
    }
}
