//! `levycop`: simulation, reference values, estimation and experiments.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use levy_copula::charfn::{ecf_grid, EcfMethod};
use levy_copula::copula::{ladder, offset_delta};
use levy_copula::harness::{
    emit_report, estimate_copula, estimate_tail, log_grid, presets, rerender, run_experiment, run_preset,
    ExperimentConfig, Metric, PRESET_IDS,
};
use levy_copula::levy_model::{JumpDensitySpec, LevyModelSpec, ModelConfig, PointMass, TruthTables};
use levy_copula::logderiv::default_floor;
use levy_copula::simulate::{sample_increments, IncrementPanel};
use levy_copula::spectral::{bandwidth, tail_curve, GridPlan, SpectralConfig};
use levy_copula::Regime;

#[derive(Parser)]
#[command(
    name = "levycop",
    version,
    about = "Nonparametric Levy copula estimation from unit-time increments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an increment panel and write it as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate reference tail integrals on a log grid.
    Truth {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 15)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate tail integrals and the copula from a panel CSV.
    Estimate {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, default_value = "cpp")]
        regime: String,
        /// Known jump intensity (compound Poisson copula only).
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named preset (ac1..ac9) or a TOML experiment config.
    Experiment {
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: OptModel,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        regime: Option<String>,
        #[arg(long)]
        h_mult: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        floor_mult: Option<f64>,
        #[arg(long)]
        delta_mult: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Re-render summary and rate files of a report directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ModelArg {
    /// Model TOML file, or `beta:<b>`, `beta_two`, `cpp_log[:<lambda>]`,
    /// `jump:<x1>,<x2>[,<w>]`.
    #[arg(long)]
    model: String,
}

#[derive(Args)]
struct OptModel {
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct Tuning {
    #[arg(long, default_value_t = 1.0)]
    h_mult: f64,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value_t = 1.0)]
    floor_mult: f64,
    #[arg(long, default_value_t = 1.0)]
    delta_mult: f64,
}

fn parse_model(text: &str) -> Result<LevyModelSpec> {
    let path = Path::new(text);
    if path.is_file() {
        let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(ModelConfig::from_toml(&body)?.build()?);
    }
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    let nums = || -> Result<Vec<f64>> {
        arg.split(',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number '{s}' in --model"))
            })
            .collect()
    };
    let m = match kind {
        "beta" => {
            let v = nums()?;
            let [b] = v[..] else { bail!("use beta:<index>") };
            LevyModelSpec::compensated([[0.0; 2]; 2], JumpDensitySpec::beta_family(b)?)?
        }
        "beta_two" => LevyModelSpec::compensated([[0.0; 2]; 2], JumpDensitySpec::beta_two())?,
        "cpp_log" => {
            let lambda = nums()?.first().copied().unwrap_or(1.0);
            LevyModelSpec::cpp(JumpDensitySpec::cpp_log(lambda)?)?
        }
        "jump" => {
            let v = nums()?;
            let (x, w) = match v[..] {
                [a, b] => ([a, b], 1.0),
                [a, b, w] => ([a, b], w),
                _ => bail!("use jump:<x1>,<x2>[,<weight>]"),
            };
            LevyModelSpec::cpp(JumpDensitySpec::point_masses(vec![PointMass {
                location: x,
                weight: w,
            }])?)?
        }
        _ => bail!("unknown model '{text}' (not a file and not a known shorthand)"),
    };
    Ok(m)
}

fn simulate(model: &str, n: usize, seed: u64, out: &Path) -> Result<()> {
    let m = parse_model(model)?;
    let panel = sample_increments(&m, n, seed)?;
    panel.write_csv(out)?;
    println!("wrote {n} increments of {} to {}", m.label(), out.display());
    Ok(())
}

fn truth(model: &str, points: usize, out: &Path) -> Result<()> {
    let m = parse_model(model)?;
    let g = log_grid(0.1, 5.0, points);
    TruthTables::new(m.jumps.clone(), 1e-8).write_csv(out, &g, &g)?;
    println!("wrote {}x{} reference table to {}", points, points, out.display());
    Ok(())
}

fn estimate(panel: &Path, regime: &str, lambda: Option<f64>, t: &Tuning, out: &Path) -> Result<()> {
    let regime = Regime::parse(regime)?;
    let panel = IncrementPanel::read_csv(panel)?;
    let n = panel.n;
    let h = bandwidth(n, regime, t.h_mult)?;
    let cfg = SpectralConfig {
        grid_points: t.grid,
        ..Default::default()
    };
    let plan = GridPlan::new(h, &cfg)?;
    let axis = plan.u_axis();
    let grid = ecf_grid(&panel, &axis, &axis, EcfMethod::Auto)?;
    let te = estimate_tail(&grid, h, default_floor(n, t.floor_mult), &cfg)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let g = log_grid(0.1, 5.0, 15);
    te.write_csv(&out.join("tail.csv"), &g, &g)?;
    let delta = offset_delta(n, regime, t.delta_mult)?.max(te.delta_floor);
    for axis in [1, 2] {
        let c = tail_curve(&te, axis, delta)?;
        let body: String = std::iter::once("x,n_hat\n".to_string())
            .chain(c.abscissae.iter().zip(&c.values).map(|(x, v)| format!("{x},{v}\n")))
            .collect();
        let p = out.join(format!("marginal{axis}.csv"));
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
    }
    let lad = match regime {
        Regime::General => ladder(0.5, 2.0, 25),
        Regime::Cpp => ladder(0.2, 0.8, 25),
    };
    if regime == Regime::Cpp && lambda.is_none() {
        bail!("the compound Poisson copula needs --lambda");
    }
    let s = estimate_copula(&te, regime, lambda, delta, &lad)?;
    let meta = [
        ("n", n.to_string()),
        ("h", h.to_string()),
        ("model", panel.model_label.clone()),
        ("seed", panel.seed.to_string()),
    ];
    s.write_csv(&out.join("copula.csv"), &meta)?;
    let c = te.conditioning.expect("set by estimate_tail");
    println!(
        "n={n} h={h:.4} delta={delta:.4} min|phi|={:.3e} clipped={:.3} imag residual={:.1e}; wrote {}",
        c.min_modulus,
        c.clipped_fraction,
        te.imag_residual,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    preset: Option<String>,
    config: Option<PathBuf>,
    model: Option<String>,
    n: Vec<usize>,
    reps: Option<usize>,
    seed: Option<u64>,
    regime: Option<String>,
    tuning: [Option<f64>; 3],
    grid: Option<usize>,
    workers: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut cfg = match (preset.as_deref(), config) {
        (Some("ac5"), _) => presets::ac5_config()?,
        (Some("ac9"), _) => presets::ac9_config()?,
        (Some(id), _) => {
            let o = run_preset(id)?;
            let tag = |ok: bool| if ok { "PASS" } else { "FAIL" };
            println!("{} {}: {}", id.to_uppercase(), tag(o.passed), o.detail);
            if let Some(fb) = o.fallback.filter(|_| !o.passed) {
                println!("{} fallback {}: {}", id.to_uppercase(), tag(fb.passed), fb.detail);
            }
            return Ok(());
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, None) => {
            let Some(m) = model.as_deref() else {
                bail!("give --preset ({}), --config, or --model", PRESET_IDS.join("|"))
            };
            let spec = parse_model(m)?;
            let regime = Regime::parse(regime.as_deref().unwrap_or("cpp"))?;
            let ns = if n.is_empty() {
                vec![1024, 2048, 4096]
            } else {
                n.clone()
            };
            ExperimentConfig::new("cli", &spec, regime, Metric::CopulaSup, ns, 10, 1)?
        }
    };
    if let Some(m) = model.filter(|_| preset.is_some()) {
        cfg.model = ModelConfig::from_model(&parse_model(&m)?)?;
    }
    if !n.is_empty() {
        cfg.n_ladder = n;
    }
    if let Some(r) = reps {
        cfg.replications = r;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(r) = regime {
        cfg.regime = Regime::parse(&r)?;
    }
    let [h_mult, floor_mult, delta_mult] = tuning;
    if let Some(v) = h_mult {
        cfg.h_mult = v;
    }
    if let Some(v) = floor_mult {
        cfg.floor_mult = v;
    }
    if let Some(v) = delta_mult {
        cfg.delta_mult = v;
    }
    if let Some(g) = grid {
        cfg.grid_points = g;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    let res = run_experiment(&cfg)?;
    emit_report(&res, out)?;
    for s in &res.summaries {
        println!(
            "n={:>7} median={:.5} q25={:.5} q75={:.5} ok={} failed={}",
            s.n, s.median, s.q25, s.q75, s.successes, s.failures
        );
    }
    if let Some(f) = res.fit {
        println!("slope {:.3} [{:.3}, {:.3}]", f.slope, f.ci_lo, f.ci_hi);
    }
    println!("report in {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate { model, n, seed, out } => simulate(&model.model, n, seed, &out),
        Command::Truth { model, points, out } => truth(&model.model, points, &out),
        Command::Estimate {
            panel,
            regime,
            lambda,
            tuning,
            out,
        } => estimate(&panel, &regime, lambda, &tuning, &out),
        Command::Experiment {
            preset,
            config,
            model,
            n,
            reps,
            seed,
            regime,
            h_mult,
            grid,
            floor_mult,
            delta_mult,
            workers,
            out,
        } => experiment(
            preset,
            config,
            model.model,
            n,
            reps,
            seed,
            regime,
            [h_mult, floor_mult, delta_mult],
            grid,
            workers,
            &out,
        ),
        Command::Report { out } => {
            let r = rerender(&out)?;
            println!("re-rendered {} records in {}", r.records.len(), out.display());
            Ok(())
        }
    }
}
