//! CSV reports and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::run::{aggregate, ErrorRecord, ExperimentResult};
use crate::error::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))
}

fn put(w: &mut csv::Writer<fs::File>, path: &Path, row: &[String]) -> Result<()> {
    w.write_record(row).map_err(|e| Error::io(path, e.into()))
}

fn done(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn hdr(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn row<const K: usize>(items: [&dyn std::fmt::Display; K]) -> Vec<String> {
    items.iter().map(|v| v.to_string()).collect()
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub errors: PathBuf,
    pub summary: PathBuf,
    pub rates: PathBuf,
    pub timings: PathBuf,
    pub manifest: PathBuf,
    pub config: PathBuf,
    pub plotdata: Vec<PathBuf>,
}

/// Writes `errors.csv`, `summary.csv`, `rates.csv`, `timings.csv`,
/// `plotdata/*.csv`, `config.toml` and `manifest.txt` under `out_dir`.
/// Wall-clock times only appear in `timings.csv` and the manifest, so the
/// other files depend on the seed alone.
pub fn emit_report(result: &ExperimentResult, out_dir: &Path) -> Result<ReportFiles> {
    let plot_dir = out_dir.join("plotdata");
    fs::create_dir_all(&plot_dir).map_err(|e| Error::io(&plot_dir, e))?;
    let files = ReportFiles {
        errors: out_dir.join("errors.csv"),
        summary: out_dir.join("summary.csv"),
        rates: out_dir.join("rates.csv"),
        timings: out_dir.join("timings.csv"),
        manifest: out_dir.join("manifest.txt"),
        config: out_dir.join("config.toml"),
        plotdata: vec![plot_dir.join("median_error.csv"), plot_dir.join("replications.csv")],
    };

    let p = &files.errors;
    let mut w = writer(p)?;
    put(
        &mut w,
        p,
        &hdr(&[
            "n",
            "rep",
            "error",
            "clipped_fraction",
            "h",
            "delta_n",
            "min_modulus",
            "flagged_cells",
            "status",
        ]),
    )?;
    for r in &result.records {
        let status = r.failure.as_deref().unwrap_or("ok");
        put(
            &mut w,
            p,
            &row([
                &r.n,
                &r.rep,
                &r.error,
                &r.clipped_fraction,
                &r.h,
                &r.delta_n,
                &r.min_modulus,
                &r.flagged_cells,
                &status,
            ]),
        )?;
    }
    done(w, p)?;

    let p = &files.timings;
    let mut w = writer(p)?;
    put(&mut w, p, &hdr(&["n", "rep", "runtime_ms"]))?;
    for r in &result.records {
        put(&mut w, p, &row([&r.n, &r.rep, &format!("{:.3}", r.runtime_ms)]))?;
    }
    done(w, p)?;

    let p = &files.summary;
    let mut w = writer(p)?;
    put(&mut w, p, &hdr(&["n", "median", "q25", "q75", "successes", "failures"]))?;
    for s in &result.summaries {
        put(
            &mut w,
            p,
            &row([&s.n, &s.median, &s.q25, &s.q75, &s.successes, &s.failures]),
        )?;
    }
    done(w, p)?;

    let p = &files.rates;
    let mut w = writer(p)?;
    put(&mut w, p, &hdr(&["slope", "intercept", "ci_lo", "ci_hi"]))?;
    if let Some(f) = &result.fit {
        put(&mut w, p, &row([&f.slope, &f.intercept, &f.ci_lo, &f.ci_hi]))?;
    }
    done(w, p)?;

    let p = &files.plotdata[0];
    let mut w = writer(p)?;
    put(&mut w, p, &hdr(&["n", "log_n", "median", "log_median", "q25", "q75"]))?;
    for s in &result.summaries {
        let n = s.n as f64;
        put(
            &mut w,
            p,
            &row([&s.n, &n.ln(), &s.median, &s.median.ln(), &s.q25, &s.q75]),
        )?;
    }
    done(w, p)?;

    let p = &files.plotdata[1];
    let mut w = writer(p)?;
    put(&mut w, p, &hdr(&["n", "rep", "error"]))?;
    for r in result.records.iter().filter(|r| r.failure.is_none()) {
        put(&mut w, p, &row([&r.n, &r.rep, &r.error]))?;
    }
    done(w, p)?;

    let toml = result.config.to_toml()?;
    fs::write(&files.config, &toml).map_err(|e| Error::io(&files.config, e))?;
    let mut manifest = format!(
        "experiment: {}\nlevy-copula: {}\nrecords: {}\nelapsed_ms: {:.1}\n",
        result.config.name,
        env!("CARGO_PKG_VERSION"),
        result.records.len(),
        result.elapsed_ms
    );
    if let Some(f) = &result.fit_failure {
        manifest.push_str(&format!("rate fit failed: {f}\n"));
    }
    manifest.push_str(
        "note: slope windows, bandwidth and floor multipliers are calibration choices, not derived constants\n",
    );
    manifest.push_str("\n[config]\n");
    manifest.push_str(&toml);
    fs::write(&files.manifest, manifest).map_err(|e| Error::io(&files.manifest, e))?;
    Ok(files)
}

fn parse<T: std::str::FromStr>(s: &str, path: &Path) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("{}: cannot parse '{s}'", path.display())))
}

/// Reads `errors.csv` (and `timings.csv` when present) back into records.
pub fn load_records(dir: &Path) -> Result<Vec<ErrorRecord>> {
    let path = dir.join("errors.csv");
    let mut rd = csv::Reader::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let r = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if r.len() != 9 {
            return Err(Error::Parse(format!(
                "{}: expected 9 columns, got {}",
                path.display(),
                r.len()
            )));
        }
        let status = &r[8];
        out.push(ErrorRecord {
            n: parse(&r[0], &path)?,
            rep: parse(&r[1], &path)?,
            error: parse(&r[2], &path)?,
            clipped_fraction: parse(&r[3], &path)?,
            h: parse(&r[4], &path)?,
            delta_n: parse(&r[5], &path)?,
            min_modulus: parse(&r[6], &path)?,
            flagged_cells: parse(&r[7], &path)?,
            runtime_ms: 0.0,
            failure: (status != "ok").then(|| status.to_string()),
        });
    }
    let tpath = dir.join("timings.csv");
    if tpath.exists() {
        let mut rd = csv::Reader::from_path(&tpath).map_err(|e| Error::io(&tpath, e.into()))?;
        for (rec, r) in rd.records().zip(out.iter_mut()) {
            let t = rec.map_err(|e| Error::Parse(format!("{}: {e}", tpath.display())))?;
            r.runtime_ms = parse(&t[2], &tpath)?;
        }
    }
    Ok(out)
}

/// Rebuilds a result from a report directory and rewrites its files.
pub fn rerender(dir: &Path) -> Result<ExperimentResult> {
    let cpath = dir.join("config.toml");
    let text = fs::read_to_string(&cpath).map_err(|e| Error::io(&cpath, e))?;
    let config = ExperimentConfig::from_toml(&text)?;
    let records = load_records(dir)?;
    let result = aggregate(config, records, f64::NAN);
    emit_report(&result, dir)?;
    Ok(result)
}
