//! Log-log rate fits with a bootstrap interval.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Least squares of `y` on `x`; returns `(slope, intercept)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("regressor has no spread".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

fn fit_medians(ns: &[f64], medians: &[f64]) -> Result<(f64, f64)> {
    if let Some(m) = medians.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::Degenerate(format!("median error {m} has no logarithm")));
    }
    let y: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    least_squares(ns, &y)
}

/// Fits `log median error` against `log n`. The interval resamples the
/// replications within each `n` (`bootstrap` rounds, seeded).
pub fn rate_regression(groups: &[(usize, Vec<f64>)], bootstrap: usize, seed: u64) -> Result<RateFit> {
    if groups.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "a rate fit needs at least 3 sample sizes, got {}",
            groups.len()
        )));
    }
    if let Some((n, _)) = groups.iter().find(|(_, e)| e.is_empty()) {
        return Err(Error::Empty(format!("no successful replication at n = {n}")));
    }
    let ln: Vec<f64> = groups.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let medians: Vec<f64> = groups.iter().map(|(_, e)| median(e)).collect();
    let (slope, intercept) = fit_medians(&ln, &medians)?;
    let (mut ci_lo, mut ci_hi) = (slope, slope);
    if bootstrap > 0 {
        let mut rng = stream_rng(seed, u64::MAX);
        let mut slopes = Vec::with_capacity(bootstrap);
        let mut buf = Vec::new();
        for _ in 0..bootstrap {
            let meds: Vec<f64> = groups
                .iter()
                .map(|(_, e)| {
                    buf.clear();
                    buf.extend((0..e.len()).map(|_| e[rng.random_range(0..e.len())]));
                    median(&buf)
                })
                .collect();
            if let Ok((s, _)) = fit_medians(&ln, &meds) {
                slopes.push(s);
            }
        }
        slopes.sort_by(f64::total_cmp);
        if !slopes.is_empty() {
            ci_lo = quantile(&slopes, 0.025);
            ci_hi = quantile(&slopes, 0.975);
        }
    }
    Ok(RateFit {
        slope,
        intercept,
        ci_lo,
        ci_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_rates() {
        let ns = [1024usize, 2048, 4096, 8192];
        let g: Vec<_> = ns.iter().map(|&n| (n, vec![3.0 / (n as f64).sqrt(); 5])).collect();
        let fit = rate_regression(&g, 200, 1).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((fit.ci_lo + 0.5).abs() < 1e-12 && (fit.ci_hi + 0.5).abs() < 1e-12);
        let flat: Vec<_> = ns.iter().map(|&n| (n, vec![0.2])).collect();
        assert!(rate_regression(&flat, 0, 1).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let two: Vec<_> = [10usize, 20].iter().map(|&n| (n, vec![1.0])).collect();
        assert!(rate_regression(&two, 0, 1).is_err());
        let zero: Vec<_> = [10usize, 20, 40].iter().map(|&n| (n, vec![0.0])).collect();
        assert!(matches!(rate_regression(&zero, 0, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bootstrap_is_seeded_and_brackets() {
        let g: Vec<_> = [100usize, 400, 1600, 6400]
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                (
                    n,
                    (0..9)
                        .map(|k| (1.0 + 0.1 * ((k * 7 + i) % 5) as f64) / (n as f64).sqrt())
                        .collect(),
                )
            })
            .collect();
        let a = rate_regression(&g, 300, 9).unwrap();
        assert_eq!(a, rate_regression(&g, 300, 9).unwrap());
        assert!(a.ci_lo <= a.slope && a.slope <= a.ci_hi);
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
    }
}
