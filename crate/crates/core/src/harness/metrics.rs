//! Error metrics against reference values.

use crate::copula::{ladder, CopulaSurface};
use crate::error::{Error, Result};
use crate::levy_model::{marginal_inverse_truth, tail_integral_truth, JumpDensitySpec};
use crate::spectral::TailEstimate;
use crate::Regime;

/// `min(|(a,b)|^2, |(a,b)|^4)`.
pub fn eta(a: f64, b: f64) -> f64 {
    let r2 = a * a + b * b;
    r2.min(r2 * r2)
}

/// `count` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// Reference tail integrals on a log grid.
#[derive(Debug, Clone)]
pub struct TailTruth {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
}

impl TailTruth {
    pub fn new(spec: &JumpDensitySpec, lo: f64, hi: f64, count: usize, tol: f64) -> Result<Self> {
        let g = log_grid(lo, hi, count);
        let mut points = Vec::with_capacity(g.len() * g.len());
        let mut values = Vec::with_capacity(points.capacity());
        for &a in &g {
            for &b in &g {
                points.push([a, b]);
                values.push(tail_integral_truth(spec, a, b, tol)?);
            }
        }
        Ok(TailTruth { points, values })
    }

    /// `sup eta |U - N|` over grid points with `max(a, b)` above the floor.
    pub fn error(&self, te: &TailEstimate) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut used = 0;
        for (p, u) in self.points.iter().zip(&self.values) {
            if p[0].max(p[1]) < te.delta_floor {
                continue;
            }
            let est = te.clipped(p[0], p[1])?;
            worst = worst.max(eta(p[0], p[1]) * (u - est).abs());
            used += 1;
        }
        if used == 0 {
            return Err(Error::OutOfRange("every evaluation point lies below the floor".into()));
        }
        Ok(worst)
    }
}

/// Reference copula on a uniform ladder.
#[derive(Debug, Clone)]
pub struct CopulaTruth {
    pub ladder: Vec<f64>,
    pub regime: Regime,
    pub values: Vec<f64>,
}

impl CopulaTruth {
    pub fn new(spec: &JumpDensitySpec, regime: Regime, lo: f64, hi: f64, count: usize, tol: f64) -> Result<Self> {
        let lad = ladder(lo, hi, count);
        let lambda =
            match regime {
                Regime::Cpp => Some(spec.intensity().finite().ok_or_else(|| {
                    Error::InvalidParameter("the compound Poisson copula needs finite intensity".into())
                })?),
                Regime::General => None,
            };
        let level = |u: f64| lambda.map_or(u, |l| l * (1.0 - u));
        let inv = |k: usize| -> Result<Vec<f64>> {
            lad.iter()
                .map(|&u| marginal_inverse_truth(spec, k, level(u), tol))
                .collect()
        };
        let (a, b) = (inv(1)?, inv(2)?);
        let tail_a = a
            .iter()
            .map(|&x| tail_integral_truth(spec, x, 0.0, tol))
            .collect::<Result<Vec<_>>>()?;
        let tail_b = b
            .iter()
            .map(|&y| tail_integral_truth(spec, 0.0, y, tol))
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(a.len() * b.len());
        for (x, ta) in a.iter().zip(&tail_a) {
            for (y, tb) in b.iter().zip(&tail_b) {
                let u = tail_integral_truth(spec, *x, *y, tol)?;
                values.push(match lambda {
                    Some(l) => 1.0 + (u - ta - tb) / l,
                    None => u,
                });
            }
        }
        Ok(CopulaTruth {
            ladder: lad,
            regime,
            values,
        })
    }

    /// `sup |C - C_n|` over the ladder.
    pub fn error(&self, s: &CopulaSurface) -> Result<f64> {
        if s.u_values != self.ladder || s.v_values != self.ladder || s.regime != self.regime {
            return Err(Error::GridMismatch(
                "surface and reference use different ladders".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&s.values)
            .map(|(t, e)| (t - e).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{cpp_copula_estimate, TruthTail};
    use crate::levy_model::TruthTables;

    #[test]
    fn eta_switches_at_unit_norm() {
        assert_eq!(eta(0.5, 0.0), 0.0625);
        assert_eq!(eta(2.0, 0.0), 4.0);
        assert_eq!(eta(0.6, 0.8), 1.0);
    }

    #[test]
    fn log_grid_ends() {
        let g = log_grid(0.1, 5.0, 15);
        assert_eq!(g.len(), 15);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[14] - 5.0).abs() < 1e-12);
        assert!((g[1] / g[0] - g[14] / g[13]).abs() < 1e-12);
    }

    #[test]
    fn cpp_truth_is_a_copula_on_atoms_free_margins() {
        let spec = JumpDensitySpec::cpp_log(1.0).unwrap();
        let t = CopulaTruth::new(&spec, Regime::Cpp, 0.2, 0.8, 4, 1e-9).unwrap();
        // C(u, v) <= min(u, v) and >= u + v - 1
        for (i, u) in t.ladder.iter().enumerate() {
            for (j, v) in t.ladder.iter().enumerate() {
                let c = t.values[i * 4 + j];
                assert!(
                    c <= u.min(*v) + 1e-7 && c >= (u + v - 1.0).max(0.0) - 1e-7,
                    "{u},{v}: {c}"
                );
            }
        }
    }

    #[test]
    fn plug_through_error_is_grid_sized() {
        let spec = JumpDensitySpec::cpp_log(1.0).unwrap();
        let t = CopulaTruth::new(&spec, Regime::Cpp, 0.2, 0.8, 5, 1e-10).unwrap();
        let src = TruthTail::uniform(TruthTables::new(spec, 1e-10), 0.005, 8.0);
        let s = cpp_copula_estimate(&src, 1.0, 0.005, false, &t.ladder, &t.ladder).unwrap();
        let err = t.error(&s).unwrap();
        assert!(err < 0.01, "{err}");
    }
}
