//! Weighted sup-metric over characteristic function grids.

use super::grid::CharFnGrid;
use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.25;

/// `w(u) = (ln(e + |u|))^{-1/2 - delta}`.
pub fn weight(u: [f64; 2], delta: f64) -> f64 {
    let r = u[0].hypot(u[1]);
    (std::f64::consts::E + r).ln().powf(-0.5 - delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedMetricConfig {
    pub delta_exponent: f64,
    /// Whether to add the `l = 0` term `||phi1 - phi2||_w`.
    pub include_level_zero: bool,
}

impl Default for WeightedMetricConfig {
    fn default() -> Self {
        WeightedMetricConfig {
            delta_exponent: DEFAULT_DELTA,
            include_level_zero: true,
        }
    }
}

impl WeightedMetricConfig {
    pub fn new(delta_exponent: f64) -> Result<Self> {
        if !(delta_exponent > 0.0) || !delta_exponent.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {delta_exponent}"
            )));
        }
        Ok(WeightedMetricConfig {
            delta_exponent,
            ..Default::default()
        })
    }
}

/// Per-array weighted sup norms of `g1 - g2`: `[level0, [k1 l1..l4], [k2 l1..l4]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceTerms {
    pub level0: f64,
    pub derivs: [[f64; 4]; 2],
}

impl DistanceTerms {
    pub fn total(&self, include_level_zero: bool) -> f64 {
        let d: f64 = self.derivs.iter().flatten().sum();
        if include_level_zero {
            d + self.level0
        } else {
            d
        }
    }
}

pub fn distance_terms(g1: &CharFnGrid, g2: &CharFnGrid, delta: f64) -> Result<DistanceTerms> {
    if !g1.same_axes(g2) {
        return Err(Error::GridMismatch("the two grids have different axes".into()));
    }
    let w: Vec<f64> = (0..g1.len()).map(|i| weight(g1.point(i), delta)).collect();
    let sup = |a: &[num_complex::Complex64], b: &[num_complex::Complex64]| {
        a.iter()
            .zip(b)
            .zip(&w)
            .map(|((x, y), w)| (x - y).norm() * w)
            .fold(0.0, f64::max)
    };
    let mut derivs = [[0.0; 4]; 2];
    for k in 0..2 {
        for l in 0..4 {
            derivs[k][l] = sup(&g1.derivs[k][l], &g2.derivs[k][l]);
        }
    }
    Ok(DistanceTerms {
        level0: sup(&g1.phi, &g2.phi),
        derivs,
    })
}

/// Grid version of `d^(4)`. Being a max over grid points it is a lower
/// bound of the continuum supremum.
pub fn weighted_sup_distance(g1: &CharFnGrid, g2: &CharFnGrid, cfg: &WeightedMetricConfig) -> Result<f64> {
    Ok(distance_terms(g1, g2, cfg.delta_exponent)?.total(cfg.include_level_zero))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::grid::symmetric_axis;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn weight_values() {
        assert_eq!(weight([0.0, 0.0], 0.25), 1.0);
        assert_eq!(weight([0.0, 0.0], 3.0), 1.0);
        assert!(weight([10.0, 0.0], 0.25) < weight([1.0, 0.0], 0.25));
        assert!(WeightedMetricConfig::new(0.0).is_err());
        assert_eq!(WeightedMetricConfig::default().delta_exponent, 0.25);
    }

    #[test]
    fn distance_basics() {
        let ax = symmetric_axis(2, 1.0);
        let g = CharFnGrid::zeros(ax.clone(), ax.clone(), 0);
        let cfg = WeightedMetricConfig::default();
        assert_eq!(weighted_sup_distance(&g, &g, &cfg).unwrap(), 0.0);
        let mut h = g.clone();
        h.phi[12] = Complex64::new(0.5, 0.0);
        h.derivs[1][2][0] = Complex64::new(0.0, 2.0);
        let d = weighted_sup_distance(&g, &h, &cfg).unwrap();
        let expected = 0.5 + 2.0 * weight([-2.0, -2.0], 0.25);
        assert!((d - expected).abs() < 1e-15);
        let no0 = WeightedMetricConfig {
            include_level_zero: false,
            ..cfg
        };
        assert!((weighted_sup_distance(&g, &h, &no0).unwrap() - (expected - 0.5)).abs() < 1e-15);
        let other = CharFnGrid::zeros(symmetric_axis(1, 1.0), ax, 0);
        assert!(weighted_sup_distance(&g, &other, &cfg).is_err());
    }

    proptest! {
        #[test]
        fn weight_in_unit_interval_and_radially_decreasing(a in -1e3f64..1e3, b in -1e3f64..1e3, d in 0.01f64..2.0) {
            let w = weight([a, b], d);
            prop_assert!(w > 0.0 && w <= 1.0);
            prop_assert!(weight([2.0 * a, 2.0 * b], d) <= w);
        }
    }
}
