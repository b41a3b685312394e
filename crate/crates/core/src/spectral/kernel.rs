//! Fejer product kernel and bandwidth rules.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Regime;

/// Kernel families; only the Fejer product kernel ships.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    FejerProduct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub h: f64,
}

impl KernelSpec {
    pub fn fejer(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
        }
        Ok(KernelSpec {
            kind: KernelKind::FejerProduct,
            h,
        })
    }

    /// `FK_h(u) = FK(h u)`.
    pub fn fourier(&self, u: [f64; 2]) -> f64 {
        kernel_fk(u, self.h)
    }

    /// `K_h(x) = h^-2 K(x / h)`.
    pub fn spatial(&self, x: [f64; 2]) -> f64 {
        kernel_k1(x[0] / self.h) * kernel_k1(x[1] / self.h) / (self.h * self.h)
    }
}

/// `(1 - h|u1|)_+ (1 - h|u2|)_+`.
pub fn kernel_fk(u: [f64; 2], h: f64) -> f64 {
    (1.0 - h * u[0].abs()).max(0.0) * (1.0 - h * u[1].abs()).max(0.0)
}

/// One-dimensional Fejer kernel `(2 pi)^-1 (sin(x/2) / (x/2))^2`, whose
/// Fourier transform is the hat `(1 - |u|)_+`.
pub fn kernel_k1(x: f64) -> f64 {
    let half = 0.5 * x;
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    sinc * sinc / (2.0 * PI)
}

/// `c loglog(n)/sqrt(log n)` (general) or `c n^-1/2` (compound Poisson).
pub fn bandwidth(n: usize, regime: Regime, c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth multiplier must be positive, got {c}"
        )));
    }
    match regime {
        Regime::General => {
            if n < 16 {
                return Err(Error::InvalidParameter(format!(
                    "the general bandwidth needs n >= 16, got {n}"
                )));
            }
            let l = (n as f64).ln();
            Ok(c * l.ln() / l.sqrt())
        }
        Regime::Cpp => {
            if n == 0 {
                return Err(Error::InvalidParameter("n must be positive".into()));
            }
            Ok(c / (n as f64).sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fk_examples() {
        assert_eq!(kernel_fk([0.0, 0.0], 0.3), 1.0);
        assert_eq!(kernel_fk([1.0 / 0.3, 0.7], 0.3), 0.0);
        assert!((kernel_fk([1.0 / 0.6, 0.0], 0.3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bandwidth_examples() {
        assert!((bandwidth(10_000, Regime::Cpp, 1.0).unwrap() - 0.01).abs() < 1e-15);
        let l = 16f64.ln();
        assert!((bandwidth(16, Regime::General, 2.0).unwrap() - 2.0 * l.ln() / l.sqrt()).abs() < 1e-15);
        assert!(bandwidth(15, Regime::General, 1.0).is_err());
        assert!(bandwidth(100, Regime::Cpp, 0.0).is_err());
    }

    #[test]
    fn k1_integrates_to_one() {
        // panels between consecutive zeros at 2 pi k
        let (nodes, weights) = crate::quad::gauss_legendre(16);
        let mut total = 0.0;
        let panels = (1e4 / (2.0 * PI)).ceil() as usize;
        for p in 0..panels {
            let a = 2.0 * PI * p as f64;
            let b = (a + 2.0 * PI).min(1e4);
            for (x, w) in nodes.iter().zip(&weights) {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                total += 2.0 * 0.5 * (b - a) * w * kernel_k1(t);
            }
        }
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    proptest! {
        #[test]
        fn fk_in_unit_interval(u1 in -50.0f64..50.0, u2 in -50.0f64..50.0, h in 0.01f64..2.0) {
            let v = kernel_fk([u1, u2], h);
            prop_assert!((0.0..=1.0).contains(&v));
            if u1.abs() >= 1.0 / h || u2.abs() >= 1.0 / h {
                prop_assert_eq!(v, 0.0);
            }
            prop_assert!((v - kernel_fk([-u1, u2], h)).abs() == 0.0);
        }
    }
}
