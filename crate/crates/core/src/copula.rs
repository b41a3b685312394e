//! Plug-in estimators of the Levy copula and of the jump-distribution
//! copula of a compound Poisson process.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::inversion::{running_infimum, MonotoneInverse};
use crate::levy_model::TruthTables;
use crate::spectral::{tail_curve, TailEstimate};
use crate::Regime;

/// Anything that answers tail-integral queries and samples marginal tails.
pub trait TailSource {
    /// Estimate of `U(a, b)`, nonnegative.
    fn tail(&self, a: f64, b: f64) -> Result<f64>;
    /// `(x, U_k(x))` on a grid starting at `delta`.
    fn marginal_curve(&self, axis: usize, delta: f64) -> Result<(Vec<f64>, Vec<f64>)>;
    fn label(&self) -> String;
}

impl TailSource for TailEstimate {
    fn tail(&self, a: f64, b: f64) -> Result<f64> {
        self.clipped(a, b)
    }

    fn marginal_curve(&self, axis: usize, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let c = tail_curve(self, axis, delta)?;
        Ok((c.abscissae, c.values))
    }

    fn label(&self) -> String {
        format!("spectral(h={}, n={})", self.plan.h, self.n)
    }
}

/// True tail integrals sampled on a fixed abscissa grid.
#[derive(Debug, Clone)]
pub struct TruthTail {
    pub tables: TruthTables,
    pub grid: Vec<f64>,
}

impl TruthTail {
    /// Uniform grid of spacing `step` on `(0, x_max]`.
    pub fn uniform(tables: TruthTables, step: f64, x_max: f64) -> Self {
        let count = (x_max / step).round() as usize;
        TruthTail {
            tables,
            grid: (1..=count).map(|i| i as f64 * step).collect(),
        }
    }
}

impl TailSource for TruthTail {
    fn tail(&self, a: f64, b: f64) -> Result<f64> {
        self.tables.u(a, b)
    }

    fn marginal_curve(&self, axis: usize, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut xs = vec![delta];
        xs.extend(self.grid.iter().copied().filter(|&x| x > delta * (1.0 + 1e-12)));
        let ys = xs
            .iter()
            .map(|&x| match axis {
                1 => self.tables.u1(x),
                _ => self.tables.u2(x),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((xs, ys))
    }

    fn label(&self) -> String {
        format!("truth({})", self.tables.spec.label)
    }
}

/// `(log log n)^-1` (general) or `(log n)^-1` (compound Poisson), times
/// `multiplier`.
pub fn offset_delta(n: usize, regime: Regime, multiplier: f64) -> Result<f64> {
    if n < 16 {
        return Err(Error::InvalidParameter(format!("offset needs n >= 16, got {n}")));
    }
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "offset multiplier must be positive, got {multiplier}"
        )));
    }
    let l = (n as f64).ln();
    Ok(multiplier
        * match regime {
            Regime::General => 1.0 / l.ln(),
            Regime::Cpp => 1.0 / l,
        })
}

/// Cell flag bits.
pub const FLAG_OUT_OF_RANGE: u8 = 1;
pub const FLAG_ILL_CONDITIONED: u8 = 2;
/// Compound Poisson estimate outside `[0, 1]` before the lower clip.
pub const FLAG_EXCURSION: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSurface {
    pub u_values: Vec<f64>,
    pub v_values: Vec<f64>,
    /// Row-major in `u`; clipped below at zero.
    pub values: Vec<f64>,
    /// Values before the lower clip.
    pub raw: Vec<f64>,
    pub flags: Vec<u8>,
    pub regime: Regime,
    pub delta_n: f64,
    pub source_label: String,
}

impl CopulaSurface {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.v_values.len() + j]
    }

    pub fn flag(&self, i: usize, j: usize) -> u8 {
        self.flags[i * self.v_values.len() + j]
    }

    pub fn flagged_cells(&self, mask: u8) -> usize {
        self.flags.iter().filter(|f| **f & mask != 0).count()
    }

    /// `u,v,value,flag` with a metadata header.
    pub fn write_csv(&self, path: &Path, meta: &[(&str, String)]) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# regime: {}", self.regime).map_err(io)?;
        writeln!(w, "# delta_n: {}", self.delta_n).map_err(io)?;
        writeln!(w, "# source: {}", self.source_label).map_err(io)?;
        for (k, v) in meta {
            writeln!(w, "# {k}: {v}").map_err(io)?;
        }
        writeln!(w, "u,v,value,flag").map_err(io)?;
        for (i, u) in self.u_values.iter().enumerate() {
            for (j, v) in self.v_values.iter().enumerate() {
                writeln!(w, "{u},{v},{},{}", self.value(i, j), self.flag(i, j)).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// Uniform ladder of `count` points on `[lo, hi]`.
pub fn ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Marginal inverses `U_1^-1`, `U_2^-1` of a source, started at `delta`.
pub fn marginal_inverses<S: TailSource + ?Sized>(src: &S, delta: f64) -> Result<[MonotoneInverse; 2]> {
    let build = |axis: usize| -> Result<MonotoneInverse> {
        let (x, y) = src.marginal_curve(axis, delta)?;
        running_infimum(&x, &y, format!("{} U_{axis}", src.label()))
    };
    Ok([build(1)?, build(2)?])
}

fn base_flag(ill_conditioned: bool) -> u8 {
    if ill_conditioned {
        FLAG_ILL_CONDITIONED
    } else {
        0
    }
}

/// `N(U_1^-1(u), U_2^-1(v))` over the ladders.
pub fn levy_copula_estimate<S: TailSource + ?Sized>(
    src: &S,
    delta_n: f64,
    ill_conditioned: bool,
    u_ladder: &[f64],
    v_ladder: &[f64],
) -> Result<CopulaSurface> {
    if let Some(z) = u_ladder.iter().chain(v_ladder).find(|z| !(**z > 0.0)) {
        return Err(Error::OutOfRange(format!(
            "Levy copula arguments must be positive, got {z}"
        )));
    }
    let [inv1, inv2] = marginal_inverses(src, delta_n)?;
    let a: Vec<_> = u_ladder.iter().map(|&u| inv1.pseudo_inverse(u)).collect();
    let b: Vec<_> = v_ladder.iter().map(|&v| inv2.pseudo_inverse(v)).collect();
    let mut values = Vec::with_capacity(a.len() * b.len());
    let mut flags = Vec::with_capacity(values.capacity());
    for ai in &a {
        for bj in &b {
            values.push(src.tail(ai.x, bj.x)?);
            let mut f = base_flag(ill_conditioned);
            if ai.out_of_range || bj.out_of_range {
                f |= FLAG_OUT_OF_RANGE;
            }
            flags.push(f);
        }
    }
    Ok(CopulaSurface {
        u_values: u_ladder.to_vec(),
        v_values: v_ladder.to_vec(),
        raw: values.clone(),
        values,
        flags,
        regime: Regime::General,
        delta_n,
        source_label: src.label(),
    })
}

/// `1 + (N(a, b) - N(a, 0) - N(0, b)) / lambda`.
pub fn cpp_joint_cdf<S: TailSource + ?Sized>(src: &S, lambda: f64, a: f64, b: f64) -> Result<f64> {
    Ok(1.0 + (src.tail(a, b)? - src.tail(a, 0.0)? - src.tail(0.0, b)?) / lambda)
}

/// `M(V_1^-1(u), V_2^-1(v))` with `V_k^-1(u) = U_k^-1(lambda (1 - u))`.
pub fn cpp_copula_estimate<S: TailSource + ?Sized>(
    src: &S,
    lambda: f64,
    delta_n: f64,
    ill_conditioned: bool,
    u_ladder: &[f64],
    v_ladder: &[f64],
) -> Result<CopulaSurface> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "intensity must be positive, got {lambda}"
        )));
    }
    if let Some(z) = u_ladder.iter().chain(v_ladder).find(|z| !(**z > 0.0 && **z < 1.0)) {
        return Err(Error::OutOfRange(format!(
            "copula arguments must lie in (0,1), got {z}"
        )));
    }
    let [inv1, inv2] = marginal_inverses(src, delta_n)?;
    let a: Vec<_> = u_ladder
        .iter()
        .map(|&u| inv1.pseudo_inverse(lambda * (1.0 - u)))
        .collect();
    let b: Vec<_> = v_ladder
        .iter()
        .map(|&v| inv2.pseudo_inverse(lambda * (1.0 - v)))
        .collect();
    let tail_a = a.iter().map(|ai| src.tail(ai.x, 0.0)).collect::<Result<Vec<_>>>()?;
    let tail_b = b.iter().map(|bj| src.tail(0.0, bj.x)).collect::<Result<Vec<_>>>()?;
    let mut raw = Vec::with_capacity(a.len() * b.len());
    let mut flags = Vec::with_capacity(raw.capacity());
    for (ai, ta) in a.iter().zip(&tail_a) {
        for (bj, tb) in b.iter().zip(&tail_b) {
            let m = 1.0 + (src.tail(ai.x, bj.x)? - ta - tb) / lambda;
            let mut f = base_flag(ill_conditioned);
            if ai.out_of_range || bj.out_of_range {
                f |= FLAG_OUT_OF_RANGE;
            }
            if !(0.0..=1.0).contains(&m) {
                f |= FLAG_EXCURSION;
            }
            raw.push(m);
            flags.push(f);
        }
    }
    Ok(CopulaSurface {
        u_values: u_ladder.to_vec(),
        v_values: v_ladder.to_vec(),
        values: raw.iter().map(|m| m.max(0.0)).collect(),
        raw,
        flags,
        regime: Regime::Cpp,
        delta_n,
        source_label: src.label(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::{JumpDensitySpec, PointMass};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn offset_examples() {
        let n = std::f64::consts::E.powf(std::f64::consts::E.powi(2)).ceil() as usize;
        assert!(close(offset_delta(n, Regime::General, 1.0).unwrap(), 0.5, 1e-3));
        // ceil(e^2) = 8 is below the minimum; log n = 2 exactly only as a limit
        assert!(offset_delta(8, Regime::Cpp, 1.0).is_err());
        let n4 = std::f64::consts::E.powi(4).round() as usize;
        assert!(close(offset_delta(n4, Regime::Cpp, 2.0).unwrap(), 0.5, 1e-3));
        assert!(offset_delta(1000, Regime::Cpp, 0.0).is_err());
    }

    fn diagonal() -> TruthTail {
        let atoms = (1..=3)
            .map(|k| PointMass {
                location: [k as f64, k as f64],
                weight: 1.0,
            })
            .collect();
        let spec = JumpDensitySpec::point_masses(atoms).unwrap();
        TruthTail::uniform(TruthTables::new(spec, 1e-10), 0.01, 5.0)
    }

    #[test]
    fn diagonal_atoms_give_upper_frechet_bound() {
        let src = diagonal();
        let levels = [1.0, 2.0, 3.0];
        let s = levy_copula_estimate(&src, 0.05, false, &levels, &levels).unwrap();
        for (i, u) in levels.iter().enumerate() {
            for (j, v) in levels.iter().enumerate() {
                assert!(close(s.value(i, j), u.min(*v), 1e-12), "({u},{v}) -> {}", s.value(i, j));
                assert_eq!(s.flag(i, j), 0);
            }
        }
        let short = TruthTail {
            grid: src.grid.iter().copied().filter(|x| *x <= 2.5).collect(),
            ..src.clone()
        };
        let far = levy_copula_estimate(&short, 0.05, true, &[0.5], &[1.0]).unwrap();
        assert_eq!(far.flag(0, 0), FLAG_OUT_OF_RANGE | FLAG_ILL_CONDITIONED);
        assert!(levy_copula_estimate(&src, 0.05, false, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn single_atom_joint_cdf() {
        let spec = JumpDensitySpec::single_jump([1.0, 1.0], 1.0).unwrap();
        let src = TruthTail::uniform(TruthTables::new(spec, 1e-10), 0.01, 5.0);
        assert_eq!(cpp_joint_cdf(&src, 1.0, 0.5, 0.5).unwrap(), 0.0);
        assert_eq!(cpp_joint_cdf(&src, 1.0, 2.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn independent_margins_give_product() {
        // nu = 2 e^{-x1 - x2} on the quadrant
        let spec = JumpDensitySpec::custom("indep", 60.0, |x1: f64, x2: f64| {
            2.0 * (x1.powi(4) + x2.powi(4)) * (-x1 - x2).exp()
        })
        .unwrap();
        let lambda = spec.intensity().finite().unwrap();
        assert!(close(lambda, 2.0, 1e-6), "{lambda}");
        let src = TruthTail::uniform(TruthTables::new(spec, 1e-7), 0.01, 8.0);
        let lad = ladder(0.2, 0.8, 4);
        let s = cpp_copula_estimate(&src, lambda, 0.01, false, &lad, &lad).unwrap();
        for (i, u) in lad.iter().enumerate() {
            for (j, v) in lad.iter().enumerate() {
                // one grid step moves each margin by at most 0.01 * density
                assert!(close(s.value(i, j), u * v, 0.02), "({u},{v}) -> {}", s.value(i, j));
            }
        }
        assert_eq!(s.flagged_cells(FLAG_OUT_OF_RANGE | FLAG_EXCURSION), 0);
    }

    #[test]
    fn excursions_are_flagged_not_clamped_above() {
        struct Fake;
        impl TailSource for Fake {
            fn tail(&self, a: f64, b: f64) -> Result<f64> {
                // joint tail larger than the margins allow
                Ok(if a > 0.0 && b > 0.0 { 5.0 } else { 1.0 })
            }
            fn marginal_curve(&self, _: usize, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
                Ok((vec![delta, 1.0, 2.0], vec![2.0, 1.0, 0.0]))
            }
            fn label(&self) -> String {
                "fake".into()
            }
        }
        let s = cpp_copula_estimate(&Fake, 2.0, 0.1, false, &[0.5], &[0.5]).unwrap();
        assert_eq!(s.raw[0], 2.5);
        assert_eq!(s.values[0], 2.5);
        assert_eq!(s.flag(0, 0), FLAG_EXCURSION);
    }

    #[test]
    fn surface_csv() {
        let src = diagonal();
        let s = levy_copula_estimate(&src, 0.05, false, &[1.0], &[2.0, 3.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        s.write_csv(&p, &[("n", "10".into())]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("# n: 10\nu,v,value,flag\n1,2,1,0\n1,3,1,0\n"), "{text}");
    }
}
