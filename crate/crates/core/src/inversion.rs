//! Generalized inverse of a sampled curve after a running infimum.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Running infimum of a sampled curve started at `delta = abscissae[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneInverse {
    pub delta: f64,
    pub abscissae: Vec<f64>,
    pub envelope: Vec<f64>,
    pub source_label: String,
}

/// Result of a pseudo-inverse query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseValue {
    pub x: f64,
    /// No abscissa reached the level; `x` is the last grid point.
    pub out_of_range: bool,
}

/// Prefix minima of `values` over increasing `abscissae`.
pub fn running_infimum(abscissae: &[f64], values: &[f64], label: impl Into<String>) -> Result<MonotoneInverse> {
    if abscissae.is_empty() {
        return Err(Error::Empty("curve has no samples".into()));
    }
    if abscissae.len() != values.len() {
        return Err(Error::InvalidParameter(format!(
            "{} abscissae but {} values",
            abscissae.len(),
            values.len()
        )));
    }
    if abscissae.windows(2).any(|w| !(w[1] > w[0])) || !abscissae.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParameter(
            "abscissae must be finite and strictly increasing".into(),
        ));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "curve values must be finite and >= 0, found {v}"
        )));
    }
    let mut envelope = Vec::with_capacity(values.len());
    let mut low = f64::INFINITY;
    for &v in values {
        low = low.min(v);
        envelope.push(low);
    }
    Ok(MonotoneInverse {
        delta: abscissae[0],
        abscissae: abscissae.to_vec(),
        envelope,
        source_label: label.into(),
    })
}

impl MonotoneInverse {
    /// Leftmost abscissa whose envelope value is `<= z`.
    pub fn pseudo_inverse(&self, z: f64) -> InverseValue {
        let idx = if z >= self.envelope[0] {
            0
        } else {
            self.envelope.partition_point(|&e| e > z)
        };
        match self.abscissae.get(idx) {
            Some(&x) if z > 0.0 => InverseValue { x, out_of_range: false },
            _ => InverseValue {
                x: *self.abscissae.last().unwrap(),
                out_of_range: true,
            },
        }
    }

    /// Largest gap between consecutive abscissae.
    pub fn spacing(&self) -> f64 {
        self.abscissae.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Two-column dump `x,envelope`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# source: {}", self.source_label).map_err(io)?;
        writeln!(w, "x,envelope").map_err(io)?;
        for (x, e) in self.abscissae.iter().zip(&self.envelope) {
            writeln!(w, "{x},{e}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}
