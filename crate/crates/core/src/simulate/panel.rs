use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// `n` unit-time increments `Z_t = X_t - X_{t-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementPanel {
    pub z: Vec<[f64; 2]>,
    pub n: usize,
    pub seed: u64,
    pub model_label: String,
    /// Small-jump cutoff used when simulating; 0 when sampling was exact.
    pub approximation_epsilon: f64,
}

impl IncrementPanel {
    pub fn new(
        z: Vec<[f64; 2]>,
        seed: u64,
        model_label: impl Into<String>,
        approximation_epsilon: f64,
    ) -> Result<Self> {
        if z.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("increments must be finite".into()));
        }
        Ok(IncrementPanel {
            n: z.len(),
            z,
            seed,
            model_label: model_label.into(),
            approximation_epsilon,
        })
    }

    /// Coordinate `k` (0 or 1) of every increment.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.z.iter().map(|p| p[k]).collect()
    }

    /// Writes `t,z1,z2` rows after `#`-comment lines for label, seed and
    /// cutoff.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# model: {}", self.model_label.replace('\n', " ")).map_err(io)?;
        writeln!(w, "# seed: {}", self.seed).map_err(io)?;
        writeln!(w, "# epsilon: {:e}", self.approximation_epsilon).map_err(io)?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["t", "z1", "z2"])
            .map_err(|e| Error::Parse(e.to_string()))?;
        for (t, p) in self.z.iter().enumerate() {
            cw.write_record(&[(t + 1).to_string(), format!("{:e}", p[0]), format!("{:e}", p[1])])
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
        cw.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = std::io::BufReader::new(file);
        let (mut label, mut seed, mut eps) = (String::new(), 0u64, 0.0);
        let mut body = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
                break;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("model:") {
                    label = v.trim().to_string();
                } else if let Some(v) = rest.strip_prefix("seed:") {
                    seed = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad seed '{}'", v.trim())))?;
                } else if let Some(v) = rest.strip_prefix("epsilon:") {
                    eps = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad epsilon '{}'", v.trim())))?;
                }
            } else {
                body.push_str(&line);
            }
        }
        let mut cr = csv::Reader::from_reader(body.as_bytes());
        let mut z = Vec::new();
        for rec in cr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse("short panel row".into()))?
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number in row {:?}", rec)))
            };
            z.push([field(1)?, field(2)?]);
        }
        Self::new(z, seed, label, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let p = IncrementPanel::new(vec![[1.0, -2.5e-7], [0.1, 3.0]], 42, "toy model", 1e-3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        p.write_csv(&path).unwrap();
        assert_eq!(IncrementPanel::read_csv(&path).unwrap(), p);
        assert!(IncrementPanel::new(vec![[f64::NAN, 0.0]], 0, "", 0.0).is_err());
    }
}
