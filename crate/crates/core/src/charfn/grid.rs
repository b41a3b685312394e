use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform symmetric axis `k * du` for `k = -half..=half`.
pub fn symmetric_axis(half: usize, du: f64) -> Vec<f64> {
    (-(half as i64)..=half as i64).map(|k| k as f64 * du).collect()
}

/// Characteristic function and its pure partial derivatives on a
/// rectangular grid. Arrays are row-major: index `i1 * len(u2) + i2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFnGrid {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    /// `phi(u)`
    pub phi: Vec<Complex64>,
    /// `derivs[k][l - 1]` holds `d^l phi / du_k^l` for `l = 1..=4`.
    pub derivs: [[Vec<Complex64>; 4]; 2],
    /// Sample size behind an empirical grid; 0 for exact grids.
    pub n: usize,
    /// Set when the values come from the accelerated (gridding) path.
    pub approximate: bool,
}

impl CharFnGrid {
    pub fn zeros(u1: Vec<f64>, u2: Vec<f64>, n: usize) -> Self {
        let len = u1.len() * u2.len();
        let z = || vec![Complex64::new(0.0, 0.0); len];
        CharFnGrid {
            u1,
            u2,
            phi: z(),
            derivs: [[z(), z(), z(), z()], [z(), z(), z(), z()]],
            n,
            approximate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u1.len(), self.u2.len())
    }

    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.u2.len() + i2
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let n2 = self.u2.len();
        [self.u1[idx / n2], self.u2[idx % n2]]
    }

    /// Array for `d^l / du_k^l`, `k` in {1, 2}; `l = 0` is `phi` itself.
    pub fn values(&self, l: usize, k: usize) -> &[Complex64] {
        assert!(
            l <= 4 && (k == 1 || k == 2),
            "derivative order or coordinate out of range"
        );
        if l == 0 {
            &self.phi
        } else {
            &self.derivs[k - 1][l - 1]
        }
    }

    pub fn values_mut(&mut self, l: usize, k: usize) -> &mut Vec<Complex64> {
        assert!(
            l <= 4 && (k == 1 || k == 2),
            "derivative order or coordinate out of range"
        );
        if l == 0 {
            &mut self.phi
        } else {
            &mut self.derivs[k - 1][l - 1]
        }
    }

    pub fn same_axes(&self, other: &CharFnGrid) -> bool {
        self.u1 == other.u1 && self.u2 == other.u2
    }

    /// Multiplies by the characteristic function of an independent
    /// Gaussian `N(0, sigma)` (Leibniz rule for the derivatives).
    pub fn times_gaussian(&self, sigma: [[f64; 2]; 2]) -> CharFnGrid {
        let mut out = self.clone();
        for idx in 0..self.len() {
            let u = self.point(idx);
            let q = sigma[0][0] * u[0] * u[0] + 2.0 * sigma[0][1] * u[0] * u[1] + sigma[1][1] * u[1] * u[1];
            let g0 = (-0.5 * q).exp();
            out.phi[idx] = self.phi[idx] * g0;
            for k in 0..2 {
                // derivatives of exp(-q/2) along u_k
                let s = -(sigma[k][0] * u[0] + sigma[k][1] * u[1]);
                let c = -sigma[k][k];
                let g = [
                    g0,
                    g0 * s,
                    g0 * (s * s + c),
                    g0 * (s * s * s + 3.0 * s * c),
                    g0 * (s.powi(4) + 6.0 * s * s * c + 3.0 * c * c),
                ];
                let f: Vec<Complex64> = (0..=4).map(|l| self.values(l, k + 1)[idx]).collect();
                const BINOM: [[f64; 5]; 5] = [
                    [1.0, 0.0, 0.0, 0.0, 0.0],
                    [1.0, 1.0, 0.0, 0.0, 0.0],
                    [1.0, 2.0, 1.0, 0.0, 0.0],
                    [1.0, 3.0, 3.0, 1.0, 0.0],
                    [1.0, 4.0, 6.0, 4.0, 1.0],
                ];
                for l in 1..=4 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..=l {
                        acc += f[j] * (BINOM[l][j] * g[l - j]);
                    }
                    out.derivs[k][l - 1][idx] = acc;
                }
            }
        }
        out
    }

    /// Writes one CSV with columns `u1,u2` and `re,im` pairs for all nine
    /// arrays.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# n: {}", self.n).map_err(io)?;
        let mut header = String::from("u1,u2,phi_re,phi_im");
        for k in 1..=2 {
            for l in 1..=4 {
                header.push_str(&format!(",d{l}_u{k}_re,d{l}_u{k}_im"));
            }
        }
        writeln!(w, "{header}").map_err(io)?;
        for idx in 0..self.len() {
            let [a, b] = self.point(idx);
            let mut line = format!("{a},{b},{},{}", self.phi[idx].re, self.phi[idx].im);
            for k in 0..2 {
                for l in 0..4 {
                    let v = self.derivs[k][l][idx];
                    line.push_str(&format!(",{},{}", v.re, v.im));
                }
            }
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Binary layout (little endian): magic `LCGRID01`, `n` as u64,
    /// axis lengths as u64, the two axis vectors, then the nine arrays in
    /// the order phi, d1..d4 along u1, d1..d4 along u2, each row-major with
    /// interleaved re/im doubles.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(32 + 8 * (self.u1.len() + self.u2.len()) + 9 * 16 * self.len());
        buf.extend_from_slice(b"LCGRID01");
        buf.extend_from_slice(&(self.n as u64).to_le_bytes());
        buf.extend_from_slice(&(self.u1.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.u2.len() as u64).to_le_bytes());
        for v in self.u1.iter().chain(&self.u2) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for arr in self.arrays() {
            for z in arr {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = || Error::Parse(format!("{} is not a valid grid file", path.display()));
        if bytes.len() < 32 || &bytes[..8] != b"LCGRID01" {
            return Err(bad());
        }
        let mut pos = 8;
        let next = |pos: &mut usize| -> Result<[u8; 8]> {
            let s = bytes.get(*pos..*pos + 8).ok_or_else(bad)?;
            *pos += 8;
            Ok(s.try_into().unwrap())
        };
        let n = u64::from_le_bytes(next(&mut pos)?) as usize;
        let l1 = u64::from_le_bytes(next(&mut pos)?) as usize;
        let l2 = u64::from_le_bytes(next(&mut pos)?) as usize;
        let expected = 32 + 8 * (l1 + l2) + 9 * 16 * l1 * l2;
        if bytes.len() != expected {
            return Err(bad());
        }
        let f = |pos: &mut usize| f64::from_le_bytes(next(pos).unwrap());
        let u1: Vec<f64> = (0..l1).map(|_| f(&mut pos)).collect();
        let u2: Vec<f64> = (0..l2).map(|_| f(&mut pos)).collect();
        let mut g = CharFnGrid::zeros(u1, u2, n);
        for a in 0..9 {
            for i in 0..l1 * l2 {
                let re = f(&mut pos);
                let im = f(&mut pos);
                let v = Complex64::new(re, im);
                match a {
                    0 => g.phi[i] = v,
                    _ => g.derivs[(a - 1) / 4][(a - 1) % 4][i] = v,
                }
            }
        }
        Ok(g)
    }

    fn arrays(&self) -> impl Iterator<Item = &Vec<Complex64>> {
        std::iter::once(&self.phi).chain(self.derivs.iter().flat_map(|d| d.iter()))
    }
}
