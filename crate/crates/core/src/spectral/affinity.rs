use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{FdscError, Result};

/// Symmetric, nonnegative, zero-diagonal similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub w: Array2<f64>,
}

impl AffinityMatrix {
    pub fn new(w: Array2<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(FdscError::shape("affinity must be square"));
        }
        for ((i, j), &v) in w.indexed_iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(FdscError::Data(format!("affinity entry ({i},{j}) = {v}")));
            }
            if v != w[[j, i]] {
                return Err(FdscError::Data("affinity must be symmetric".into()));
            }
            if i == j && v != 0.0 {
                return Err(FdscError::Data("affinity diagonal must be zero".into()));
            }
        }
        Ok(Self { w })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Rows and columns reordered by `order` (new index -> old index).
    pub fn permuted(&self, order: &[usize]) -> AffinityMatrix {
        let n = self.n();
        AffinityMatrix {
            w: Array2::from_shape_fn((n, n), |(i, j)| self.w[[order[i], order[j]]]),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.w.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    /// `u32 n` (LE) followed by `n * n` row-major LE f32 values.
    pub fn to_f32_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.w.len());
        out.extend_from_slice(&(self.n() as u32).to_le_bytes());
        for v in self.w.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    /// Reads the [`to_f32_bytes`](Self::to_f32_bytes) layout. Values are not
    /// re-validated beyond shape so that exported files reload verbatim.
    pub fn from_f32_bytes(bytes: &[u8]) -> Result<Self> {
        let header: [u8; 4] = bytes
            .get(..4)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| FdscError::format("affinity file truncated"))?;
        let n = u32::from_le_bytes(header) as usize;
        let payload = &bytes[4..];
        if payload.len() != n * n * 4 {
            return Err(FdscError::format(format!(
                "affinity payload has {} bytes, expected {}",
                payload.len(),
                n * n * 4
            )));
        }
        let values: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        let w = Array2::from_shape_vec((n, n), values).expect("n*n values");
        Ok(Self { w })
    }

    pub fn write_f32(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_f32_bytes())?;
        Ok(())
    }
}

/// `W = (|R| + |R^T|) / 2` with zero diagonal. With `top_s`, each row of
/// `|R|` keeps only its `s` largest entries (ties to the smaller column)
/// before symmetrization.
pub fn affinity_from_r(r: &Array2<f64>, top_s: Option<usize>) -> Result<AffinityMatrix> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(FdscError::shape("self-expressive matrix must be square"));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FdscError::numerics("self-expressive matrix"));
    }
    let mut c = r.mapv(f64::abs);
    c.diag_mut().fill(0.0);
    if let Some(s) = top_s {
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for mut row in c.rows_mut() {
            order.clear();
            order.extend(0..n);
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            for &j in order.iter().skip(s) {
                row[j] = 0.0;
            }
        }
    }
    let w = (&c + &c.t()) * 0.5;
    Ok(AffinityMatrix { w })
}
