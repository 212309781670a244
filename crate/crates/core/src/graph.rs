//! k-nearest-neighbour adjacency on raw client samples.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};

use crate::error::{FdscError, Result};

pub const DEFAULT_K: usize = 5;

/// Binary symmetric k-NN graph with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    pub a: Array2<f64>,
    pub k: usize,
}

impl AdjacencyMatrix {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// All-zero graph, used where the graph term is switched off.
    pub fn empty(n: usize) -> Self {
        Self {
            a: Array2::zeros((n, n)),
            k: 0,
        }
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.a[[i, j]] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `i,j` edge list, both directions, header included.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j\n");
        for ((i, j), &v) in self.a.indexed_iter() {
            if v != 0.0 {
                let _ = writeln!(s, "{i},{j}");
            }
        }
        s
    }
}

fn squared_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Directed k-NN by Euclidean distance (ties to the smaller index), then
/// `A = max(A, A^T)` with the diagonal cleared.
pub fn knn_adjacency(samples: ArrayView2<f64>, k: usize) -> Result<AdjacencyMatrix> {
    let n = samples.nrows();
    if k == 0 || k >= n {
        return Err(FdscError::config(format!("k={k} must lie in [1, {n})")));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(FdscError::Data("NaN in samples".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(FdscError::Data("infinite value in samples".into()));
    }

    let dist = squared_distances(samples);
    let mut a = Array2::zeros((n, n));
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&p, &q| dist[[i, p]].total_cmp(&dist[[i, q]]).then(p.cmp(&q)));
        for &j in &order[..k] {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
    }
    Ok(AdjacencyMatrix { a, k })
}
