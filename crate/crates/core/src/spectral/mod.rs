//! Self-expressive matrix to cluster labels: symmetric affinity, normalized
//! Laplacian, bottom eigenvectors, row normalization, k-means.

pub mod affinity;
pub mod eigen;
pub mod kmeans;

use ndarray::{Array2, Axis};

pub use affinity::{affinity_from_r, AffinityMatrix};
pub use eigen::{smallest_eigvecs, symmetric_eigen, EigenPairs};
pub use kmeans::{kmeans, KMeansConfig, KMeansResult};

use crate::error::{FdscError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
    pub k: usize,
}

/// `L = I - D^{-1/2} W D^{-1/2}`; zero-degree vertices get a zero scaling.
pub fn normalized_laplacian(w: &AffinityMatrix) -> Array2<f64> {
    let n = w.n();
    let inv_sqrt: Vec<f64> = w
        .w
        .sum_axis(Axis(1))
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut l = Array2::zeros((n, n));
    for ((i, j), &wij) in w.w.indexed_iter() {
        l[[i, j]] = -inv_sqrt[i] * wij * inv_sqrt[j];
    }
    for i in 0..n {
        l[[i, i]] += 1.0;
    }
    l
}

/// Ng-Jordan-Weiss spectral clustering into `k` groups.
pub fn spectral_cluster(w: &AffinityMatrix, k: usize, seed: u64) -> Result<ClusterLabels> {
    if k < 2 {
        return Err(FdscError::config("spectral clustering needs k >= 2"));
    }
    if k > w.n() {
        return Err(FdscError::config(format!("k={k} exceeds n={}", w.n())));
    }
    let l = normalized_laplacian(w);
    let mut u = smallest_eigvecs(&l, k)?.vectors;
    for mut row in u.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let result = kmeans(u.view(), k, &KMeansConfig::default(), seed)?;
    Ok(ClusterLabels {
        labels: result.labels,
        k,
    })
}
