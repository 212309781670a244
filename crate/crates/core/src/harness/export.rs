//! 2-D views of a finished run: PCA of the encoder codes and the
//! label-sorted affinity matrix of every client.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2, ArrayView2, Axis};

use super::config::ExperimentConfig;
use super::experiment::{final_client_checkpoint, prepare};
use crate::autonet::{checkpoint, encode};
use crate::error::{FdscError, Result};
use crate::federation::init_client_params;
use crate::spectral::{affinity_from_r, symmetric_eigen};

/// Projects rows onto the top two principal axes. Uses the `n x n` Gram
/// matrix when there are more columns than rows. Missing components (rank
/// below two) come out as zero columns.
pub fn pca_2d(x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n, 2));
    if n == 0 {
        return Ok(out);
    }
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let xc = &x - &mean;
    if d > n {
        // Xc Xc^T = U S^2 U^T, and the scores are U S.
        let gram = xc.dot(&xc.t());
        let eig = symmetric_eigen(&gram)?;
        for j in 0..2.min(n) {
            let idx = n - 1 - j;
            let lambda = eig.values[idx].max(0.0);
            out.column_mut(j).assign(&(&eig.vectors.column(idx) * lambda.sqrt()));
        }
    } else {
        let cov = xc.t().dot(&xc);
        let eig = symmetric_eigen(&cov)?;
        for j in 0..2.min(d) {
            out.column_mut(j).assign(&xc.dot(&eig.vectors.column(d - 1 - j)));
        }
    }
    Ok(out)
}

pub fn pca_csv(points: &Array2<f64>, labels: &[usize]) -> String {
    let mut s = String::from("x,y,label\n");
    for (row, l) in points.rows().into_iter().zip(labels) {
        let _ = writeln!(s, "{:e},{:e},{l}", row[0], row[1]);
    }
    s
}

/// Indices sorted by label, stable within a label.
pub fn label_order(labels: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| labels[i]);
    order
}

/// Writes `pca_clientXXX.csv` and `affinity_clientXXX.bin` for every client
/// of a run whose outputs live in `run_dir`. Returns the written paths.
pub fn export_views(config: &ExperimentConfig, run_dir: &Path) -> Result<Vec<PathBuf>> {
    let (_, shards) = prepare(config)?;
    let out_dir = run_dir.join("export");
    std::fs::create_dir_all(&out_dir)?;
    let mut written = Vec::new();
    for shard in &shards {
        let ckpt = final_client_checkpoint(run_dir, shard.client_id);
        let bytes = std::fs::read(&ckpt).map_err(|e| {
            FdscError::config(format!("missing checkpoint {}: {e}", ckpt.display()))
        })?;
        let mut params = init_client_params(config.seed, shard.client_id, shard, &config.arch)?;
        checkpoint::load_net_into(&bytes, &mut params).map_err(|e| e.at_stage("export"))?;

        let z = encode(&params.encoder, shard.samples.view())?;
        let pca = pca_2d(z.view())?;
        let p = out_dir.join(format!("pca_client{:03}.csv", shard.client_id));
        std::fs::write(&p, pca_csv(&pca, &shard.labels))?;
        written.push(p);

        let w = affinity_from_r(&params.r.r, config.affinity_top_s)?;
        let p = out_dir.join(format!("affinity_client{:03}.bin", shard.client_id));
        w.permuted(&label_order(&shard.labels)).write_f32(&p)?;
        written.push(p);
    }
    Ok(written)
}

/// Share of the total affinity mass lying in the diagonal label blocks of
/// a label-sorted matrix.
pub fn block_mass_fraction(w: &Array2<f64>, sorted_labels: &[usize]) -> f64 {
    let n = sorted_labels.len();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut inside = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end < n && sorted_labels[end] == sorted_labels[start] {
            end += 1;
        }
        inside += w.slice(s![start..end, start..end]).sum();
        start = end;
    }
    inside / total
}
