//! Lloyd's k-means with k-means++ seeding and restarts.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng as _;

use crate::error::{FdscError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iterations: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Array2<f64>,
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    match (a.as_slice(), b.as_slice()) {
        (Some(a), Some(b)) => sq_dist_slices(a, b),
        _ => a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum(),
    }
}

/// Four independent partial sums so long rows are not one serial add chain.
fn sq_dist_slices(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            let d = x[j] - y[j];
            acc[j] += d * d;
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn seed_centers(x: ArrayView2<f64>, k: usize, rng: &mut rng::Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centers = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // Rounding can run past the end; fall back to the last positive weight.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centers.row(c)));
        }
    }
    centers
}

fn assign(x: ArrayView2<f64>, centers: &Array2<f64>, labels: &mut [usize], dists: &mut [f64]) -> bool {
    let mut changed = false;
    for i in 0..x.nrows() {
        let (best, d) = centers
            .rows()
            .into_iter()
            .enumerate()
            .map(|(c, row)| (c, sq_dist(x.row(i), row)))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        if labels[i] != best {
            labels[i] = best;
            changed = true;
        }
        dists[i] = d;
    }
    changed
}

fn lloyd(x: ArrayView2<f64>, mut centers: Array2<f64>, max_iterations: usize) -> KMeansResult {
    let (n, k) = (x.nrows(), centers.nrows());
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    assign(x, &centers, &mut labels, &mut dists);
    for _ in 0..max_iterations {
        let mut sums = Array2::zeros(centers.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            let mut row = sums.row_mut(l);
            row += &x.row(i);
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centers.row_mut(c).assign(&mean);
            } else {
                // Empty cluster: move it onto the worst-served point.
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("n > 0");
                centers.row_mut(c).assign(&x.row(far));
                dists[far] = 0.0;
            }
        }
        if !assign(x, &centers, &mut labels, &mut dists) {
            break;
        }
    }
    let inertia = dists.iter().sum();
    KMeansResult {
        labels,
        centers,
        inertia,
    }
}

/// Best-inertia result over `config.restarts` seeded runs.
pub fn kmeans(x: ArrayView2<f64>, k: usize, config: &KMeansConfig, seed: u64) -> Result<KMeansResult> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(FdscError::config(format!("k-means with k={k} on {n} points")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FdscError::numerics("k-means input"));
    }
    let mut rng = rng::stream(seed, "kmeans", 0);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..config.restarts.max(1) {
        let centers = seed_centers(x, k, &mut rng);
        let run = lloyd(x, centers, config.max_iterations);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
