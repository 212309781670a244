use std::collections::BTreeMap;

use ndarray::Array2;

use super::hungarian::max_weight_assignment;
use crate::error::{FdscError, Result};

/// Counts of (predicted cluster, true class) co-occurrences. Labels are
/// compacted to `0..k` in ascending order of their original value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `k_pred x k_true`
    pub counts: Array2<u64>,
    pub pred_marginals: Vec<u64>,
    pub true_marginals: Vec<u64>,
    pub n: u64,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let ids: BTreeMap<usize, usize> = labels
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(FdscError::shape(format!(
                "{} predictions for {} labels",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(FdscError::config("metrics need at least one sample"));
        }
        let (p, kp) = compact(pred);
        let (t, kt) = compact(truth);
        let mut counts = Array2::zeros((kp, kt));
        for (&a, &b) in p.iter().zip(&t) {
            counts[[a, b]] += 1;
        }
        let pred_marginals = counts.rows().into_iter().map(|r| r.sum()).collect();
        let true_marginals = counts.columns().into_iter().map(|c| c.sum()).collect();
        Ok(Self {
            counts,
            pred_marginals,
            true_marginals,
            n: pred.len() as u64,
        })
    }

    /// Matched count under the optimal injective mapping, divided by `n`.
    pub fn accuracy(&self) -> f64 {
        let weights = self.counts.mapv(|c| c as f64);
        let assignment = max_weight_assignment(&weights);
        let matched: u64 = assignment
            .iter()
            .enumerate()
            .filter_map(|(row, col)| col.map(|c| self.counts[[row, c]]))
            .sum();
        matched as f64 / self.n as f64
    }

    /// Adjusted Rand index; 1 when both partitions are trivial and identical.
    pub fn ari(&self) -> f64 {
        let sum_ij: f64 = self.counts.iter().map(|&c| choose2(c)).sum();
        let t1: f64 = self.pred_marginals.iter().map(|&a| choose2(a)).sum();
        let t2: f64 = self.true_marginals.iter().map(|&b| choose2(b)).sum();
        let pairs = choose2(self.n);
        let expected = if pairs > 0.0 { t1 * t2 / pairs } else { 0.0 };
        let max_index = 0.5 * (t1 + t2);
        let denom = max_index - expected;
        if denom == 0.0 {
            return 1.0;
        }
        (sum_ij - expected) / denom
    }
}
