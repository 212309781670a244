//! Entropy-based indices: mutual information, NMI (arithmetic-mean
//! normalization) and AMI under the hypergeometric permutation model.

use statrs::function::gamma::ln_gamma;

use super::contingency::ContingencyTable;
use crate::error::Result;

fn entropy(marginals: &[u64], n: u64) -> f64 {
    let n = n as f64;
    marginals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information in nats.
pub fn mutual_information(t: &ContingencyTable) -> f64 {
    let n = t.n as f64;
    let mut mi = 0.0;
    for ((i, j), &c) in t.counts.indexed_iter() {
        if c > 0 {
            let c = c as f64;
            let a = t.pred_marginals[i] as f64;
            let b = t.true_marginals[j] as f64;
            mi += c / n * (n * c / (a * b)).ln();
        }
    }
    mi.max(0.0)
}

/// Expected mutual information of two random labelings with the table's
/// marginals (both partitions drawn uniformly given their cluster sizes).
pub fn expected_mutual_information(t: &ContingencyTable) -> f64 {
    let n = t.n;
    let nf = n as f64;
    let lg = |x: u64| ln_gamma(x as f64 + 1.0);
    let lg_n = lg(n);
    let mut emi = 0.0;
    for &a in &t.pred_marginals {
        for &b in &t.true_marginals {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let log_front = lg(a) + lg(b) + lg(n - a) + lg(n - b) - lg_n;
            for nij in lo..=hi {
                let x = nij as f64;
                let term = x / nf * (nf * x / (a as f64 * b as f64)).ln();
                let log_p = log_front - lg(nij) - lg(a - nij) - lg(b - nij) - lg(n + nij - a - b);
                emi += term * log_p.exp();
            }
        }
    }
    emi
}

fn single_or_all_singletons(marginals: &[u64]) -> bool {
    marginals.len() == 1 || marginals.iter().all(|&m| m == 1)
}

pub fn nmi_from_table(t: &ContingencyTable) -> f64 {
    let hu = entropy(&t.pred_marginals, t.n);
    let hv = entropy(&t.true_marginals, t.n);
    if hu == 0.0 && hv == 0.0 {
        return 1.0;
    }
    let mi = mutual_information(t);
    if mi == 0.0 {
        return 0.0;
    }
    (mi / (0.5 * (hu + hv))).min(1.0)
}

pub fn ami_from_table(t: &ContingencyTable) -> f64 {
    let kp = t.pred_marginals.len();
    let kt = t.true_marginals.len();
    // Identical trivial partitions: both one cluster, or both all singletons.
    if kp == kt && single_or_all_singletons(&t.pred_marginals) && single_or_all_singletons(&t.true_marginals) {
        return 1.0;
    }
    let hu = entropy(&t.pred_marginals, t.n);
    let hv = entropy(&t.true_marginals, t.n);
    let mi = mutual_information(t);
    let emi = expected_mutual_information(t);
    let denom = 0.5 * (hu + hv) - emi;
    let num = mi - emi;
    if num.abs() <= 1e-15 * (1.0 + mi.abs()) {
        return 0.0;
    }
    let denom = if denom < 0.0 {
        denom.min(-f64::EPSILON)
    } else {
        denom.max(f64::EPSILON)
    };
    num / denom
}

pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(nmi_from_table(&ContingencyTable::new(pred, truth)?))
}

pub fn ami(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(ami_from_table(&ContingencyTable::new(pred, truth)?))
}
