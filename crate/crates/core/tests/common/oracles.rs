//! Slow, direct reference implementations of the clustering indices.

use std::collections::BTreeMap;

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Best matched count over every injective partial map of predicted
/// clusters onto true classes, divided by n.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let ps = distinct(pred);
    let ts = distinct(truth);
    fn search(i: usize, ps: &[usize], ts: &[usize], used: &mut Vec<bool>, map: &mut Vec<Option<usize>>, pred: &[usize], truth: &[usize]) -> usize {
        if i == ps.len() {
            return pred
                .iter()
                .zip(truth)
                .filter(|(p, t)| {
                    let k = ps.iter().position(|x| x == *p).unwrap();
                    map[k] == Some(**t)
                })
                .count();
        }
        map[i] = None;
        let mut best = search(i + 1, ps, ts, used, map, pred, truth);
        for j in 0..ts.len() {
            if !used[j] {
                used[j] = true;
                map[i] = Some(ts[j]);
                best = best.max(search(i + 1, ps, ts, used, map, pred, truth));
                used[j] = false;
            }
        }
        map[i] = None;
        best
    }
    let best = search(0, &ps, &ts, &mut vec![false; ts.len()], &mut vec![None; ps.len()], pred, truth);
    best as f64 / pred.len() as f64
}

/// Pair counting over all `i < j`, evaluated in exact integer arithmetic.
pub fn ari(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len();
    let (mut both, mut same_p, mut same_t) = (0i128, 0i128, 0i128);
    for i in 0..n {
        for j in i + 1..n {
            let sp = pred[i] == pred[j];
            let st = truth[i] == truth[j];
            same_p += sp as i128;
            same_t += st as i128;
            both += (sp && st) as i128;
        }
    }
    let pairs = (n * n.saturating_sub(1) / 2) as i128;
    // ARI = (both - sp st / P) / ((sp + st) / 2 - sp st / P), scaled by 2P.
    let num = 2 * (both * pairs - same_p * same_t);
    let den = (same_p + same_t) * pairs - 2 * same_p * same_t;
    if den == 0 {
        return 1.0;
    }
    num as f64 / den as f64
}

fn entropy_of(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1.0;
    }
    counts.values().map(|c| -(c / n) * (c / n).ln()).sum()
}

/// `sum p(u,v) log(p(u,v) / (p(u) p(v)))` from joint frequencies.
pub fn mutual_information(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pu: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pv: BTreeMap<usize, f64> = BTreeMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *joint.entry((p, t)).or_default() += 1.0 / n;
        *pu.entry(p).or_default() += 1.0 / n;
        *pv.entry(t).or_default() += 1.0 / n;
    }
    joint.iter().map(|(&(p, t), &pj)| pj * (pj / (pu[&p] * pv[&t])).ln()).sum()
}

/// NMI with arithmetic-mean normalization; 1 when both partitions are
/// single clusters, 0 when exactly one is.
pub fn nmi(pred: &[usize], truth: &[usize]) -> f64 {
    let hu = entropy_of(pred);
    let hv = entropy_of(truth);
    if hu == 0.0 && hv == 0.0 {
        return 1.0;
    }
    if hu == 0.0 || hv == 0.0 {
        return 0.0;
    }
    mutual_information(pred, truth) / (0.5 * (hu + hv))
}
