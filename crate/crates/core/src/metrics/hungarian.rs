//! Kuhn-Munkres on a zero-padded square cost matrix, O(n^3) with potentials.

use ndarray::Array2;

/// Maximum-weight matching of rows to columns. Returns, per row, the matched
/// column or `None` when the row landed on padding.
pub fn max_weight_assignment(weights: &Array2<f64>) -> Vec<Option<usize>> {
    let (rows, cols) = weights.dim();
    let size = rows.max(cols);
    if size == 0 {
        return Vec::new();
    }
    let top = weights.iter().fold(0.0f64, |m, &v| m.max(v));
    // Padding cells have weight 0, i.e. cost `top`.
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            top - weights[[i, j]]
        } else {
            top
        }
    };

    // 1-based arrays; index 0 is the virtual root.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; size + 1];
    let mut v = vec![0.0; size + 1];
    let mut owner = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    for i in 1..=size {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=size {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut result = vec![None; rows];
    for j in 1..=size {
        let i = owner[j];
        if i >= 1 && i <= rows && j <= cols {
            result[i - 1] = Some(j - 1);
        }
    }
    result
}
