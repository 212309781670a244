//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! implicit QL with Wilkinson-style shifts (the EISPACK tred2 / tql2 pair).

use ndarray::{Array1, Array2};

use crate::error::{FdscError, Result};

const MAX_QL_ITERATIONS: usize = 60;

/// Eigenvalues ascending; column `i` of `vectors` belongs to `values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

fn tridiagonalize(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[[n - 1, j]];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
                v[[j, i]] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].fill(0.0);
            for j in 0..i {
                let f = d[j];
                v[[j, i]] = f;
                let mut g = e[j] + v[[j, j]] * f;
                for k in j + 1..i {
                    g += v[[k, j]] * d[k];
                    e[k] += v[[k, j]] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[[k, j]] -= f * e[k] + g * d[k];
                }
                d[j] = v[[i - 1, j]];
                v[[i, j]] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[[n - 1, i]] = v[[i, i]];
        v[[i, i]] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[[k, i + 1]] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[[k, i + 1]] * v[[k, j]];
                }
                for k in 0..=i {
                    v[[k, j]] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[[k, i + 1]] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[[n - 1, j]];
        v[[n - 1, j]] = 0.0;
    }
    v[[n - 1, n - 1]] = 1.0;
    e[0] = 0.0;
}

fn ql_implicit(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(FdscError::numerics("eigensolver did not converge"));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d[l + 2..n].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = v[[k, i + 1]];
                        v[[k, i + 1]] = s * v[[k, i]] + c * h;
                        v[[k, i]] = c * v[[k, i]] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Flips each column so its first component above noise level is positive.
fn fix_signs(vectors: &mut Array2<f64>) {
    for mut col in vectors.columns_mut() {
        let tol = 1e-12 * col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(&first) = col.iter().find(|v| v.abs() > tol) {
            if first < 0.0 {
                col.mapv_inplace(|v| -v);
            }
        }
    }
}

/// Full decomposition of a symmetric matrix (only the lower triangle's
/// symmetry is assumed, not checked).
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<EigenPairs> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(FdscError::shape("eigensolver needs a square matrix"));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(FdscError::numerics("eigensolver input"));
    }
    if n == 0 {
        return Ok(EigenPairs {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| d[i]));
    let mut vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    fix_signs(&mut vectors);
    Ok(EigenPairs { values, vectors })
}

/// The `k` smallest eigenpairs, checked against `|L u - lambda u| <= 1e-8 |L|_F`.
pub fn smallest_eigvecs(l: &Array2<f64>, k: usize) -> Result<EigenPairs> {
    let n = l.nrows();
    if k == 0 || k > n {
        return Err(FdscError::config(format!("cannot take {k} eigenvectors of a {n}x{n} matrix")));
    }
    let full = symmetric_eigen(l)?;
    let values = full.values.slice(ndarray::s![..k]).to_owned();
    let vectors = full.vectors.slice(ndarray::s![.., ..k]).to_owned();
    let bound = 1e-8 * l.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (i, col) in vectors.columns().into_iter().enumerate() {
        let lu = l.dot(&col);
        let res = lu
            .iter()
            .zip(col.iter())
            .map(|(a, b)| (a - values[i] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if res > bound {
            return Err(FdscError::numerics(format!("eigenpair {i} residual {res:e}")));
        }
    }
    Ok(EigenPairs { values, vectors })
}
