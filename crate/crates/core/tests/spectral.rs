use fdsc::metrics;
use fdsc::rng;
use fdsc::spectral::{affinity_from_r, normalized_laplacian, spectral_cluster, symmetric_eigen, AffinityMatrix};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng as _;

/// Cyclic Jacobi rotations; eigenvalues ascending.
fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[[i, j]].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, "sym", 0);
    let a = Array2::from_shape_simple_fn((n, n), || r.random_range(-1.0..1.0));
    (&a + &a.t()) * 0.5
}

fn random_affinity(n: usize, seed: u64) -> AffinityMatrix {
    let mut r = rng::stream(seed, "aff", 0);
    let raw = Array2::from_shape_simple_fn((n, n), || r.random_range(-1.0..1.0));
    affinity_from_r(&raw, None).unwrap()
}

#[test]
fn eigensolver_agrees_with_jacobi() {
    for (seed, n) in [(1, 1), (2, 2), (3, 5), (4, 12), (5, 30)] {
        let a = random_symmetric(n, seed);
        let eig = symmetric_eigen(&a).unwrap();
        let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        for (x, y) in eig.values.iter().zip(jacobi_eigenvalues(&a)) {
            assert!((x - y).abs() <= 1e-10 * scale, "n={n}: {x} vs {y}");
        }
        // Orthonormal eigenvectors that reconstruct A.
        let v = &eig.vectors;
        let vtv = v.t().dot(v);
        let back = v.dot(&Array2::from_diag(&eig.values)).dot(&v.t());
        for ((i, j), x) in vtv.indexed_iter() {
            assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
        assert!(back.iter().zip(a.iter()).all(|(x, y)| (x - y).abs() < 1e-10 * scale));
    }
}

#[test]
fn laplacian_spectrum_lies_in_zero_two() {
    for seed in 0..10 {
        let l = normalized_laplacian(&random_affinity(15, seed));
        let eig = symmetric_eigen(&l).unwrap();
        assert!(eig.values.iter().all(|&v| (-1e-10..=2.0 + 1e-10).contains(&v)), "{:?}", eig.values);
    }
}

#[test]
fn affinity_ignores_transposition() {
    let mut r = rng::stream(4, "r", 0);
    let m = Array2::from_shape_simple_fn((9, 9), || r.random_range(-1.0..1.0));
    assert_eq!(affinity_from_r(&m, None).unwrap(), affinity_from_r(&m.t().to_owned(), None).unwrap());
}

#[test]
fn f32_binary_round_trip() {
    let w = random_affinity(11, 3);
    let back = AffinityMatrix::from_f32_bytes(&w.to_f32_bytes()).unwrap();
    assert!(back.w.iter().zip(w.w.iter()).all(|(a, b)| *a == (*b as f32) as f64));
    let again = AffinityMatrix::from_f32_bytes(&back.to_f32_bytes()).unwrap();
    assert_eq!(again, back);
}

/// Dense random blocks, with a weak random background.
fn noisy_blocks(sizes: &[usize], seed: u64) -> (AffinityMatrix, Vec<usize>) {
    let truth: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let n = truth.len();
    let mut r = rng::stream(seed, "blocks", 0);
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = if truth[i] == truth[j] { r.random_range(0.5..1.0) } else { r.random_range(0.0..0.02) };
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    (AffinityMatrix::new(w).unwrap(), truth)
}

#[test]
fn recovers_noisy_blocks() {
    for (seed, sizes) in [(0, vec![5, 7]), (1, vec![6, 6, 9]), (2, vec![3, 10, 4, 8])] {
        let (w, truth) = noisy_blocks(&sizes, seed);
        let got = spectral_cluster(&w, sizes.len(), seed).unwrap();
        assert_eq!(metrics::accuracy(&got.labels, &truth).unwrap(), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Relabelling the vertices relabels the clustering the same way.
    #[test]
    fn permutation_equivariant(seed in any::<u64>(), k in 2usize..5) {
        let sizes: Vec<usize> = (0..k).map(|c| 3 + (seed as usize >> (4 * c)) % 5).collect();
        let (w, _) = noisy_blocks(&sizes, seed);
        let n = w.n();
        let mut r = rng::stream(seed, "perm", 0);
        let order = rand::seq::index::sample(&mut r, n, n).into_vec();
        let base = spectral_cluster(&w, k, 1).unwrap().labels;
        let moved = spectral_cluster(&w.permuted(&order), k, 1).unwrap().labels;
        let expected: Vec<usize> = order.iter().map(|&i| base[i]).collect();
        prop_assert_eq!(metrics::accuracy(&moved, &expected).unwrap(), 1.0);
    }
}
