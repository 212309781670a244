mod common;

use fdsc::autonet::{Hyperparams, TENSOR_NAMES};

fn eps() -> f64 {
    std::env::var("FD_EPS").ok().and_then(|v| v.parse().ok()).unwrap_or(1e-4)
}

#[test]
fn analytic_gradients_match_central_differences() {
    let hyper = Hyperparams { lambda1: 1.0, lambda2: 15.0, lambda3: 2.0, alpha: 1.0, beta: 0.5 };
    for seed in [0, 1, 2, 3, 4, 5] {
        let (p, x, a) = common::tiny_problem(12, seed);
        assert_eq!(common::activation_flips(&p, &x, eps()), 0, "seed {seed}: ReLU kink inside the stencil");
        let errs = common::finite_difference_errors(&p, &hyper, &x, &a, eps());
        for (name, e) in TENSOR_NAMES.iter().zip(&errs) {
            assert!(*e <= 1e-5, "seed {seed} {name}: {e:e}");
        }
    }
}

#[test]
fn kink_detector_flags_nonsmooth_stencils() {
    // Seed 10 places a pre-activation within 1e-4 of zero.
    let (p, x, _) = common::tiny_problem(12, 10);
    assert!(common::activation_flips(&p, &x, 1e-4) > 0);
    assert_eq!(common::activation_flips(&p, &x, 1e-7), 0);
}

#[test]
fn graph_alignment_gradient_with_large_lambda3() {
    // The R gradient of the graph term is linear; check it in isolation
    // against the closed form -l3 beta (alpha A - beta R).
    let (p, x, a) = common::tiny_problem(6, 9);
    let only_graph = Hyperparams { lambda1: 0.0, lambda2: 0.0, lambda3: 1e6, alpha: 1.0, beta: 1.0 };
    let (g, _) = fdsc::autonet::gradients(&p, &only_graph, x.view(), &a).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            let want = if i == j { 0.0 } else { -1e6 * (a.a[[i, j]] - p.r.r[[i, j]]) };
            assert!((g.r.r[[i, j]] - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }
}
