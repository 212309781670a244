//! Shared fixtures for integration tests.
#![allow(dead_code)]

pub mod oracles;

use fdsc::autonet::{self, ArchConfig, Hyperparams, NetParams};
use fdsc::dataio::ImageShape;
use fdsc::graph::{knn_adjacency, AdjacencyMatrix};
use fdsc::rng;
use ndarray::Array2;
use rand::Rng as _;

pub fn tiny_arch() -> ArchConfig {
    ArchConfig {
        conv1_kernel: 5,
        conv1_stride: 2,
        conv1_channels: 4,
        conv2_kernel: 3,
        conv2_stride: 2,
        conv2_channels: 2,
    }
}

/// Random 8x8 network with random biases and a random zero-diagonal `R`.
/// (Fresh networks have zero biases, which puts dead units exactly on a
/// ReLU kink; the gradient check wants a generic point.)
pub fn tiny_problem(n: usize, seed: u64) -> (NetParams, Array2<f64>, AdjacencyMatrix) {
    let shape = ImageShape::new(8, 8, 1);
    let mut p = NetParams::init(
        n,
        shape,
        &tiny_arch(),
        &mut rng::stream(seed, "enc", 0),
        &mut rng::stream(seed, "dec", 0),
    )
    .unwrap();
    let mut r = rng::stream(seed, "fixture", 0);
    for layer in p.encoder.layers.iter_mut().chain(p.decoder.layers.iter_mut()) {
        layer.biases.mapv_inplace(|_| r.random_range(-0.3..0.3));
    }
    p.r.r = Array2::from_shape_simple_fn((n, n), || r.random_range(-0.2..0.2));
    p.r.zero_diagonal();
    let x = Array2::from_shape_simple_fn((n, shape.len()), || r.random_range(0.0..1.0));
    let a = knn_adjacency(x.view(), 3).unwrap();
    (p, x, a)
}

/// Per tensor: max |analytic - numeric| / max |numeric|, central differences.
/// Diagonal entries of `R` are skipped (they are pinned to zero).
pub fn finite_difference_errors(
    params: &NetParams,
    hyper: &Hyperparams,
    x: &Array2<f64>,
    a: &AdjacencyMatrix,
    eps: f64,
) -> Vec<f64> {
    let (grads, _) = autonet::gradients(params, hyper, x.view(), a).unwrap();
    let n = params.n();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut errors = Vec::new();
    for (ti, g) in analytic.iter().enumerate() {
        let mut max_diff: f64 = 0.0;
        let mut max_num: f64 = 0.0;
        for idx in 0..g.len() {
            if ti == 4 && idx / n == idx % n {
                continue;
            }
            let eval = |delta: f64| {
                let mut p = params.clone();
                p.tensors_mut()[ti][idx] += delta;
                autonet::loss(&p, hyper, x.view(), a).unwrap().total
            };
            let numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
            max_diff = max_diff.max((g[idx] - numeric).abs());
            max_num = max_num.max(numeric.abs());
        }
        errors.push(max_diff / max_num.max(1e-12));
    }
    errors
}

fn activation_signs(p: &NetParams, x: &Array2<f64>) -> Vec<bool> {
    let enc = autonet::encode_pass(&p.encoder, x.view()).unwrap();
    let dec = autonet::decode_pass(&p.decoder, enc.z.view()).unwrap();
    enc.pre1
        .iter()
        .chain(enc.pre2.iter())
        .chain(dec.pre1.iter())
        .map(|&v| v > 0.0)
        .collect()
}

/// Number of single-coordinate `+-eps` perturbations that change any ReLU
/// pattern. Zero means the loss is smooth over the whole stencil.
pub fn activation_flips(params: &NetParams, x: &Array2<f64>, eps: f64) -> usize {
    let base = activation_signs(params, x);
    let mut flips = 0;
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (ti, &len) in sizes.iter().enumerate() {
        if ti == 4 {
            continue; // R does not feed any ReLU.
        }
        for idx in 0..len {
            for delta in [eps, -eps] {
                let mut p = params.clone();
                p.tensors_mut()[ti][idx] += delta;
                if activation_signs(&p, x) != base {
                    flips += 1;
                }
            }
        }
    }
    flips
}

/// Small federated setup on synthetic subspace data: `m` clients, `q`
/// classes each.
pub fn synthetic_federation(m: usize, q: usize, seed: u64) -> (Vec<fdsc::dataio::DatasetShard>, fdsc::federation::FederationConfig) {
    use fdsc::harness::{DatasetSpec, ExperimentConfig};
    let cfg = ExperimentConfig {
        dataset: DatasetSpec::Subspaces {
            classes: 4,
            per_class: 12,
            shape: ImageShape::new(4, 4, 1),
            subspace_dim: 2,
            scale: 0.1,
            noise: 0.01,
            offset: 0.5,
            seed,
        },
        m,
        q,
        r: 0.5,
        rounds: 4,
        local_epochs: 2,
        lambda3: 1.0,
        arch: tiny_arch_for_4x4(),
        learning_rate: 1e-4,
        pretrain_epochs: 1,
        seed,
        ..ExperimentConfig::default()
    };
    let (_, shards) = fdsc::harness::experiment::prepare(&cfg).unwrap();
    (shards, cfg.federation())
}

pub fn tiny_arch_for_4x4() -> ArchConfig {
    ArchConfig {
        conv1_kernel: 3,
        conv1_stride: 1,
        conv1_channels: 3,
        conv2_kernel: 3,
        conv2_stride: 2,
        conv2_channels: 2,
    }
}

/// Runs every configured round and checks, after each one: zero diagonals,
/// weights summing to one and untouched non-participants. Returns the
/// final parameters of every client and the participant lists.
pub fn run_checking_invariants(
    shards: Vec<fdsc::dataio::DatasetShard>,
    cfg: &fdsc::federation::FederationConfig,
) -> (Vec<NetParams>, Vec<Vec<usize>>) {
    use fdsc::federation::{init_federation, run_round};
    let (mut server, mut clients) = init_federation(shards, cfg).unwrap();
    let mut history = Vec::new();
    for _ in 0..cfg.rounds {
        let before: Vec<NetParams> = clients.iter().map(|c| c.params().clone()).collect();
        let report = run_round(&mut server, &mut clients, cfg).unwrap();
        let sum: f64 = report.weights.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "weights sum to {sum}");
        for (c, old) in clients.iter().zip(&before) {
            assert!(c.self_expressive().diagonal_is_zero());
            if !report.participants.contains(&c.client_id()) {
                assert_eq!(c.params(), old, "client {} changed without participating", c.client_id());
            }
        }
        history.push(report.participants);
    }
    (clients.iter().map(|c| c.params().clone()).collect(), history)
}
