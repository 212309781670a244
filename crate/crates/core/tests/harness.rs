mod common;

use fdsc::dataio::ImageShape;
use fdsc::harness::experiment::{cluster_count, evaluate_run, prepare};
use fdsc::harness::export::{block_mass_fraction, label_order};
use fdsc::harness::{export_views, run_experiment, sweep, sweep_csv, DatasetSpec, ExperimentConfig};
use fdsc::spectral::{affinity_from_r, AffinityMatrix};
use fdsc::FdscError;

fn small(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Subspaces {
            classes: 3,
            per_class: 10,
            shape: ImageShape::new(4, 4, 1),
            subspace_dim: 2,
            scale: 0.1,
            noise: 0.01,
            offset: 0.5,
            seed,
        },
        m: 3,
        q: 2,
        r: 0.67,
        rounds: 3,
        local_epochs: 2,
        knn_k: 3,
        arch: common::tiny_arch_for_4x4(),
        learning_rate: 1e-5,
        pretrain_epochs: 1,
        seed,
        parallel: false,
        ..ExperimentConfig::default()
    }
}

#[test]
fn untrained_run_still_reports_metrics() {
    let mut cfg = small(1);
    cfg.rounds = 0;
    cfg.local_epochs = 0;
    cfg.pretrain_epochs = 0;
    let run = run_experiment(&cfg).unwrap();
    assert_eq!(run.clients.len(), 3);
    assert!(run.rounds.is_empty());
    assert!(run.loss_traces.iter().all(Vec::is_empty));
    assert!(run.clients.iter().all(|c| c.metrics.acc > 0.0));
}

#[test]
fn runs_are_deterministic_and_mean_is_arithmetic() {
    let cfg = small(2);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert!(a.same_outcome(&b));
    let mut par = cfg.clone();
    par.parallel = true;
    let c = run_experiment(&par).unwrap();
    assert_eq!(a.clients, c.clients);
    assert_eq!(a.loss_traces, c.loss_traces);

    let n = a.clients.len() as f64;
    let acc: f64 = a.clients.iter().map(|c| c.metrics.acc).sum::<f64>() / n;
    let ari: f64 = a.clients.iter().map(|c| c.metrics.ari).sum::<f64>() / n;
    assert!((a.mean.acc - acc).abs() <= 1e-9);
    assert!((a.mean.ari - ari).abs() <= 1e-9);
}

#[test]
fn graph_weight_zero_runs_match_bitwise() {
    // Only lambda3 differs; with it at zero alpha and A must not matter.
    let mut one = small(3);
    one.lambda3 = 0.0;
    let mut two = one.clone();
    two.alpha = 5.0;
    two.knn_k = 5;
    let a = run_experiment(&one).unwrap();
    let b = run_experiment(&two).unwrap();
    assert_eq!(a.method, "FDSC1");
    assert_eq!(a.clients, b.clients);
    assert_eq!(a.loss_traces, b.loss_traces);
}

#[test]
fn errors_carry_their_stage() {
    let mut cfg = small(4);
    cfg.q = 9;
    match run_experiment(&cfg) {
        Err(FdscError::Stage { stage, source }) => {
            assert_eq!(stage, "partition");
            assert!(matches!(*source, FdscError::Config(_)));
        }
        other => panic!("expected a stage error, got {other:?}"),
    }
    let mut cfg = small(4);
    cfg.learning_rate = 1e9;
    cfg.rounds = 10;
    cfg.r_step_scale = None;
    match run_experiment(&cfg) {
        Err(e @ FdscError::Stage { .. }) => assert!(matches!(e.root(), FdscError::Numerics { .. })),
        other => panic!("expected a numerics failure, got {other:?}"),
    }
}

#[test]
fn config_round_trips_and_presets_parse() {
    let cfg = small(5);
    assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    let presets = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    for (name, t, l1, l2, m, r) in [
        ("mnist", 100, 1.0, 15.0, 20, 0.25),
        ("orl", 200, 2.0, 0.2, 5, 0.4),
        ("coil20", 100, 1.0, 75.0, 5, 0.4),
        ("coil100", 100, 1.0, 15.0, 5, 0.4),
    ] {
        let p = ExperimentConfig::load(presets.join(format!("{name}.json"))).unwrap();
        assert_eq!((p.rounds, p.lambda1, p.lambda2, p.m, p.r), (t, l1, l2, m, r), "{name}");
        assert_eq!((p.local_epochs, p.lambda3, p.alpha, p.beta), (7, 1e6, 1.0, 1.0), "{name}");
        assert_eq!(ExperimentConfig::from_json(&p.to_json()).unwrap(), p);
        p.validate().unwrap();
    }
}

#[test]
fn sweep_rows_and_singleton() {
    let cfg = small(6);
    let rows = sweep(&cfg, "m", &[2.0, 3.0]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].result.clients.len(), 2);
    let csv = sweep_csv("m", &rows);
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("m,method,ACC,NMI,AMI,ARI"));

    let single = sweep(&cfg, "λ3", &[cfg.lambda3]).unwrap();
    assert!(single[0].result.same_outcome(&run_experiment(&cfg).unwrap()));

    let pair = sweep(&cfg, "lambda3", &[0.0, 1e6]).unwrap();
    assert_eq!(pair[0].result.method, "FDSC1");
    assert_eq!(pair[1].result.method, "FDSC2");

    assert!(matches!(sweep(&cfg, "alpha", &[1.0]), Err(FdscError::Config(_))));
}

#[test]
fn outputs_export_and_reevaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(7);
    cfg.output_dir = Some(dir.path().to_path_buf());
    let run = run_experiment(&cfg).unwrap();
    for f in ["metrics.csv", "rounds.csv", "manifest.json", "loss_client000.csv", "checkpoints/global_final.fdsc"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("method,client,ACC,NMI,AMI,ARI\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], run.config_hash);

    // R is stored as f32, so re-clustering may differ only through rounding;
    // the labels of this small, well-separated problem do not.
    let again = evaluate_run(&cfg, dir.path()).unwrap();
    assert_eq!(again.len(), run.clients.len());

    let files = export_views(&cfg, dir.path()).unwrap();
    assert_eq!(files.len(), 2 * cfg.m);
    let (_, shards) = prepare(&cfg).unwrap();
    let bytes = std::fs::read(dir.path().join("export/affinity_client000.bin")).unwrap();
    let w = AffinityMatrix::from_f32_bytes(&bytes).unwrap();
    assert_eq!(w.n(), shards[0].len());
    let pca = std::fs::read_to_string(dir.path().join("export/pca_client000.csv")).unwrap();
    assert_eq!(pca.lines().count(), shards[0].len() + 1);

    let empty = tempfile::tempdir().unwrap();
    match export_views(&cfg, empty.path()) {
        Err(FdscError::Config(msg)) => assert!(msg.contains("checkpoint")),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn label_sorted_affinity_concentrates_on_blocks() {
    // Affinity of an exactly block-structured R, shuffled then sorted back.
    let labels = vec![2, 0, 1, 0, 2, 1, 1, 0];
    let r = ndarray::Array2::from_shape_fn((8, 8), |(i, j)| if i != j && labels[i] == labels[j] { 0.3 } else { 0.01 });
    let w = affinity_from_r(&r, None).unwrap();
    let order = label_order(&labels);
    let sorted: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    let frac = block_mass_fraction(&w.permuted(&order).w, &sorted);
    assert!(frac >= 1.0 - frac, "{frac}");
}

#[test]
fn cluster_count_defaults_to_labels_present() {
    let cfg = small(8);
    let (_, shards) = prepare(&cfg).unwrap();
    for s in &shards {
        assert_eq!(cluster_count(&cfg, s), s.distinct_labels());
    }
}
