//! One end-to-end run: partition, adjacency, federated training, per-client
//! spectral clustering and metrics.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::autonet::{checkpoint, LossBreakdown};
use crate::dataio::{self, Dataset, DatasetShard};
use crate::error::{FdscError, Result};
use crate::federation::{self, ClientHandle, ServerState};
use crate::metrics::MetricsReport;
use crate::rng;
use crate::spectral::kmeans::{kmeans, KMeansConfig};
use crate::spectral::{affinity_from_r, spectral_cluster};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientResult {
    pub client_id: usize,
    pub samples: usize,
    pub clusters: usize,
    pub predicted: Vec<usize>,
    pub metrics: MetricsReport,
    /// Raw-pixel k-means on the same shard with the same cluster count.
    pub baseline: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    /// 1-based round; 0 is the state after pre-training.
    pub round: usize,
    pub epoch: usize,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub participants: Vec<usize>,
    pub weights: Vec<f64>,
    pub mean_total_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub config_hash: String,
    pub clients: Vec<ClientResult>,
    /// Arithmetic mean over clients.
    pub mean: MetricsReport,
    /// Mean weighted by client sample count.
    pub weighted: MetricsReport,
    pub baseline_mean: MetricsReport,
    pub rounds: Vec<RoundSummary>,
    /// Per-client loss history, one entry per local epoch trained.
    pub loss_traces: Vec<Vec<LossRecord>>,
    pub wall_time_secs: f64,
}

impl RunResult {
    /// Equality on everything except the wall clock.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        let mut a = self.clone();
        a.wall_time_secs = other.wall_time_secs;
        a == *other
    }
}

fn weighted_mean(reports: &[(MetricsReport, usize)]) -> MetricsReport {
    let total: usize = reports.iter().map(|r| r.1).sum();
    if total == 0 {
        return MetricsReport::default();
    }
    let t = total as f64;
    let sum = |f: fn(&MetricsReport) -> f64| reports.iter().map(|(r, n)| f(r) * *n as f64).sum::<f64>() / t;
    MetricsReport {
        acc: sum(|r| r.acc),
        nmi: sum(|r| r.nmi),
        ami: sum(|r| r.ami),
        ari: sum(|r| r.ari),
    }
}

/// Loads the dataset and splits it across clients.
pub fn prepare(config: &ExperimentConfig) -> Result<(Dataset, Vec<DatasetShard>)> {
    config.validate().map_err(|e| e.at_stage("config"))?;
    let dataset = config.dataset.load().map_err(|e| e.at_stage("load"))?;
    let shards = dataio::partition(&dataset, &config.partition_spec()).map_err(|e| e.at_stage("partition"))?;
    Ok((dataset, shards))
}

/// Cluster count for a shard: the configured value, else the number of
/// distinct labels present.
pub fn cluster_count(config: &ExperimentConfig, shard: &DatasetShard) -> usize {
    config.clusters.unwrap_or_else(|| shard.distinct_labels()).min(shard.len())
}

/// k-means on raw pixels, clustered and scored exactly like the model.
pub fn pixel_kmeans(shard: &DatasetShard, k: usize, seed: u64) -> Result<MetricsReport> {
    let predicted = if k < 2 {
        vec![0; shard.len()]
    } else {
        let s = rng::derive_seed(seed, "baseline", shard.client_id as u64);
        kmeans(shard.samples.view(), k, &KMeansConfig::default(), s)?.labels
    };
    MetricsReport::compute(&predicted, &shard.labels)
}

pub fn evaluate_client(config: &ExperimentConfig, client: &ClientHandle) -> Result<ClientResult> {
    let shard = client.shard();
    let k = cluster_count(config, shard);
    let predicted = client.cluster(k, config.affinity_top_s, config.seed)?.labels;
    Ok(ClientResult {
        client_id: client.client_id(),
        samples: shard.len(),
        clusters: k,
        metrics: MetricsReport::compute(&predicted, &shard.labels)?,
        baseline: pixel_kmeans(shard, k, config.seed)?,
        predicted,
    })
}

/// Full pipeline for one config. Writes outputs when `output_dir` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    let start = Instant::now();
    let (_, shards) = prepare(config)?;
    run_on_shards(config, shards, start)
}

/// Same as [`run_experiment`] but with the shards supplied.
pub fn run_on_shards(config: &ExperimentConfig, shards: Vec<DatasetShard>, start: Instant) -> Result<RunResult> {
    let fed = config.federation();
    let (mut server, mut clients) = federation::init_federation(shards, &fed).map_err(|e| e.at_stage("init"))?;

    let mut loss_traces: Vec<Vec<LossRecord>> = vec![Vec::new(); clients.len()];
    let mut rounds = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        let report = federation::run_training(&mut server, &mut clients, &fed, 1)
            .map_err(|e| e.at_stage("train"))?
            .remove(0);
        for (id, trace) in report.participants.iter().zip(&report.traces) {
            for (epoch, loss) in trace.iter().enumerate() {
                loss_traces[*id].push(LossRecord {
                    round: report.round,
                    epoch,
                    loss: *loss,
                });
            }
        }
        rounds.push(RoundSummary {
            round: report.round,
            participants: report.participants.clone(),
            weights: report.weights.clone(),
            mean_total_loss: report.mean_total_loss(),
        });
    }

    let results: Vec<ClientResult> = clients
        .iter()
        .map(|c| evaluate_client(config, c))
        .collect::<Result<_>>()
        .map_err(|e| e.at_stage("evaluate"))?;
    let per: Vec<MetricsReport> = results.iter().map(|r| r.metrics).collect();
    let base: Vec<MetricsReport> = results.iter().map(|r| r.baseline).collect();
    let sized: Vec<(MetricsReport, usize)> = results.iter().map(|r| (r.metrics, r.samples)).collect();

    let run = RunResult {
        method: config.method_name().to_string(),
        config_hash: config.content_hash(),
        mean: MetricsReport::mean(&per),
        weighted: weighted_mean(&sized),
        baseline_mean: MetricsReport::mean(&base),
        clients: results,
        rounds,
        loss_traces,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &config.output_dir {
        write_outputs(dir, config, &run, &server, &clients).map_err(|e| e.at_stage("write"))?;
    }
    Ok(run)
}

pub fn final_client_checkpoint(dir: &Path, client_id: usize) -> std::path::PathBuf {
    dir.join("checkpoints").join(format!("client{client_id:03}_final.fdsc"))
}

fn fmt_metrics(out: &mut String, method: &str, client: &str, m: &MetricsReport) {
    let _ = writeln!(out, "{method},{client},{:.4},{:.4},{:.4},{:.4}", m.acc, m.nmi, m.ami, m.ari);
}

pub fn metrics_csv(run: &RunResult) -> String {
    let mut out = String::from("method,client,ACC,NMI,AMI,ARI\n");
    for c in &run.clients {
        fmt_metrics(&mut out, &run.method, &c.client_id.to_string(), &c.metrics);
    }
    fmt_metrics(&mut out, &run.method, "mean", &run.mean);
    fmt_metrics(&mut out, &run.method, "weighted", &run.weighted);
    for c in &run.clients {
        fmt_metrics(&mut out, "kmeans", &c.client_id.to_string(), &c.baseline);
    }
    fmt_metrics(&mut out, "kmeans", "mean", &run.baseline_mean);
    out
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    run: &RunResult,
    server: &ServerState,
    clients: &[ClientHandle],
) -> Result<()> {
    std::fs::create_dir_all(dir.join("checkpoints"))?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(run))?;

    let mut rounds = String::from("round,participants,weights,mean_total_loss\n");
    for r in &run.rounds {
        let _ = writeln!(rounds, "{},{},{},{:e}", r.round, join(&r.participants), join(&r.weights), r.mean_total_loss);
    }
    std::fs::write(dir.join("rounds.csv"), rounds)?;

    for (id, trace) in run.loss_traces.iter().enumerate() {
        let mut s = String::from("round,epoch,reconstruction,regularizer_r,self_expression,graph_alignment,total\n");
        for t in trace {
            let l = &t.loss;
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{:e}",
                t.round, t.epoch, l.reconstruction, l.regularizer_r, l.self_expression, l.graph_alignment, l.total
            );
        }
        std::fs::write(dir.join(format!("loss_client{id:03}.csv")), s)?;
    }

    checkpoint::save_encoder(dir.join("checkpoints").join("global_final.fdsc"), &server.global_encoder)?;
    for c in clients {
        checkpoint::save_net(final_client_checkpoint(dir, c.client_id()), c.params())?;
    }
    let manifest = serde_json::json!({
        "method": run.method,
        "seed": config.seed,
        "config_hash": run.config_hash,
        "wall_time_secs": run.wall_time_secs,
        "mean": run.mean,
        "weighted": run.weighted,
        "baseline_mean": run.baseline_mean,
        "partition": dataio::partition_manifest(&clients.iter().map(|c| c.shard().clone()).collect::<Vec<_>>()),
        "config": config,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Re-clusters every client from the final checkpoints of a finished run.
pub fn evaluate_run(config: &ExperimentConfig, run_dir: &Path) -> Result<Vec<ClientResult>> {
    let (_, shards) = prepare(config)?;
    shards
        .iter()
        .map(|shard| {
            let ckpt = final_client_checkpoint(run_dir, shard.client_id);
            let bytes = std::fs::read(&ckpt)
                .map_err(|e| FdscError::config(format!("missing checkpoint {}: {e}", ckpt.display())))?;
            let mut params = federation::init_client_params(config.seed, shard.client_id, shard, &config.arch)?;
            checkpoint::load_net_into(&bytes, &mut params)?;
            let k = cluster_count(config, shard);
            let predicted = if k < 2 {
                vec![0; shard.len()]
            } else {
                let w = affinity_from_r(&params.r.r, config.affinity_top_s)?;
                spectral_cluster(&w, k, rng::derive_seed(config.seed, "spectral", shard.client_id as u64))?.labels
            };
            Ok(ClientResult {
                client_id: shard.client_id,
                samples: shard.len(),
                clusters: k,
                metrics: MetricsReport::compute(&predicted, &shard.labels)?,
                baseline: pixel_kmeans(shard, k, config.seed)?,
                predicted,
            })
        })
        .collect::<Result<_>>()
        .map_err(|e| e.at_stage("evaluate"))
}
