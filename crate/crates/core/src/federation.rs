//! In-process simulation of the federated protocol: per-round client
//! sampling, encoder broadcast, local training and weighted encoder averaging.
//!
//! The server only ever sees [`ClientUpdate`]s, which carry an encoder, a
//! sample count and the local loss trace. `R_i`, `D_i` and the raw shard stay
//! inside [`ClientHandle`].

use std::path::PathBuf;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autonet::{
    self, checkpoint, train_local, ArchConfig, DecoderParams, EncoderParams, Hyperparams, LossBreakdown, NetParams,
    OptimizerConfig, OptimizerState, SelfExpressiveParams,
};
use crate::dataio::DatasetShard;
use crate::error::{FdscError, Result};
use crate::graph::{knn_adjacency, AdjacencyMatrix, DEFAULT_K};
use crate::rng::{self, Rng};
use crate::spectral::{affinity_from_r, spectral_cluster, AffinityMatrix, ClusterLabels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    /// Communication rounds `T`.
    pub rounds: usize,
    /// Local epochs per round `tau`.
    pub local_epochs: usize,
    /// Participation rate `r` in `(0, 1]`.
    pub participation: f64,
    /// Neighbours per sample in the adjacency graph.
    pub knn_k: usize,
    pub hyper: Hyperparams,
    pub optimizer: OptimizerConfig,
    pub arch: ArchConfig,
    /// Reconstruction-only epochs run on every client before round 1; their
    /// weighted average becomes the initial global encoder.
    pub pretrain_epochs: usize,
    pub seed: u64,
    /// Train participants on the rayon pool.
    pub parallel: bool,
    /// Write checkpoints every this many rounds (0 = never).
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            local_epochs: 7,
            participation: 1.0,
            knn_k: DEFAULT_K,
            hyper: Hyperparams::default(),
            optimizer: OptimizerConfig::default(),
            arch: ArchConfig::default(),
            pretrain_epochs: 5,
            seed: 0,
            parallel: true,
            checkpoint_every: 0,
            checkpoint_dir: None,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(FdscError::config(format!(
                "participation rate {} must lie in (0, 1]",
                self.participation
            )));
        }
        if self.knn_k == 0 {
            return Err(FdscError::config("k-NN needs k >= 1"));
        }
        self.hyper.validate()?;
        self.optimizer.validate()
    }
}

/// Server state: the global encoder and the sampling stream. Nothing else.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub global_encoder: EncoderParams,
    pub round: usize,
    rng: Rng,
}

impl ServerState {
    pub fn new(global_encoder: EncoderParams, seed: u64) -> Self {
        Self {
            global_encoder,
            round: 0,
            rng: rng::stream(seed, "server", 0),
        }
    }
}

/// What a client sends back after local training.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub encoder: EncoderParams,
    pub sample_count: usize,
    pub trace: Vec<LossBreakdown>,
}

pub struct ClientHandle {
    client_id: usize,
    shard: DatasetShard,
    adjacency: AdjacencyMatrix,
    params: NetParams,
    optimizer: OptimizerState,
    /// `n_i / sum_j n_j` over all clients.
    pub weight: f64,
}

impl ClientHandle {
    pub fn client_id(&self) -> usize {
        self.client_id
    }

    pub fn sample_count(&self) -> usize {
        self.shard.len()
    }

    pub fn encoder(&self) -> &EncoderParams {
        &self.params.encoder
    }

    /// Client-local: used for on-device clustering and exports.
    pub fn self_expressive(&self) -> &SelfExpressiveParams {
        &self.params.r
    }

    /// Client-local.
    pub fn decoder(&self) -> &DecoderParams {
        &self.params.decoder
    }

    /// Client-local.
    pub fn params(&self) -> &NetParams {
        &self.params
    }

    /// Client-local.
    pub fn shard(&self) -> &DatasetShard {
        &self.shard
    }

    /// Client-local.
    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    /// Replace the local encoder with the server's copy, keeping `R_i`, `D_i`
    /// and the optimizer buffers.
    pub fn receive_global(&mut self, global: &EncoderParams) {
        self.params.encoder = global.clone();
    }

    /// `tau` epochs of local training from the current parameters.
    pub fn train(&mut self, hyper: &Hyperparams, epochs: usize) -> Result<ClientUpdate> {
        let out = train_local(
            self.shard.samples.view(),
            &mut self.params,
            hyper,
            &self.adjacency,
            epochs,
            &mut self.optimizer,
        )
        .map_err(|e| FdscError::Client {
            client: self.client_id,
            source: Box::new(e),
        })?;
        Ok(ClientUpdate {
            client_id: self.client_id,
            encoder: self.params.encoder.clone(),
            sample_count: self.shard.len(),
            trace: out.trace,
        })
    }

    pub fn current_loss(&self, hyper: &Hyperparams) -> Result<LossBreakdown> {
        autonet::loss(&self.params, hyper, self.shard.samples.view(), &self.adjacency)
    }

    pub fn affinity(&self, top_s: Option<usize>) -> Result<AffinityMatrix> {
        affinity_from_r(&self.params.r.r, top_s)
    }

    /// Spectral clustering of this client's self-expressive matrix.
    pub fn cluster(&self, k: usize, top_s: Option<usize>, seed: u64) -> Result<ClusterLabels> {
        let k = k.min(self.shard.len());
        if k < 2 {
            return Ok(ClusterLabels {
                labels: vec![0; self.shard.len()],
                k: 1,
            });
        }
        spectral_cluster(&self.affinity(top_s)?, k, rng::derive_seed(seed, "spectral", self.client_id as u64))
    }
}

/// Fresh `(E, R = 0, D)` for one client. Every client shares the encoder
/// stream; decoders are seeded per client.
pub fn init_client_params(seed: u64, client_id: usize, shard: &DatasetShard, arch: &ArchConfig) -> Result<NetParams> {
    NetParams::init(
        shard.len(),
        shard.shape,
        arch,
        &mut rng::stream(seed, "encoder", 0),
        &mut rng::stream(seed, "decoder", client_id as u64),
    )
}

/// Reconstruction-only warm-up with its own optimizer buffers.
pub fn pretrain(x: ndarray::ArrayView2<f64>, params: &mut NetParams, optimizer: OptimizerConfig, epochs: usize) -> Result<()> {
    if epochs == 0 {
        return Ok(());
    }
    let mut state = OptimizerState::new(params, optimizer);
    let empty = AdjacencyMatrix::empty(params.n());
    train_local(x, params, &Hyperparams::autoencoder_only(), &empty, epochs, &mut state)?;
    Ok(())
}

fn client_adjacency(shard: &DatasetShard, k: usize) -> Result<AdjacencyMatrix> {
    let n = shard.len();
    if n < 2 {
        return Ok(AdjacencyMatrix::empty(n));
    }
    knn_adjacency(shard.samples.view(), k.min(n - 1))
}

pub fn init_federation(shards: Vec<DatasetShard>, config: &FederationConfig) -> Result<(ServerState, Vec<ClientHandle>)> {
    config.validate()?;
    if shards.is_empty() {
        return Err(FdscError::config("federation needs at least one client"));
    }
    if let Some(s) = shards.iter().find(|s| s.is_empty()) {
        return Err(FdscError::config(format!("client {} has an empty shard", s.client_id)));
    }
    let total: usize = shards.iter().map(DatasetShard::len).sum();

    let build = |shard: DatasetShard| -> Result<ClientHandle> {
        let adjacency = client_adjacency(&shard, config.knn_k)?;
        let mut params = init_client_params(config.seed, shard.client_id, &shard, &config.arch)?;
        pretrain(shard.samples.view(), &mut params, config.optimizer, config.pretrain_epochs).map_err(|e| {
            FdscError::Client {
                client: shard.client_id,
                source: Box::new(e),
            }
        })?;
        let optimizer = OptimizerState::new(&params, config.optimizer);
        Ok(ClientHandle {
            client_id: shard.client_id,
            weight: shard.len() as f64 / total as f64,
            shard,
            adjacency,
            params,
            optimizer,
        })
    };
    let clients: Vec<ClientHandle> = if config.parallel {
        shards.into_par_iter().map(build).collect::<Result<_>>()?
    } else {
        shards.into_iter().map(build).collect::<Result<_>>()?
    };

    let encoders: Vec<&EncoderParams> = clients.iter().map(|c| c.encoder()).collect();
    let weights: Vec<f64> = clients.iter().map(|c| c.weight).collect();
    let global = aggregate(&encoders, &weights)?;
    Ok((ServerState::new(global, config.seed), clients))
}

/// `max(1, round(r * m))`.
pub fn participant_count(m: usize, r: f64) -> usize {
    ((r * m as f64).round() as usize).clamp(1, m.max(1))
}

/// Uniform subset of `0..m` without replacement, returned sorted.
pub fn sample_clients(server: &mut ServerState, m: usize, r: f64) -> Result<Vec<usize>> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(FdscError::config(format!("participation rate {r} must lie in (0, 1]")));
    }
    if m == 0 {
        return Err(FdscError::config("no clients to sample"));
    }
    let mut ids = sample_indices(&mut server.rng, m, participant_count(m, r)).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Elementwise `sum_i w_i E_i` after renormalizing `w` to sum to one.
pub fn aggregate(encoders: &[&EncoderParams], weights: &[f64]) -> Result<EncoderParams> {
    let first = *encoders
        .first()
        .ok_or_else(|| FdscError::config("nothing to aggregate"))?;
    if encoders.len() != weights.len() {
        return Err(FdscError::shape(format!(
            "{} encoders but {} weights",
            encoders.len(),
            weights.len()
        )));
    }
    if encoders.iter().any(|e| !e.same_shape(first)) {
        return Err(FdscError::shape("encoders disagree in shape"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(FdscError::config("aggregation weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(FdscError::config("aggregation weights are all zero"));
    }
    let mut out = first.zeroed();
    for (enc, &w) in encoders.iter().zip(weights) {
        let w = w / total;
        for (dst, src) in out.tensors_mut().into_iter().zip(enc.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// 1-based.
    pub round: usize,
    pub participants: Vec<usize>,
    /// Loss at the start of each participant's last local epoch.
    pub final_losses: Vec<LossBreakdown>,
    /// Per-epoch traces, one per participant.
    pub traces: Vec<Vec<LossBreakdown>>,
    /// Renormalized weights actually used, aligned with `participants`.
    pub weights: Vec<f64>,
}

impl RoundReport {
    pub fn mean_total_loss(&self) -> f64 {
        if self.final_losses.is_empty() {
            return 0.0;
        }
        self.final_losses.iter().map(|l| l.total).sum::<f64>() / self.final_losses.len() as f64
    }
}

pub fn run_round(server: &mut ServerState, clients: &mut [ClientHandle], config: &FederationConfig) -> Result<RoundReport> {
    if server.round >= config.rounds {
        return Err(FdscError::config(format!(
            "round {} already reached the configured {} rounds",
            server.round, config.rounds
        )));
    }
    let participants = sample_clients(server, clients.len(), config.participation)?;
    let global = &server.global_encoder;
    let hyper = &config.hyper;
    let epochs = config.local_epochs;
    let work = |c: &mut ClientHandle| -> Result<(ClientUpdate, LossBreakdown, f64)> {
        c.receive_global(global);
        let update = c.train(hyper, epochs)?;
        let last = match update.trace.last() {
            Some(l) => *l,
            None => c.current_loss(hyper)?,
        };
        Ok((update, last, c.weight))
    };
    let chosen = |c: &&mut ClientHandle| participants.binary_search(&c.client_id).is_ok();
    let results: Vec<(ClientUpdate, LossBreakdown, f64)> = if config.parallel {
        clients.par_iter_mut().filter(chosen).map(work).collect::<Result<_>>()?
    } else {
        clients.iter_mut().filter(chosen).map(work).collect::<Result<_>>()?
    };

    let raw: Vec<f64> = results.iter().map(|r| r.2).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let encoders: Vec<&EncoderParams> = results.iter().map(|r| &r.0.encoder).collect();
    server.global_encoder = aggregate(&encoders, &raw)?;
    server.round += 1;

    Ok(RoundReport {
        round: server.round,
        participants: results.iter().map(|r| r.0.client_id).collect(),
        final_losses: results.iter().map(|r| r.1).collect(),
        traces: results.into_iter().map(|r| r.0.trace).collect(),
        weights,
    })
}

fn write_checkpoints(server: &ServerState, clients: &[ClientHandle], dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    checkpoint::save_encoder(dir.join(format!("global_round{:04}.fdsc", server.round)), &server.global_encoder)?;
    for c in clients {
        checkpoint::save_net(
            dir.join(format!("client{:03}_round{:04}.fdsc", c.client_id, server.round)),
            &c.params,
        )?;
    }
    Ok(())
}

/// Runs `rounds` consecutive rounds, checkpointing per the config.
pub fn run_training(
    server: &mut ServerState,
    clients: &mut [ClientHandle],
    config: &FederationConfig,
    rounds: usize,
) -> Result<Vec<RoundReport>> {
    let mut reports = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        reports.push(run_round(server, clients, config)?);
        if let (Some(dir), true) = (&config.checkpoint_dir, config.checkpoint_every > 0) {
            if server.round % config.checkpoint_every == 0 || server.round == config.rounds {
                write_checkpoints(server, clients, dir)?;
            }
        }
    }
    Ok(reports)
}
