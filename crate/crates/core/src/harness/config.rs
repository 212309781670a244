use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::data::DatasetSpec;
use crate::autonet::{ArchConfig, Hyperparams, OptimizerConfig};
use crate::dataio::PartitionSpec;
use crate::error::{FdscError, Result};
use crate::federation::FederationConfig;
use crate::graph::DEFAULT_K;

/// Everything a run depends on. Serialized as JSON; missing fields take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Clients.
    pub m: usize,
    /// Classes per client.
    pub q: usize,
    /// Per-client sample target; `None` means `floor(n / m)`.
    pub samples_per_client: Option<usize>,
    /// Participation rate.
    pub r: f64,
    /// Communication rounds.
    pub rounds: usize,
    /// Local epochs per round.
    pub local_epochs: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha: f64,
    pub beta: f64,
    pub knn_k: usize,
    /// Clusters per client; `None` uses the number of classes the client drew.
    pub clusters: Option<usize>,
    /// Optional per-row sparsification of the affinity.
    pub affinity_top_s: Option<usize>,
    pub arch: ArchConfig,
    pub learning_rate: f64,
    pub momentum: f64,
    pub r_learning_rate: Option<f64>,
    /// Curvature-scaled step for `R`; see [`OptimizerConfig::r_step_scale`].
    pub r_step_scale: Option<f64>,
    pub pretrain_epochs: usize,
    pub seed: u64,
    pub parallel: bool,
    /// Checkpoint every this many rounds when an output directory is set.
    pub checkpoint_every: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::Mnist {
                images: PathBuf::from("data/mnist/train-images-idx3-ubyte"),
                labels: PathBuf::from("data/mnist/train-labels-idx1-ubyte"),
                limit: None,
            },
            m: 20,
            q: 10,
            samples_per_client: None,
            r: 0.25,
            rounds: 100,
            local_epochs: 7,
            lambda1: 1.0,
            lambda2: 15.0,
            lambda3: 1e6,
            alpha: 1.0,
            beta: 1.0,
            knn_k: DEFAULT_K,
            clusters: None,
            affinity_top_s: None,
            arch: ArchConfig::default(),
            learning_rate: 1e-3,
            momentum: 0.9,
            r_learning_rate: None,
            r_step_scale: Some(1.0),
            pretrain_epochs: 5,
            seed: 0,
            parallel: true,
            checkpoint_every: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hyper(&self) -> Hyperparams {
        Hyperparams {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            r_learning_rate: self.r_learning_rate,
            r_step_scale: self.r_step_scale,
        }
    }

    pub fn partition_spec(&self) -> PartitionSpec {
        PartitionSpec {
            m: self.m,
            q: self.q,
            samples_per_client: self.samples_per_client,
            seed: self.seed,
        }
    }

    pub fn federation(&self) -> FederationConfig {
        FederationConfig {
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            participation: self.r,
            knn_k: self.knn_k,
            hyper: self.hyper(),
            optimizer: self.optimizer(),
            arch: self.arch,
            pretrain_epochs: self.pretrain_epochs,
            seed: self.seed,
            parallel: self.parallel,
            checkpoint_every: self.checkpoint_every,
            checkpoint_dir: self.output_dir.as_ref().map(|d| d.join("checkpoints")),
        }
    }

    /// `centralized` for a single fully participating client, otherwise
    /// `FDSC1` without the graph term and `FDSC2` with it.
    pub fn method_name(&self) -> &'static str {
        if self.m == 1 && self.r >= 1.0 {
            "centralized"
        } else if self.lambda3 == 0.0 {
            "FDSC1"
        } else {
            "FDSC2"
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(FdscError::config("m must be at least 1"));
        }
        if self.q == 0 {
            return Err(FdscError::config("q must be at least 1"));
        }
        if self.clusters == Some(0) {
            return Err(FdscError::config("cluster count must be positive"));
        }
        self.federation().validate()
    }

    /// SHA-256 of the canonical JSON with the output directory blanked, so
    /// the hash identifies the computation rather than where it was written.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Sets one numeric field by name, e.g. `"lambda3"` or `"m"`.
    pub fn set_field(&mut self, name: &str, value: f64) -> Result<()> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(FdscError::config(format!("{name} needs a nonnegative integer, got {v}")))
            }
        };
        match name {
            "m" => self.m = as_count(value)?,
            "q" => self.q = as_count(value)?,
            "samples_per_client" | "b" => self.samples_per_client = Some(as_count(value)?),
            "r" => self.r = value,
            "T" | "rounds" => self.rounds = as_count(value)?,
            "tau" | "local_epochs" => self.local_epochs = as_count(value)?,
            "k" | "knn_k" => self.knn_k = as_count(value)?,
            "lambda1" => self.lambda1 = value,
            "lambda2" => self.lambda2 = value,
            "lambda3" => self.lambda3 = value,
            "alpha" => self.alpha = value,
            "beta" => self.beta = value,
            "learning_rate" | "lr" => self.learning_rate = value,
            "r_learning_rate" => self.r_learning_rate = Some(value),
            "r_step_scale" => self.r_step_scale = Some(value),
            "momentum" => self.momentum = value,
            "pretrain_epochs" => self.pretrain_epochs = as_count(value)?,
            "seed" => self.seed = as_count(value)? as u64,
            other => return Err(FdscError::config(format!("unknown parameter {other}"))),
        }
        Ok(())
    }
}
