//! Federated deep subspace clustering.
//!
//! Each simulated client owns a convolutional autoencoder with a
//! self-expressive layer between encoder and decoder. Clients train locally
//! with momentum SGD, the server averages encoders weighted by shard size,
//! and every client's self-expressive matrix is turned into cluster labels by
//! spectral clustering.
//!
//! Module map:
//! - [`dataio`]: IDX / image-directory loaders and the non-IID partition.
//! - [`graph`]: per-client k-NN adjacency.
//! - [`autonet`]: network, loss, hand-derived gradients, optimizer, checkpoints.
//! - [`federation`]: client sampling, local rounds, encoder aggregation.
//! - [`spectral`]: affinity, normalized Laplacian, eigensolver, k-means.
//! - [`metrics`]: ACC, NMI, AMI, ARI.
//! - [`harness`]: experiment config, orchestration, sweeps, exports.

pub mod autonet;
pub mod dataio;
pub mod error;
pub mod federation;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod spectral;

pub use error::{FdscError, Result};
