//! Dataset sources named in experiment configs.

use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::{self, Dataset, ImageShape};
use crate::error::{FdscError, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// IDX image/label pair.
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only the first `limit` samples.
        #[serde(default)]
        limit: Option<usize>,
    },
    /// `root/<class>/<image>`, resized to `height x width`.
    ImageDir {
        root: PathBuf,
        height: usize,
        width: usize,
        #[serde(default)]
        limit: Option<usize>,
    },
    /// Union of random linear subspaces, shifted by `offset` and clamped
    /// into `[0, 1]`.
    Subspaces {
        classes: usize,
        per_class: usize,
        shape: ImageShape,
        subspace_dim: usize,
        /// Standard deviation of the in-subspace coordinates.
        scale: f64,
        noise: f64,
        offset: f64,
        seed: u64,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Mnist { images, labels, limit } => {
                let ds = dataio::load_mnist_idx(images, labels)?;
                Ok(limit.map_or(ds.clone(), |n| ds.truncate(n)))
            }
            DatasetSpec::ImageDir { root, height, width, limit } => {
                let ds = dataio::load_image_dir(root, *height, *width)?;
                Ok(limit.map_or(ds.clone(), |n| ds.truncate(n)))
            }
            DatasetSpec::Subspaces {
                classes,
                per_class,
                shape,
                subspace_dim,
                scale,
                noise,
                offset,
                seed,
            } => {
                let g = SubspaceData::generate(*classes, *per_class, shape.len(), *subspace_dim, *scale, *noise, *seed)?;
                let samples = g.points.mapv(|v| (v + offset).clamp(0.0, 1.0));
                Dataset::new(samples, g.labels, *shape, *classes)
            }
        }
    }
}

/// Points on a union of random `dim`-dimensional subspaces of `R^ambient`,
/// classes interleaved (`label = i % classes`).
#[derive(Debug, Clone)]
pub struct SubspaceData {
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
    /// One `ambient x dim` orthonormal basis per class.
    pub bases: Vec<Array2<f64>>,
}

impl SubspaceData {
    pub fn generate(
        classes: usize,
        per_class: usize,
        ambient: usize,
        dim: usize,
        scale: f64,
        noise: f64,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 || dim > ambient || classes == 0 || per_class == 0 {
            return Err(FdscError::config("invalid subspace dataset dimensions"));
        }
        let mut r = rng::stream(seed, "subspaces", 0);
        let mut bases = Vec::with_capacity(classes);
        for _ in 0..classes {
            let mut b = Array2::from_shape_simple_fn((ambient, dim), || r.sample::<f64, _>(StandardNormal));
            // Modified Gram-Schmidt.
            for j in 0..dim {
                for p in 0..j {
                    let dot = b.column(j).dot(&b.column(p));
                    let prev = b.column(p).to_owned();
                    b.column_mut(j).scaled_add(-dot, &prev);
                }
                let norm = b.column(j).dot(&b.column(j)).sqrt();
                b.column_mut(j).mapv_inplace(|v| v / norm);
            }
            bases.push(b);
        }
        let n = classes * per_class;
        let mut points = Array2::zeros((n, ambient));
        let mut labels = Vec::with_capacity(n);
        let coord_scale = scale * (ambient as f64 / dim as f64).sqrt();
        for i in 0..n {
            let c = i % classes;
            let coeffs: Vec<f64> = (0..dim).map(|_| coord_scale * r.sample::<f64, _>(StandardNormal)).collect();
            let mut row = points.row_mut(i);
            for (j, &a) in coeffs.iter().enumerate() {
                row.scaled_add(a, &bases[c].column(j));
            }
            for v in row.iter_mut() {
                *v += noise * r.sample::<f64, _>(StandardNormal);
            }
            labels.push(c);
        }
        Ok(Self { points, labels, bases })
    }
}
