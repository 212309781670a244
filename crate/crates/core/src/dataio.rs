//! Dataset loading and the label-skewed client partition.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{FdscError, Result};
use crate::rng;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Geometry of one image. Samples are flattened row-major as `H x W x C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n x d`, one flattened image per row, values in `[0, 1]`.
    pub samples: Array2<f64>,
    pub labels: Vec<usize>,
    pub shape: ImageShape,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(
        samples: Array2<f64>,
        labels: Vec<usize>,
        shape: ImageShape,
        class_count: usize,
    ) -> Result<Self> {
        if samples.nrows() != labels.len() {
            return Err(FdscError::shape(format!(
                "{} samples but {} labels",
                samples.nrows(),
                labels.len()
            )));
        }
        if samples.ncols() != shape.len() {
            return Err(FdscError::shape(format!(
                "sample width {} does not match image shape {:?}",
                samples.ncols(),
                shape
            )));
        }
        if class_count == 0 {
            return Err(FdscError::config("class count must be positive"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(FdscError::Data(format!(
                "label {bad} outside [0, {class_count})"
            )));
        }
        if samples.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(FdscError::Data("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self {
            samples,
            labels,
            shape,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` samples (or all of them).
    pub fn truncate(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            samples: self.samples.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            shape: self.shape,
            class_count: self.class_count,
        }
    }
}

/// One client's private data.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetShard {
    pub client_id: usize,
    pub samples: Array2<f64>,
    pub labels: Vec<usize>,
    pub classes_present: Vec<usize>,
    /// Row indices into the source dataset, in shard order.
    pub source_indices: Vec<usize>,
    pub shape: ImageShape,
}

impl DatasetShard {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of distinct labels actually held.
    pub fn distinct_labels(&self) -> usize {
        self.labels.iter().collect::<BTreeSet<_>>().len()
    }

    /// Wraps a whole dataset as a single shard (centralized training).
    pub fn whole(dataset: &Dataset) -> Self {
        let classes: BTreeSet<usize> = dataset.labels.iter().copied().collect();
        Self {
            client_id: 0,
            samples: dataset.samples.clone(),
            labels: dataset.labels.clone(),
            classes_present: classes.into_iter().collect(),
            source_indices: (0..dataset.len()).collect(),
            shape: dataset.shape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    /// Client count.
    pub m: usize,
    /// Classes per client.
    pub q: usize,
    /// Per-client sample target; `None` means `floor(n / m)`.
    #[serde(default)]
    pub samples_per_client: Option<usize>,
    pub seed: u64,
}

/// Manifest row written alongside a partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionEntry {
    pub client_id: usize,
    pub classes: Vec<usize>,
    pub sample_indices: Vec<usize>,
}

pub fn partition_manifest(shards: &[DatasetShard]) -> Vec<PartitionEntry> {
    shards
        .iter()
        .map(|s| PartitionEntry {
            client_id: s.client_id,
            classes: s.classes_present.clone(),
            sample_indices: s.source_indices.clone(),
        })
        .collect()
}

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| FdscError::format(format!("{what}: truncated header")))
}

/// Decodes an IDX image/label pair already in memory.
pub fn parse_mnist_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let magic = read_u32_be(images, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(FdscError::format(format!(
            "images: bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let n = read_u32_be(images, 4, "images")? as usize;
    let rows = read_u32_be(images, 8, "images")? as usize;
    let cols = read_u32_be(images, 12, "images")? as usize;

    let magic = read_u32_be(labels, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(FdscError::format(format!(
            "labels: bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let n_labels = read_u32_be(labels, 4, "labels")? as usize;
    if n_labels != n {
        return Err(FdscError::format(format!(
            "{n} images but {n_labels} labels"
        )));
    }

    let d = rows * cols;
    let pixels = images
        .get(16..16 + n * d)
        .ok_or_else(|| FdscError::format("images: truncated pixel payload"))?;
    let label_bytes = labels
        .get(8..8 + n)
        .ok_or_else(|| FdscError::format("labels: truncated payload"))?;

    let samples = Array2::from_shape_fn((n, d), |(i, j)| pixels[i * d + j] as f64 / 255.0);
    let labels: Vec<usize> = label_bytes.iter().map(|&b| b as usize).collect();
    Dataset::new(samples, labels, ImageShape::new(rows, cols, 1), 10)
        .map_err(|e| FdscError::format(e.to_string()))
}

pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;
    parse_mnist_idx(&images, &labels)
}

/// Bilinear resize with corner-aligned sampling: output pixel `i` reads source
/// coordinate `i * (in - 1) / (out - 1)`. A unit-length output axis samples
/// the source centre. `src` is `H x W x C` row-major.
pub fn resize_bilinear(src: &[f64], from: ImageShape, out_h: usize, out_w: usize) -> Vec<f64> {
    let coord = |i: usize, n_in: usize, n_out: usize| -> f64 {
        if n_out == 1 {
            (n_in as f64 - 1.0) / 2.0
        } else {
            i as f64 * (n_in as f64 - 1.0) / (n_out as f64 - 1.0)
        }
    };
    let c = from.channels;
    let mut out = vec![0.0; out_h * out_w * c];
    for oy in 0..out_h {
        let sy = coord(oy, from.height, out_h);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(from.height - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = coord(ox, from.width, out_w);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(from.width - 1);
            let fx = sx - x0 as f64;
            for ch in 0..c {
                let at = |y: usize, x: usize| src[(y * from.width + x) * c + ch];
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out[(oy * out_w + ox) * c + ch] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out
}

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png" | "pgm" | "ppm" | "pnm")
    )
}

/// Loads `root/<class>/<image>` trees. Class index is the lexicographic rank
/// of the subdirectory name. If any image carries colour, every image is
/// loaded as RGB.
pub fn load_image_dir(root: impl AsRef<Path>, target_h: usize, target_w: usize) -> Result<Dataset> {
    let root = root.as_ref();
    if target_h == 0 || target_w == 0 {
        return Err(FdscError::config("target size must be positive"));
    }
    let mut class_dirs: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(FdscError::format(format!(
            "{}: no class subdirectories",
            root.display()
        )));
    }

    let mut decoded = Vec::new();
    for (class, dir) in class_dirs.iter().enumerate() {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image_file(p))
            .collect();
        files.sort();
        for path in files {
            let img = image::open(&path).map_err(|e| FdscError::Image {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            decoded.push((class, path, img));
        }
    }
    if decoded.is_empty() {
        return Err(FdscError::format(format!("{}: no images found", root.display())));
    }

    let channels = if decoded.iter().any(|(_, _, img)| img.color().has_color()) {
        3
    } else {
        1
    };
    let shape = ImageShape::new(target_h, target_w, channels);
    let mut samples = Array2::zeros((decoded.len(), shape.len()));
    let mut labels = Vec::with_capacity(decoded.len());
    for (row, (class, _, img)) in decoded.into_iter().enumerate() {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let raw: Vec<f64> = if channels == 3 {
            img.to_rgb8().into_raw().into_iter().map(|b| b as f64 / 255.0).collect()
        } else {
            img.to_luma8().into_raw().into_iter().map(|b| b as f64 / 255.0).collect()
        };
        let resized = resize_bilinear(&raw, ImageShape::new(h, w, channels), target_h, target_w);
        samples
            .row_mut(row)
            .iter_mut()
            .zip(resized)
            .for_each(|(dst, v)| *dst = v.clamp(0.0, 1.0));
        labels.push(class);
    }
    Dataset::new(samples, labels, shape, class_dirs.len())
}

/// Label-skewed split: each client draws `q` of the `c` classes, then
/// `floor(n/m)` samples without replacement from the shared pool restricted
/// to those classes. Only when that pool runs dry are the missing samples
/// drawn with replacement from all samples of the chosen classes.
pub fn partition(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<DatasetShard>> {
    let n = dataset.len();
    let c = dataset.class_count;
    if spec.m == 0 {
        return Err(FdscError::config("client count m must be at least 1"));
    }
    if spec.q == 0 || spec.q > c {
        return Err(FdscError::config(format!(
            "classes per client q={} must lie in [1, {c}]",
            spec.q
        )));
    }
    if n < spec.m {
        return Err(FdscError::config(format!(
            "{n} samples cannot cover {} clients",
            spec.m
        )));
    }
    let per_client = spec.samples_per_client.unwrap_or(n / spec.m);
    if per_client == 0 {
        return Err(FdscError::config("samples per client must be positive"));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut available = vec![true; n];
    let mut rng = rng::stream(spec.seed, "partition", 0);
    let mut shards = Vec::with_capacity(spec.m);

    for client_id in 0..spec.m {
        let mut classes: Vec<usize> = sample_indices(&mut rng, c, spec.q).into_vec();
        classes.sort_unstable();

        let pool: Vec<usize> = classes
            .iter()
            .flat_map(|&k| by_class[k].iter().copied())
            .filter(|&i| available[i])
            .collect();
        let take = per_client.min(pool.len());
        let mut picked: Vec<usize> = sample_indices(&mut rng, pool.len(), take)
            .into_iter()
            .map(|j| pool[j])
            .collect();
        for &i in &picked {
            available[i] = false;
        }
        if picked.len() < per_client {
            let all: Vec<usize> = classes
                .iter()
                .flat_map(|&k| by_class[k].iter().copied())
                .collect();
            if all.is_empty() {
                return Err(FdscError::Data(format!(
                    "client {client_id}: classes {classes:?} hold no samples"
                )));
            }
            while picked.len() < per_client {
                picked.push(all[rng.random_range(0..all.len())]);
            }
        }

        let samples = dataset.samples.select(Axis(0), &picked);
        let labels = picked.iter().map(|&i| dataset.labels[i]).collect();
        shards.push(DatasetShard {
            client_id,
            samples,
            labels,
            classes_present: classes,
            source_indices: picked,
            shape: dataset.shape,
        });
    }
    Ok(shards)
}
