//! MNIST IDX files, seeded train/test splits and additive Gaussian noise.

use std::fs;
use std::path::{Path, PathBuf};

use csnet_core::Image;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic number 0x{found:08x} at offset 0 (expected 0x{expected:08x})")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated {what}: file ends at offset {offset}, expected {expected} bytes")]
    Truncated { what: &'static str, offset: usize, expected: usize },
    #[error("{extra} trailing bytes after offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("image file holds {images} items but label file holds {labels} (label count at offset 4)")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at offset {offset} is not a digit")]
    BadLabel { label: u8, offset: usize },
    #[error("need at least {needed} samples, have {available}")]
    Insufficient { needed: usize, available: usize },
    #[error("noise variance must lie in [0, 1], got {0}")]
    BadVariance(f64),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Where a set came from: source files and, after a split, the pool indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub sources: Vec<String>,
    pub indices: Vec<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
    pub meta: SplitMeta,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn labels_u32(&self) -> Vec<u32> {
        self.labels.iter().map(|&l| u32::from(l)).collect()
    }

    pub fn class_counts(&self) -> [usize; 10] {
        let mut counts = [0; 10];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// The samples at `indices`, in that order; `seed` is recorded as the split seed.
    pub fn subset(&self, indices: &[usize], seed: u64) -> LabeledSet {
        LabeledSet {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            meta: SplitMeta { sources: self.meta.sources.clone(), indices: indices.to_vec(), seed: Some(seed) },
        }
    }

    /// Appends `other`, keeping source provenance.
    pub fn concat(mut self, other: LabeledSet) -> LabeledSet {
        self.images.extend(other.images);
        self.labels.extend(other.labels);
        self.meta.sources.extend(other.meta.sources);
        self.meta.indices.clear();
        self
    }
}

fn read_u32(bytes: &[u8], offset: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DatasetError::Truncated { what, offset: bytes.len(), expected: offset + 4 })
}

/// Parses an IDX3 image file; pixels are scaled by 1/255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Image>> {
    let magic = read_u32(bytes, 0, "image header")?;
    if magic != IMAGE_MAGIC {
        return Err(DatasetError::BadMagic { expected: IMAGE_MAGIC, found: magic });
    }
    let count = read_u32(bytes, 4, "image header")? as usize;
    let rows = read_u32(bytes, 8, "image header")? as usize;
    let cols = read_u32(bytes, 12, "image header")? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(DatasetError::Truncated { what: "image data", offset: bytes.len(), expected });
    }
    if bytes.len() > expected {
        return Err(DatasetError::TrailingBytes { offset: expected, extra: bytes.len() - expected });
    }
    let images = bytes[16..]
        .chunks_exact(rows * cols)
        .map(|px| {
            let pixels = px.iter().map(|&b| f64::from(b) / 255.0).collect();
            Image::new(rows, cols, pixels).expect("chunk matches dimensions")
        })
        .collect();
    Ok(images)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, "label header")?;
    if magic != LABEL_MAGIC {
        return Err(DatasetError::BadMagic { expected: LABEL_MAGIC, found: magic });
    }
    let count = read_u32(bytes, 4, "label header")? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(DatasetError::Truncated { what: "label data", offset: bytes.len(), expected });
    }
    if bytes.len() > expected {
        return Err(DatasetError::TrailingBytes { offset: expected, extra: bytes.len() - expected });
    }
    let labels = bytes[8..].to_vec();
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(DatasetError::BadLabel { label: labels[pos], offset: 8 + pos });
    }
    Ok(labels)
}

/// Serializes images as IDX3, quantizing pixels to `round(255·p)`.
pub fn encode_idx_images(images: &[Image]) -> Vec<u8> {
    let (rows, cols) = images.first().map_or((0, 0), |im| (im.height(), im.width()));
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for im in images {
        out.extend(im.pixels().iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledSet> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = parse_idx_images(&read_file(ip)?)?;
    let labels = parse_idx_labels(&read_file(lp)?)?;
    if images.len() != labels.len() {
        return Err(DatasetError::CountMismatch { images: images.len(), labels: labels.len() });
    }
    Ok(LabeledSet {
        images,
        labels,
        meta: SplitMeta { sources: vec![ip.display().to_string(), lp.display().to_string()], indices: vec![], seed: None },
    })
}

/// The 60000 training and 10000 test samples pooled, training files first.
pub fn load_mnist_pool(dir: impl AsRef<Path>) -> Result<LabeledSet> {
    let dir = dir.as_ref();
    let train = load_idx(dir.join(MNIST_FILES[0]), dir.join(MNIST_FILES[1]))?;
    let test = load_idx(dir.join(MNIST_FILES[2]), dir.join(MNIST_FILES[3]))?;
    Ok(train.concat(test))
}

/// Seeded shuffle of the pool's indices.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Seeded unstratified split: the first `n_train` shuffled samples train, the next `n_test` test.
pub fn split(full: &LabeledSet, seed: u64, n_train: usize, n_test: usize) -> Result<(LabeledSet, LabeledSet)> {
    let needed = n_train + n_test;
    if full.len() < needed {
        return Err(DatasetError::Insufficient { needed, available: full.len() });
    }
    let idx = shuffled_indices(full.len(), seed);
    Ok((full.subset(&idx[..n_train], seed), full.subset(&idx[n_train..needed], seed)))
}

pub const DEFAULT_TRAIN: usize = 50_000;
pub const DEFAULT_TEST: usize = 12_000;

/// 50000 training and 12000 test samples from the pooled 70000.
pub fn standard_split(full: &LabeledSet, seed: u64) -> Result<(LabeledSet, LabeledSet)> {
    split(full, seed, DEFAULT_TRAIN, DEFAULT_TEST)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub variance: f64,
    pub seed: u64,
}

/// SplitMix64 finalizer, used to derive independent per-item seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Adds i.i.d. `N(0, variance)` noise to every pixel and clamps to `[0, 1]`.
///
/// Image `i` draws from its own stream seeded by `mix_seed(spec.seed, i)`.
pub fn add_noise(set: &LabeledSet, spec: &NoiseSpec) -> Result<LabeledSet> {
    if !(0.0..=1.0).contains(&spec.variance) {
        return Err(DatasetError::BadVariance(spec.variance));
    }
    if spec.variance == 0.0 {
        return Ok(set.clone());
    }
    let normal = Normal::new(0.0, spec.variance.sqrt()).expect("finite std-dev");
    let images = set
        .images
        .iter()
        .enumerate()
        .map(|(i, im)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, i as u64));
            let mut out = im.clone();
            for p in out.pixels_mut() {
                *p = (*p + normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
            out
        })
        .collect();
    Ok(LabeledSet { images, labels: set.labels.clone(), meta: set.meta.clone() })
}
