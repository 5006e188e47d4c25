//! Binarization, bit-plane hashing and block-wise histogram pooling.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, input_err, Error, Result};
use crate::tensor::Image;

/// Per-pixel 0/1 map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<u8>,
}

/// Integer-coded map produced by hashing a group of binary maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedMap {
    pub height: usize,
    pub width: usize,
    pub codes: Vec<u32>,
}

/// Heaviside step: 1 where the input is strictly positive, 0 elsewhere.
pub fn heaviside(map: &Image) -> BinaryMap {
    BinaryMap {
        height: map.height(),
        width: map.width(),
        bits: map.pixels().iter().map(|&v| u8::from(v > 0.0)).collect(),
    }
}

/// Packs up to 32 binary maps into one code map; map 0 is the least significant bit.
pub fn hash_group(group: &[BinaryMap]) -> Result<HashedMap> {
    let first = group.first().ok_or_else(|| input_err!("cannot hash an empty group"))?;
    if group.len() > 32 {
        return Err(config_err!("hash group of {} maps exceeds 32 bits", group.len()));
    }
    let (h, w) = (first.height, first.width);
    let mut codes = vec![0u32; h * w];
    for (bit, m) in group.iter().enumerate() {
        if m.height != h || m.width != w {
            return Err(input_err!("map {} is {}x{}, expected {}x{}", bit, m.height, m.width, h, w));
        }
        for (c, &b) in codes.iter_mut().zip(&m.bits) {
            *c |= u32::from(b) << bit;
        }
    }
    Ok(HashedMap { height: h, width: w, codes })
}

/// Histogram block geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockSpec {
    pub block_h: usize,
    pub block_w: usize,
    pub overlap_ratio: f64,
}

impl BlockSpec {
    pub fn new(block_h: usize, block_w: usize, overlap_ratio: f64) -> Result<Self> {
        let spec = Self { block_h, block_w, overlap_ratio };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_h == 0 || self.block_w == 0 {
            return Err(config_err!("block size must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap_ratio) {
            return Err(config_err!("overlap ratio must lie in [0, 1), got {}", self.overlap_ratio));
        }
        if self.stride_h() == 0 || self.stride_w() == 0 {
            return Err(config_err!(
                "overlap ratio {} leaves a zero block stride for {}x{} blocks",
                self.overlap_ratio,
                self.block_h,
                self.block_w
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn stride_h(&self) -> usize {
        libm::round(self.block_h as f64 * (1.0 - self.overlap_ratio)) as usize
    }

    #[inline]
    pub fn stride_w(&self) -> usize {
        libm::round(self.block_w as f64 * (1.0 - self.overlap_ratio)) as usize
    }

    /// Number of whole blocks `B` fitting an `h×w` map; partial trailing blocks are dropped.
    pub fn block_count(&self, h: usize, w: usize) -> usize {
        if h < self.block_h || w < self.block_w {
            return 0;
        }
        ((h - self.block_h) / self.stride_h() + 1) * ((w - self.block_w) / self.stride_w() + 1)
    }

    #[inline]
    pub fn pixels(&self) -> usize {
        self.block_h * self.block_w
    }
}

/// Count histograms (`bins` each) of every block, left-to-right then top-to-bottom.
pub fn block_histograms(hashed: &HashedMap, spec: &BlockSpec, bins: usize) -> Result<Vec<Vec<u32>>> {
    spec.validate()?;
    if spec.block_h > hashed.height || spec.block_w > hashed.width {
        return Err(config_err!(
            "block {}x{} larger than map {}x{}",
            spec.block_h,
            spec.block_w,
            hashed.height,
            hashed.width
        ));
    }
    let (sh, sw) = (spec.stride_h(), spec.stride_w());
    let mut out = Vec::with_capacity(spec.block_count(hashed.height, hashed.width));
    for r0 in (0..=hashed.height - spec.block_h).step_by(sh) {
        for c0 in (0..=hashed.width - spec.block_w).step_by(sw) {
            let mut hist = vec![0u32; bins];
            for r in r0..r0 + spec.block_h {
                for &code in &hashed.codes[r * hashed.width + c0..r * hashed.width + c0 + spec.block_w] {
                    let slot = hist
                        .get_mut(code as usize)
                        .ok_or_else(|| input_err!("code {} outside {} histogram bins", code, bins))?;
                    *slot += 1;
                }
            }
            out.push(hist);
        }
    }
    Ok(out)
}

/// Sparse non-negative feature vector of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f32>,
}

impl FeatureVector {
    /// Builds from `(index, value)` pairs in strictly increasing index order.
    pub fn from_sparse(dim: usize, indices: Vec<u32>, values: Vec<f32>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(input_err!("{} indices but {} values", indices.len(), values.len()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(input_err!("sparse indices must be strictly increasing"));
        }
        if indices.last().is_some_and(|&i| i as usize >= dim) {
            return Err(input_err!("sparse index out of range for dimension {}", dim));
        }
        Ok(Self { dim, indices, values })
    }

    /// Keeps the nonzero entries of a dense vector (values narrowed to `f32`).
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                indices.push(i as u32);
                values.push(v as f32);
            }
        }
        Self { dim: dense.len(), indices, values }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    #[inline]
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            d[i as usize] = f64::from(v);
        }
        d
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| f64::from(v)).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|&v| f64::from(v) * f64::from(v)).sum()
    }

    /// `⟨self, w⟩` against a dense weight vector of at least `dim` entries.
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| w[i as usize] * f64::from(v)).sum()
    }

    /// `w += s · self`.
    #[inline]
    pub fn axpy_into(&self, s: f64, w: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            w[i as usize] += s * f64::from(v);
        }
    }

    pub fn scaled(&self, s: f32) -> Self {
        Self { dim: self.dim, indices: self.indices.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }
}

/// Concatenates per-group block histograms: group-major, then block order, then bin.
pub fn assemble_feature(groups: &[Vec<Vec<u32>>]) -> Result<FeatureVector> {
    let first = groups.first().ok_or_else(|| input_err!("no histogram groups"))?;
    let blocks = first.len();
    let bins = first.first().map_or(0, Vec::len);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut offset = 0usize;
    for (g, hists) in groups.iter().enumerate() {
        if hists.len() != blocks {
            return Err(Error::Internal(alloc::format!(
                "group {} has {} blocks, expected {}",
                g,
                hists.len(),
                blocks
            )));
        }
        for h in hists {
            if h.len() != bins {
                return Err(Error::Internal(alloc::format!("group {} has a {}-bin histogram, expected {}", g, h.len(), bins)));
            }
            for (b, &count) in h.iter().enumerate() {
                if count != 0 {
                    indices.push((offset + b) as u32);
                    values.push(count as f32);
                }
            }
            offset += bins;
        }
    }
    if offset > u32::MAX as usize {
        return Err(config_err!("feature dimension {} exceeds u32 indexing", offset));
    }
    Ok(FeatureVector { dim: offset, indices, values })
}

/// Feature length `2^bits · groups · blocks`.
pub fn feature_dim(bits: usize, groups: usize, blocks: usize) -> usize {
    (1usize << bits) * groups * blocks
}
