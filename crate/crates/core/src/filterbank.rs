//! Patch statistics, per-stage filter learning and the convolution cascade.
//!
//! A stage is learned from the Gram matrix `C = X Xᵀ / P` of mean-removed
//! `k1×k2` patches. Compressive-sensing filters take the DCT of `C`, measure it
//! with a seeded Gaussian operator, and recover one `K`-sparse DCT-domain
//! vector per selected measurement column by OMP; the spatial filter is that
//! vector mapped back through the inverse DCT.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config_err, input_err, Error, Result};
use crate::sensing::{gaussian_measurement, omp};
use crate::tensor::{conv2d_same, dct_matrix, norm2, symmetric_eigen, Image, Matrix};

/// Patch geometry shared by every stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PatchConfig {
    pub k1: usize,
    pub k2: usize,
    pub stride: usize,
}

impl PatchConfig {
    pub fn new(k1: usize, k2: usize, stride: usize) -> Result<Self> {
        let cfg = Self { k1, k2, stride };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn square(k: usize) -> Result<Self> {
        Self::new(k, k, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1 < 3 || self.k2 < 3 || self.k1.is_multiple_of(2) || self.k2.is_multiple_of(2) {
            return Err(config_err!("patch size must be odd and >= 3, got {}x{}", self.k1, self.k2));
        }
        if self.stride == 0 {
            return Err(config_err!("patch stride must be >= 1"));
        }
        Ok(())
    }

    /// Vectorized patch length `k1·k2`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.k1 * self.k2
    }

    /// Number of valid (unpadded) patch positions in an `h×w` image.
    pub fn positions(&self, h: usize, w: usize) -> usize {
        if h < self.k1 || w < self.k2 {
            return 0;
        }
        ((h - self.k1) / self.stride + 1) * ((w - self.k2) / self.stride + 1)
    }
}

/// Visits every valid patch of `img` in raster order, passing it mean-removed
/// and vectorized row by row.
fn for_each_patch(img: &Image, cfg: &PatchConfig, buf: &mut [f64], mut f: impl FnMut(&[f64])) {
    let (h, w) = (img.height(), img.width());
    if h < cfg.k1 || w < cfg.k2 {
        return;
    }
    let px = img.pixels();
    let inv = 1.0 / cfg.dim() as f64;
    for r in (0..=h - cfg.k1).step_by(cfg.stride) {
        for c in (0..=w - cfg.k2).step_by(cfg.stride) {
            for i in 0..cfg.k1 {
                let src = &px[(r + i) * w + c..(r + i) * w + c + cfg.k2];
                buf[i * cfg.k2..(i + 1) * cfg.k2].copy_from_slice(src);
            }
            if buf.iter().all(|&v| v == buf[0]) {
                // Constant patch: rounding in the mean would leave residue.
                buf.fill(0.0);
            } else {
                let mean = buf.iter().sum::<f64>() * inv;
                buf.iter_mut().for_each(|v| *v -= mean);
            }
            f(buf);
        }
    }
}

/// Mean-removed patches of every image as the columns of a `k1k2 × P` matrix,
/// image-major then raster order.
pub fn extract_patches(images: &[Image], cfg: &PatchConfig) -> Result<Matrix> {
    cfg.validate()?;
    for (idx, img) in images.iter().enumerate() {
        if img.height() < cfg.k1 || img.width() < cfg.k2 {
            return Err(input_err!(
                "image {} is {}x{}, smaller than the {}x{} patch",
                idx,
                img.height(),
                img.width(),
                cfg.k1,
                cfg.k2
            ));
        }
    }
    let d = cfg.dim();
    let total: usize = images.iter().map(|im| cfg.positions(im.height(), im.width())).sum();
    let mut out = vec![0.0; d * total];
    let mut buf = vec![0.0; d];
    let mut col = 0;
    for img in images {
        for_each_patch(img, cfg, &mut buf, |p| {
            for (i, &v) in p.iter().enumerate() {
                out[i * total + col] = v;
            }
            col += 1;
        });
    }
    Matrix::from_vec(d, total, out)
}

/// Streaming accumulator for the patch Gram matrix `Σ x xᵀ`.
///
/// Lets stage learning run over patch sets far too large to materialize.
#[derive(Debug, Clone)]
pub struct PatchGram {
    dim: usize,
    upper: Vec<f64>,
    count: usize,
}

impl PatchGram {
    pub fn new(dim: usize) -> Self {
        Self { dim, upper: vec![0.0; dim * dim], count: 0 }
    }

    /// Accumulates the columns of an existing patch matrix (taken as given,
    /// no further mean removal).
    pub fn from_patches(patches: &Matrix) -> Self {
        let mut g = Self::new(patches.rows());
        for j in 0..patches.cols() {
            g.add_patch(&patches.column(j));
        }
        g
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add_patch(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        let d = self.dim;
        for a in 0..d {
            let pa = p[a];
            if pa == 0.0 {
                continue;
            }
            let row = &mut self.upper[a * d + a..(a + 1) * d];
            for (g, &pb) in row.iter_mut().zip(&p[a..]) {
                *g += pa * pb;
            }
        }
        self.count += 1;
    }

    /// Adds every valid mean-removed patch of `img`.
    pub fn add_image(&mut self, img: &Image, cfg: &PatchConfig) -> Result<()> {
        if cfg.dim() != self.dim {
            return Err(config_err!("patch dim {} does not match accumulator dim {}", cfg.dim(), self.dim));
        }
        if img.height() < cfg.k1 || img.width() < cfg.k2 {
            return Err(input_err!(
                "map {}x{} smaller than the {}x{} patch",
                img.height(),
                img.width(),
                cfg.k1,
                cfg.k2
            ));
        }
        let mut buf = vec![0.0; self.dim];
        let mut local = core::mem::take(&mut self.upper);
        let mut n = 0;
        let d = self.dim;
        for_each_patch(img, cfg, &mut buf, |p| {
            for a in 0..d {
                let pa = p[a];
                if pa == 0.0 {
                    continue;
                }
                let row = &mut local[a * d + a..(a + 1) * d];
                for (g, &pb) in row.iter_mut().zip(&p[a..]) {
                    *g += pa * pb;
                }
            }
            n += 1;
        });
        self.upper = local;
        self.count += n;
        Ok(())
    }

    /// The scaled Gram matrix `X Xᵀ / P`.
    pub fn finish(&self) -> Result<Matrix> {
        if self.count == 0 {
            return Err(Error::Degenerate(String::from("no patches accumulated")));
        }
        let d = self.dim;
        let inv = 1.0 / self.count as f64;
        let mut c = Matrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let v = self.upper[a * d + b] * inv;
                c.set(a, b, v);
                c.set(b, a, v);
            }
        }
        Ok(c)
    }
}

/// How a stage's filters are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum FilterMethod {
    Cs,
    Pca,
    Random,
}

impl core::fmt::Display for FilterMethod {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            FilterMethod::Cs => "CS",
            FilterMethod::Pca => "PCA",
            FilterMethod::Random => "RANDOM",
        })
    }
}

impl core::str::FromStr for FilterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CS" => Ok(FilterMethod::Cs),
            "PCA" => Ok(FilterMethod::Pca),
            "RANDOM" => Ok(FilterMethod::Random),
            _ => Err(config_err!("unknown filter method {:?} (expected CS, PCA or RANDOM)", s)),
        }
    }
}

/// A single convolution kernel with its orthonormal-DCT representation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Filter {
    pub spatial: Matrix,
    /// `Ψ · vec(spatial)`; for CS filters this is the recovered sparse vector
    /// with exact zeros off its support.
    pub dct: Vec<f64>,
}

impl Filter {
    pub fn from_spatial(spatial: Matrix) -> Result<Self> {
        let psi = dct_matrix(spatial.rows() * spatial.cols())?;
        let dct = psi.matvec(spatial.data())?;
        Ok(Self { spatial, dct })
    }

    pub fn dct_nonzeros(&self) -> usize {
        self.dct.iter().filter(|v| **v != 0.0).count()
    }
}

/// The filters of one stage, in learning order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageFilters {
    pub filters: Vec<Filter>,
}

impl StageFilters {
    #[inline]
    pub fn len(&self) -> usize {
        self.filters.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearningMeta {
    pub method: FilterMethod,
    pub seed: u64,
    pub sparsity: usize,
    pub measurements: usize,
    pub patch: PatchConfig,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterBank {
    pub stages: Vec<StageFilters>,
    pub meta: LearningMeta,
}

impl FilterBank {
    pub fn new(stages: Vec<StageFilters>, meta: LearningMeta) -> Result<Self> {
        let bank = Self { stages, meta };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(config_err!("filter bank needs at least one stage"));
        }
        for (s, stage) in self.stages.iter().enumerate() {
            if stage.is_empty() {
                return Err(config_err!("stage {} has no filters", s));
            }
            for f in &stage.filters {
                if f.spatial.rows() % 2 == 0 || f.spatial.cols() % 2 == 0 {
                    return Err(config_err!("stage {} holds an even-sized filter", s));
                }
                if f.spatial.data().iter().any(|v| !v.is_finite()) {
                    return Err(config_err!("stage {} holds a non-finite filter", s));
                }
            }
        }
        Ok(())
    }

    pub fn widths(&self) -> Vec<usize> {
        self.stages.iter().map(StageFilters::len).collect()
    }

    /// Final-stage maps per image, `∏ L_s`.
    pub fn map_count(&self) -> usize {
        self.stages.iter().map(StageFilters::len).product()
    }

    /// Maps sharing one parent in the last stage (the hashing group size).
    pub fn group_size(&self) -> usize {
        self.stages.last().map_or(0, StageFilters::len)
    }

    /// Number of hashed groups per image, `∏_{s<c} L_s`.
    pub fn group_count(&self) -> usize {
        self.map_count() / self.group_size()
    }
}

fn check_counts(d: usize, l: usize) -> Result<()> {
    if l == 0 {
        return Err(config_err!("filter count must be >= 1"));
    }
    if l > d {
        return Err(config_err!("filter count L={} exceeds patch dimension d={}", l, d));
    }
    Ok(())
}

fn check_gram(gram: &Matrix, cfg: &PatchConfig) -> Result<()> {
    cfg.validate()?;
    let d = cfg.dim();
    if gram.rows() != d || gram.cols() != d {
        return Err(input_err!(
            "patch statistics are {}x{}, expected {}x{} for {}x{} patches",
            gram.rows(),
            gram.cols(),
            d,
            d,
            cfg.k1,
            cfg.k2
        ));
    }
    if gram.data().iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate(String::from(
            "patch Gram matrix is zero (patches are constant after mean removal)",
        )));
    }
    Ok(())
}

fn reshape(v: &[f64], cfg: &PatchConfig) -> Result<Matrix> {
    Matrix::from_vec(cfg.k1, cfg.k2, v.to_vec())
}

/// Learns `l` compressive-sensing filters from a `d×P` mean-removed patch matrix.
pub fn learn_cs_filters(
    patches: &Matrix,
    l: usize,
    k: usize,
    m: usize,
    seed: u64,
    cfg: &PatchConfig,
) -> Result<StageFilters> {
    if patches.rows() != cfg.dim() {
        return Err(input_err!("patch rows {} do not match patch dim {}", patches.rows(), cfg.dim()));
    }
    let gram = PatchGram::from_patches(patches).finish()?;
    learn_cs_from_gram(&gram, l, k, m, seed, cfg)
}

/// Compressive-sensing filters from precomputed patch statistics `C`.
pub fn learn_cs_from_gram(
    gram: &Matrix,
    l: usize,
    k: usize,
    m: usize,
    seed: u64,
    cfg: &PatchConfig,
) -> Result<StageFilters> {
    let d = cfg.dim();
    check_counts(d, l)?;
    if k == 0 || k > m || m > d {
        return Err(config_err!("need 1 <= K <= M <= d, got K={}, M={}, d={}", k, m, d));
    }
    check_gram(gram, cfg)?;

    let psi = dct_matrix(d)?;
    let sparse = psi.matmul(gram)?;
    let phi = gaussian_measurement(d, m, seed)?;
    let measured = phi.phi().matmul(&sparse)?;

    let energy: Vec<f64> = (0..d).map(|j| norm2(&measured.column(j))).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]).then(a.cmp(&b)));

    let psi_t = psi.transpose();
    let mut filters = Vec::with_capacity(l);
    for &col in order.iter().take(l) {
        if energy[col] == 0.0 {
            return Err(Error::Degenerate(alloc::format!("measurement column {} carries no energy", col)));
        }
        let rec = omp(&measured.column(col), &phi, k, 0.0)?;
        let spatial = psi_t.matvec(&rec.sparse_vector)?;
        let n = norm2(&spatial);
        if n == 0.0 {
            return Err(Error::Degenerate(alloc::format!("recovered filter for column {} is zero", col)));
        }
        let dct: Vec<f64> = rec.sparse_vector.iter().map(|v| v / n).collect();
        let spatial: Vec<f64> = spatial.iter().map(|v| v / n).collect();
        filters.push(Filter { spatial: reshape(&spatial, cfg)?, dct });
    }
    Ok(StageFilters { filters })
}

/// Top-`l` principal directions of a mean-removed patch matrix.
pub fn learn_pca_filters(patches: &Matrix, l: usize, cfg: &PatchConfig) -> Result<StageFilters> {
    if patches.rows() != cfg.dim() {
        return Err(input_err!("patch rows {} do not match patch dim {}", patches.rows(), cfg.dim()));
    }
    check_counts(cfg.dim(), l)?;
    let gram = PatchGram::from_patches(patches).finish()?;
    learn_pca_from_gram(&gram, l, cfg)
}

pub fn learn_pca_from_gram(gram: &Matrix, l: usize, cfg: &PatchConfig) -> Result<StageFilters> {
    let d = cfg.dim();
    check_counts(d, l)?;
    check_gram(gram, cfg)?;
    let (_, vectors) = symmetric_eigen(gram)?;
    let filters = (0..l)
        .map(|j| {
            let mut v = vectors.column(j);
            let mut lead = 0;
            for (i, x) in v.iter().enumerate() {
                if libm::fabs(*x) > libm::fabs(v[lead]) {
                    lead = i;
                }
            }
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            Filter::from_spatial(reshape(&v, cfg)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StageFilters { filters })
}

/// Seeded i.i.d. Gaussian filters with unit Frobenius norm.
pub fn random_filters(l: usize, cfg: &PatchConfig, seed: u64) -> Result<StageFilters> {
    cfg.validate()?;
    check_counts(cfg.dim(), l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filters = (0..l)
        .map(|_| {
            let v: Vec<f64> = (0..cfg.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm2(&v);
            let v: Vec<f64> = v.iter().map(|x| x / n).collect();
            Filter::from_spatial(reshape(&v, cfg)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StageFilters { filters })
}

/// Dispatches to the learner for `meta.method` given the stage's patch statistics.
pub fn learn_stage_from_gram(gram: &Matrix, l: usize, meta: &LearningMeta, stage_seed: u64) -> Result<StageFilters> {
    match meta.method {
        FilterMethod::Cs => learn_cs_from_gram(gram, l, meta.sparsity, meta.measurements, stage_seed, &meta.patch),
        FilterMethod::Pca => learn_pca_from_gram(gram, l, &meta.patch),
        FilterMethod::Random => random_filters(l, &meta.patch, stage_seed),
    }
}

/// Learns second-stage CS filters from the pooled mean-removed patches of all
/// first-stage maps.
pub fn learn_stage2_filters(
    stage1_maps: &[Image],
    l2: usize,
    k: usize,
    m: usize,
    seed: u64,
    cfg: &PatchConfig,
) -> Result<StageFilters> {
    cfg.validate()?;
    let mut gram = PatchGram::new(cfg.dim());
    for map in stage1_maps {
        gram.add_image(map, cfg)?;
    }
    learn_cs_from_gram(&gram.finish()?, l2, k, m, seed, cfg)
}

/// Per-stage seed derived from the bank seed; stage 0 uses the seed itself.
pub fn stage_seed(seed: u64, stage: usize) -> u64 {
    seed.wrapping_add((stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Learns every stage in turn, streaming patch statistics of the cascade so far.
///
/// `widths[s]` is the filter count of stage `s`.
pub fn learn_filter_bank(images: &[Image], widths: &[usize], meta: LearningMeta) -> Result<FilterBank> {
    meta.patch.validate()?;
    if widths.is_empty() {
        return Err(config_err!("filter bank needs at least one stage"));
    }
    if images.is_empty() {
        return Err(input_err!("no training images"));
    }
    let mut stages: Vec<StageFilters> = Vec::with_capacity(widths.len());
    for (s, &l) in widths.iter().enumerate() {
        let mut gram = PatchGram::new(meta.patch.dim());
        let needs_stats = meta.method != FilterMethod::Random;
        if needs_stats {
            for img in images {
                if stages.is_empty() {
                    gram.add_image(img, &meta.patch)?;
                } else {
                    for map in cascade_stages(img, &stages)? {
                        gram.add_image(&map, &meta.patch)?;
                    }
                }
            }
        }
        let stage = if needs_stats {
            learn_stage_from_gram(&gram.finish()?, l, &meta, stage_seed(meta.seed, s))?
        } else {
            random_filters(l, &meta.patch, stage_seed(meta.seed, s))?
        };
        stages.push(stage);
    }
    FilterBank::new(stages, meta)
}

fn cascade_stages(img: &Image, stages: &[StageFilters]) -> Result<Vec<Image>> {
    let mut current = vec![img.clone()];
    for stage in stages {
        let mut next = Vec::with_capacity(current.len() * stage.len());
        for parent in &current {
            for f in &stage.filters {
                next.push(conv2d_same(parent, &f.spatial)?);
            }
        }
        current = next;
    }
    Ok(current)
}

/// Final-stage maps of one image, parent-major: children of the first
/// stage-1 map come first.
pub fn cascade_image(img: &Image, bank: &FilterBank) -> Result<Vec<Image>> {
    cascade_stages(img, &bank.stages)
}

/// Final-stage maps for every image.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutput {
    /// `maps[i]` holds `∏ L_s` maps of image `i`, parent-major.
    pub maps: Vec<Vec<Image>>,
    pub group_size: usize,
}

impl CascadeOutput {
    /// Maps of image `i` grouped by their last-stage parent.
    pub fn groups(&self, i: usize) -> core::slice::Chunks<'_, Image> {
        self.maps[i].chunks(self.group_size)
    }
}

pub fn cascade(images: &[Image], bank: &FilterBank) -> Result<CascadeOutput> {
    bank.validate()?;
    let maps = images.iter().map(|img| cascade_image(img, bank)).collect::<Result<Vec<_>>>()?;
    Ok(CascadeOutput { maps, group_size: bank.group_size() })
}
