//! Experiment configuration: every tunable of a run, TOML-loadable.

use std::path::{Path, PathBuf};

use csnet_core::classifier::SvmParams;
use csnet_core::sensing::default_measurements;
use csnet_core::{BlockSpec, FilterMethod, LearningMeta, PatchConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::{DEFAULT_TEST, DEFAULT_TRAIN};
use crate::error::{CsnetError, Result};

/// Which side of the pooled shuffle trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// `train_size` samples train, the following `test_size` test.
    Standard,
    /// Sizes swapped: `test_size` samples train, `train_size` test.
    Inverted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: FilterMethod,
    /// Filter count per stage; its length is the stage count.
    pub filters: Vec<usize>,
    pub k1: usize,
    pub k2: usize,
    /// OMP sparsity; defaults to `k1`.
    pub sparsity: Option<usize>,
    /// Measurement count; defaults to `⌈k1·k2 / 2⌉`.
    pub measurements: Option<usize>,
    pub block_h: usize,
    pub block_w: usize,
    pub overlap_ratio: f64,
    pub noise_variance: f64,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
    pub seed: u64,
    pub split: SplitMode,
    pub train_size: usize,
    pub test_size: usize,
    /// Recorded for completeness; does not affect the pipeline.
    pub scale: f64,
    pub mnist_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: FilterMethod::Cs,
            filters: vec![8, 8],
            k1: 7,
            k2: 7,
            sparsity: None,
            measurements: None,
            block_h: 7,
            block_w: 7,
            overlap_ratio: 0.0,
            noise_variance: 0.0,
            svm_c: 1.0,
            svm_tol: 1e-3,
            svm_max_iter: 200,
            seed: 1,
            split: SplitMode::Standard,
            train_size: DEFAULT_TRAIN,
            test_size: DEFAULT_TEST,
            scale: 1.0,
            mnist_dir: PathBuf::from("data/mnist"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CsnetError::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| CsnetError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity.unwrap_or(self.k1)
    }

    pub fn measurements(&self) -> usize {
        self.measurements.unwrap_or_else(|| default_measurements(self.k1 * self.k2))
    }

    pub fn patch(&self) -> Result<PatchConfig> {
        Ok(PatchConfig::new(self.k1, self.k2, 1)?)
    }

    pub fn blocks(&self) -> Result<BlockSpec> {
        Ok(BlockSpec::new(self.block_h, self.block_w, self.overlap_ratio)?)
    }

    pub fn learning_meta(&self) -> Result<LearningMeta> {
        Ok(LearningMeta {
            method: self.method,
            seed: self.seed,
            sparsity: self.sparsity(),
            measurements: self.measurements(),
            patch: self.patch()?,
        })
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams { c: self.svm_c, tol: self.svm_tol, max_iter: self.svm_max_iter, seed: self.seed }
    }

    /// `(train, test)` sample counts after applying the split mode.
    pub fn split_sizes(&self) -> (usize, usize) {
        match self.split {
            SplitMode::Standard => (self.train_size, self.test_size),
            SplitMode::Inverted => (self.test_size, self.train_size),
        }
    }

    /// Checks every module precondition up front.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CsnetError::Config(msg));
        let patch = self.patch()?;
        let d = patch.dim();
        if self.filters.is_empty() {
            return bad("at least one stage is required".into());
        }
        if let Some((s, &l)) = self.filters.iter().enumerate().find(|(_, &l)| l == 0 || l > d) {
            return bad(format!("stage {} filter count {} outside 1..={}", s + 1, l, d));
        }
        if *self.filters.last().unwrap() > 16 {
            return bad(format!("last-stage filter count {} exceeds 16 hash bits", self.filters.last().unwrap()));
        }
        let (k, m) = (self.sparsity(), self.measurements());
        if k == 0 || k > m || m > d {
            return bad(format!("need 1 <= K <= M <= {d}, got K={k}, M={m}"));
        }
        let blocks = self.blocks()?;
        if blocks.block_h > 28 || blocks.block_w > 28 {
            return bad(format!("block {}x{} larger than 28x28 images", blocks.block_h, blocks.block_w));
        }
        if !(0.0..=1.0).contains(&self.noise_variance) {
            return bad(format!("noise variance {} outside [0, 1]", self.noise_variance));
        }
        self.svm_params().validate()?;
        if self.train_size == 0 || self.test_size == 0 {
            return bad("train and test sizes must be positive".into());
        }
        Ok(())
    }

    /// The default network restricted to a subset.
    pub fn with_sizes(mut self, train: usize, test: usize) -> Self {
        self.train_size = train;
        self.test_size = test;
        self
    }
}
