//! End-to-end runs: split → noise → filter learning → features → SVM → evaluation.

use std::collections::BTreeMap;
use std::time::Instant;

use csnet_core::classifier::{predict, report_from_predictions, train_svm, EvalReport};
use csnet_core::filterbank::learn_filter_bank;
use csnet_core::{FeatureExtractor, FeatureVector};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset::{add_noise, mix_seed, split, LabeledSet, NoiseSpec};
use crate::error::{CsnetError, PhaseExt, Result};
use crate::model::ModelFile;

/// Train and test sets of one run, noise already applied.
#[derive(Debug, Clone)]
pub struct RunData {
    pub train: LabeledSet,
    pub test: LabeledSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Train,
    Test,
}

/// Noise stream for one side of the split; both sides share the variance.
pub fn noise_spec(cfg: &ExperimentConfig, variance: f64, side: Side) -> NoiseSpec {
    let stream = match side {
        Side::Train => 1,
        Side::Test => 2,
    };
    NoiseSpec { variance, seed: mix_seed(cfg.seed, stream) }
}

/// Splits the pool per the config and applies the configured noise.
pub fn prepare(cfg: &ExperimentConfig, pool: &LabeledSet) -> Result<RunData> {
    let (n_train, n_test) = cfg.split_sizes();
    let (train, test) = split(pool, cfg.seed, n_train, n_test).phase("split")?;
    info!("split seed {}: train {} {:?}", cfg.seed, train.len(), train.class_counts());
    info!("split seed {}: test {} {:?}", cfg.seed, test.len(), test.class_counts());
    let train = add_noise(&train, &noise_spec(cfg, cfg.noise_variance, Side::Train)).phase("noise")?;
    let test = add_noise(&test, &noise_spec(cfg, cfg.noise_variance, Side::Test)).phase("noise")?;
    Ok(RunData { train, test })
}

/// Structured summary of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub record: String,
    pub n_train: usize,
    pub feature_dim: usize,
    pub mean_nnz: f64,
    pub train_error: f64,
    pub svm_sweeps: Vec<usize>,
    pub svm_converged: Vec<bool>,
    pub phase_seconds: BTreeMap<String, f64>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelFile,
    pub metrics: TrainMetrics,
}

fn timed<T>(times: &mut BTreeMap<String, f64>, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    let secs = start.elapsed().as_secs_f64();
    info!("phase {phase}: {secs:.2}s");
    times.insert(phase.to_string(), secs);
    Ok(out)
}

pub fn extract_features(extractor: &FeatureExtractor, set: &LabeledSet) -> Result<Vec<FeatureVector>> {
    Ok(extractor.extract_all(&set.images)?)
}

/// Learns the filter bank and SVM from `train`.
pub fn train(cfg: &ExperimentConfig, train: &LabeledSet) -> Result<TrainOutcome> {
    cfg.validate().phase("config")?;
    let mut times = BTreeMap::new();
    let meta = cfg.learning_meta().phase("config")?;
    let blocks = cfg.blocks().phase("config")?;

    let bank = timed(&mut times, "learn_filters", || {
        learn_filter_bank(&train.images, &cfg.filters, meta).phase("learn_filters")
    })?;
    let extractor = FeatureExtractor::new(bank, blocks).phase("learn_filters")?;
    let features = timed(&mut times, "features", || extract_features(&extractor, train).phase("features"))?;
    let labels = train.labels_u32();
    let svm = timed(&mut times, "svm", || train_svm(&features, &labels, &cfg.svm_params()).phase("svm"))?;

    let predicted = features.iter().map(|f| predict(&svm, f)).collect::<csnet_core::Result<Vec<_>>>().phase("svm")?;
    let report = report_from_predictions(&svm.classes, &predicted, &labels).phase("svm")?;
    let mean_nnz = features.iter().map(FeatureVector::nnz).sum::<usize>() as f64 / features.len() as f64;

    let metrics = TrainMetrics {
        record: "train".into(),
        n_train: train.len(),
        feature_dim: extractor.feature_dim(28, 28),
        mean_nnz,
        train_error: report.error_rate,
        svm_sweeps: svm.meta.sweeps.clone(),
        svm_converged: svm.meta.converged.clone(),
        phase_seconds: times,
        config: cfg.clone(),
    };
    let FeatureExtractor { bank, blocks } = extractor;
    Ok(TrainOutcome { model: ModelFile::new(cfg.clone(), bank, blocks, svm), metrics })
}

/// Runs the stored pipeline image by image and scores the predictions.
pub fn evaluate_model(model: &ModelFile, set: &LabeledSet) -> Result<EvalReport> {
    let extractor = model.extractor()?;
    let predicted = set
        .images
        .iter()
        .map(|im| extractor.extract(im).and_then(|f| predict(&model.svm, &f)))
        .collect::<csnet_core::Result<Vec<_>>>()
        .phase("eval")?;
    report_from_predictions(&model.svm.classes, &predicted, &set.labels_u32()).phase("eval")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub record: String,
    pub data: String,
    pub noise_variance: f64,
    pub n_test: usize,
    pub error_rate: f64,
    pub confusion: Vec<Vec<usize>>,
}

impl EvalRecord {
    pub fn new(data: impl Into<String>, noise_variance: f64, report: &EvalReport) -> Self {
        Self {
            record: "eval".into(),
            data: data.into(),
            noise_variance,
            n_test: report.n_test,
            error_rate: report.error_rate,
            confusion: report.confusion.clone(),
        }
    }
}

/// Train on the configured split, then evaluate on its test side.
pub fn run(cfg: &ExperimentConfig, pool: &LabeledSet) -> Result<(TrainOutcome, EvalReport)> {
    let data = prepare(cfg, pool)?;
    let outcome = train(cfg, &data.train)?;
    let report = evaluate_model(&outcome.model, &data.test)?;
    info!("test error {:.4} on {} samples", report.error_rate, report.n_test);
    Ok((outcome, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    L1,
    L2,
    Layers,
    Noise,
}

impl SweepAxis {
    /// The config for one sweep value.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(CsnetError::Config(format!("{self:?} sweep value {value} is not a positive integer")))
            }
        };
        match self {
            SweepAxis::L1 => cfg.filters[0] = count()?,
            SweepAxis::L2 => {
                if cfg.filters.len() < 2 {
                    cfg.filters.push(8);
                }
                cfg.filters[1] = count()?;
            }
            SweepAxis::Layers => {
                let n = count()?;
                let last = *cfg.filters.last().expect("validated config has a stage");
                cfg.filters.resize(n, if cfg.filters.len() >= 2 { last } else { 8 });
            }
            SweepAxis::Noise => cfg.noise_variance = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub record: String,
    pub axis: SweepAxis,
    pub value: f64,
    pub error_rate: Option<f64>,
    pub train_error: Option<f64>,
    pub feature_dim: Option<usize>,
    pub failure: Option<String>,
    pub seconds: f64,
}

/// Trains and evaluates once per value; failures are recorded and the sweep continues.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[f64], pool: &LabeledSet) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            let start = Instant::now();
            let result = axis.apply(base, value).and_then(|cfg| run(&cfg, pool));
            let seconds = start.elapsed().as_secs_f64();
            let mut row = SweepRow {
                record: "sweep".into(),
                axis,
                value,
                error_rate: None,
                train_error: None,
                feature_dim: None,
                failure: None,
                seconds,
            };
            match result {
                Ok((outcome, report)) => {
                    row.error_rate = Some(report.error_rate);
                    row.train_error = Some(outcome.metrics.train_error);
                    row.feature_dim = Some(outcome.metrics.feature_dim);
                }
                Err(e) => row.failure = Some(e.to_string()),
            }
            row
        })
        .collect()
}
