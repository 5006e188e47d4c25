//! `csnet` command-line surface: train, eval, sweep, visualize.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use csnet_core::FilterMethod;
use serde::Serialize;

use crate::config::{ExperimentConfig, SplitMode};
use crate::dataset::{add_noise, load_idx, load_mnist_pool, split};
use crate::error::{CsnetError, PhaseExt, Result};
use crate::experiment::{self, noise_spec, EvalRecord, Side, SweepAxis};
use crate::model::ModelFile;
use crate::pgm::write_filter_images;

#[derive(Debug, Parser)]
#[command(name = "csnet", version, about = "Compressive-sensing filter network for MNIST")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn filters and the SVM, write a model file.
    Train(TrainArgs),
    /// Evaluate a model file on a data selection.
    Eval(EvalArgs),
    /// Train and evaluate once per value of one axis.
    Sweep(SweepArgs),
    /// Write every filter as PGM images (spatial and DCT magnitude).
    Visualize(VisualizeArgs),
}

/// Config file plus per-field overrides.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<FilterMethod>,
    /// Filters per stage, e.g. `8,8`.
    #[arg(long, value_delimiter = ',')]
    pub filters: Option<Vec<usize>>,
    #[arg(long)]
    pub l1: Option<usize>,
    #[arg(long)]
    pub l2: Option<usize>,
    /// Number of stages (1 drops the second stage).
    #[arg(long)]
    pub stages: Option<usize>,
    /// Square patch size (sets k1 and k2).
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long)]
    pub sparsity: Option<usize>,
    #[arg(long)]
    pub measurements: Option<usize>,
    /// Square histogram block size.
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub block_h: Option<usize>,
    #[arg(long)]
    pub block_w: Option<usize>,
    #[arg(long)]
    pub overlap_ratio: Option<f64>,
    #[arg(long)]
    pub noise_variance: Option<f64>,
    #[arg(long)]
    pub svm_c: Option<f64>,
    #[arg(long)]
    pub svm_tol: Option<f64>,
    #[arg(long)]
    pub svm_max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub split: Option<SplitMode>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub scale: Option<f64>,
    /// Directory holding the four MNIST IDX files.
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path).phase("config")?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field.clone() { cfg.$field = v; } )* };
        }
        set!(method, filters, k1, k2, block_h, block_w, overlap_ratio, noise_variance, svm_c, svm_tol, svm_max_iter, seed, split, train_size, test_size, scale, mnist_dir);
        if self.sparsity.is_some() {
            cfg.sparsity = self.sparsity;
        }
        if self.measurements.is_some() {
            cfg.measurements = self.measurements;
        }
        if let Some(k) = self.patch_size {
            cfg.k1 = k;
            cfg.k2 = k;
        }
        if let Some(b) = self.block_size {
            cfg.block_h = b;
            cfg.block_w = b;
        }
        if let Some(l1) = self.l1 {
            cfg.filters[0] = l1;
        }
        if let Some(l2) = self.l2 {
            if cfg.filters.len() < 2 {
                cfg.filters.push(l2);
            } else {
                cfg.filters[1] = l2;
            }
        }
        if let Some(n) = self.stages {
            let fill = cfg.filters.get(1).copied().unwrap_or(8);
            cfg.filters.resize(n, fill);
        }
        cfg.validate().phase("config")?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Append metrics records to this file as well as stdout.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Also evaluate on the test side of the split.
    #[arg(long)]
    pub evaluate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataSelection {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Side of the model's stored split to evaluate.
    #[arg(long, value_enum, default_value = "test")]
    pub data: DataSelection,
    /// Overrides the MNIST directory stored in the model config.
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    /// Evaluate explicit IDX files instead of the stored split.
    #[arg(long, requires = "labels")]
    pub images: Option<PathBuf>,
    #[arg(long, requires = "images")]
    pub labels: Option<PathBuf>,
    /// Noise variance for the evaluated data; defaults to the training variance.
    #[arg(long)]
    pub noise_variance: Option<f64>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// One JSON object per line to stdout and, optionally, appended to a file.
struct RecordSink {
    file: Option<(PathBuf, std::fs::File)>,
}

impl RecordSink {
    fn open(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let f = std::fs::OpenOptions::new().create(true).append(true).open(p).map_err(|e| CsnetError::io(p, e))?;
                Some((p.to_path_buf(), f))
            }
            None => None,
        };
        Ok(Self { file })
    }

    fn emit(&mut self, record: &impl Serialize) -> Result<()> {
        let line = serde_json::to_string(record).expect("records serialize");
        println!("{line}");
        if let Some((path, f)) = &mut self.file {
            writeln!(f, "{line}").map_err(|e| CsnetError::io(path.as_path(), e))?;
        }
        Ok(())
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let mut sink = RecordSink::open(args.metrics.as_deref())?;
    let pool = load_mnist_pool(&cfg.mnist_dir).phase("load")?;
    let data = experiment::prepare(&cfg, &pool)?;
    drop(pool);
    let outcome = experiment::train(&cfg, &data.train)?;
    outcome.model.save(&args.model).phase("save")?;
    sink.emit(&outcome.metrics)?;
    if args.evaluate {
        let report = experiment::evaluate_model(&outcome.model, &data.test)?;
        sink.emit(&EvalRecord::new("test", cfg.noise_variance, &report))?;
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let model = ModelFile::load(&args.model).phase("load_model")?;
    let cfg = &model.config;
    let variance = args.noise_variance.unwrap_or(cfg.noise_variance);
    let (label, set) = match (&args.images, &args.labels) {
        (Some(images), Some(labels)) => {
            let set = load_idx(images, labels).phase("load")?;
            let set = add_noise(&set, &noise_spec(cfg, variance, Side::Test)).phase("noise")?;
            (images.display().to_string(), set)
        }
        _ => {
            let dir = args.mnist_dir.clone().unwrap_or_else(|| cfg.mnist_dir.clone());
            let pool = load_mnist_pool(&dir).phase("load")?;
            let (n_train, n_test) = cfg.split_sizes();
            let (train, test) = split(&pool, cfg.seed, n_train, n_test).phase("split")?;
            let (side, set) = match args.data {
                DataSelection::Train => (Side::Train, train),
                DataSelection::Test => (Side::Test, test),
            };
            let set = add_noise(&set, &noise_spec(cfg, variance, side)).phase("noise")?;
            (format!("{:?}", args.data).to_lowercase(), set)
        }
    };
    let report = experiment::evaluate_model(&model, &set)?;
    RecordSink::open(args.metrics.as_deref())?.emit(&EvalRecord::new(label, variance, &report))
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let mut sink = RecordSink::open(args.metrics.as_deref())?;
    let pool = load_mnist_pool(&cfg.mnist_dir).phase("load")?;
    for row in experiment::sweep(&cfg, args.axis, &args.values, &pool) {
        sink.emit(&row)?;
    }
    Ok(())
}

pub fn cmd_visualize(args: &VisualizeArgs) -> Result<()> {
    let model = ModelFile::load(&args.model).phase("load_model")?;
    let written = write_filter_images(&model.bank, &args.out_dir).phase("visualize")?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

/// Dispatches a parsed command line; returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Visualize(a) => cmd_visualize(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
