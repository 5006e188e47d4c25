//! One-vs-rest linear SVM trained by dual coordinate descent.
//!
//! Each binary problem is `min ½‖w‖² + ½b² + C Σ max(0, 1 − yᵢ(wᵀxᵢ + b))`,
//! the bias handled as an extra constant feature of value 1. The dual is the
//! box-constrained QP `min ½αᵀQα − Σα, 0 ≤ α ≤ C`, solved one coordinate at a
//! time over a seeded random permutation with active-set shrinking.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, input_err, Error, Result};
use crate::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-3, max_iter: 200, seed: 0 }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(config_err!("SVM C must be positive, got {}", self.c));
        }
        if !(self.tol > 0.0) {
            return Err(config_err!("SVM tolerance must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return Err(config_err!("SVM max_iter must be >= 1"));
        }
        Ok(())
    }
}

/// Solution of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub alpha: Vec<f64>,
    /// Dual objective after each sweep.
    pub dual_objective: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Final projected-gradient gap `max PG − min PG` over all coordinates.
    pub violation: f64,
}

impl BinarySvm {
    pub fn decision(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }
}

/// Primal objective `½(‖w‖² + b²) + C Σ hinge`.
pub fn primal_objective(weights: &[f64], bias: f64, xs: &[FeatureVector], ys: &[f64], c: f64) -> f64 {
    let reg = 0.5 * (weights.iter().map(|w| w * w).sum::<f64>() + bias * bias);
    let loss: f64 = xs.iter().zip(ys).map(|(x, &y)| f64::max(0.0, 1.0 - y * (x.dot(weights) + bias))).sum();
    reg + c * loss
}

fn check_features(xs: &[FeatureVector]) -> Result<usize> {
    let dim = xs.first().ok_or_else(|| input_err!("no training samples"))?.dim();
    if let Some((i, x)) = xs.iter().enumerate().find(|(_, x)| x.dim() != dim) {
        return Err(input_err!("sample {} has dimension {}, expected {}", i, x.dim(), dim));
    }
    Ok(dim)
}

/// Trains a binary SVM on labels `ys ∈ {−1, +1}`.
pub fn train_binary(xs: &[FeatureVector], ys: &[f64], params: &SvmParams) -> Result<BinarySvm> {
    params.validate()?;
    let dim = check_features(xs)?;
    if xs.len() != ys.len() {
        return Err(input_err!("{} samples but {} labels", xs.len(), ys.len()));
    }
    if ys.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(input_err!("binary labels must be +1 or -1"));
    }
    let n = xs.len();
    let c = params.c;
    let qd: Vec<f64> = xs.iter().map(|x| x.squared_norm() + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut index: Vec<usize> = (0..n).collect();
    let mut active = n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut objective_log = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;

    while sweeps < params.max_iter {
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        index[..active].shuffle(&mut rng);
        let mut s = 0;
        while s < active {
            let i = index[s];
            let y = ys[i];
            let g = y * (xs[i].dot(&w) + b) - 1.0;
            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == c {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if libm::fabs(pg) > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y;
                xs[i].axpy_into(step, &mut w);
                b += step;
            }
            s += 1;
        }
        sweeps += 1;
        objective_log.push(dual_objective(&w, b, &alpha));
        violation = pg_max - pg_min;
        if violation <= params.tol {
            if active == n {
                converged = true;
                break;
            }
            active = n;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
        pg_min_old = if pg_min >= 0.0 { f64::NEG_INFINITY } else { pg_min };
    }
    Ok(BinarySvm { weights: w, bias: b, alpha, dual_objective: objective_log, sweeps, converged, violation })
}

fn dual_objective(w: &[f64], b: f64, alpha: &[f64]) -> f64 {
    0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b) - alpha.iter().sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingMeta {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Sweeps used by each one-vs-rest problem.
    pub sweeps: Vec<usize>,
    pub converged: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SvmModel {
    pub classes: Vec<u32>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c_param: f64,
    pub meta: TrainingMeta,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        if x.dim() != self.dim() {
            return Err(input_err!("feature dimension {} does not match model dimension {}", x.dim(), self.dim()));
        }
        Ok(self.weights.iter().zip(&self.biases).map(|(w, b)| x.dot(w) + b).collect())
    }
}

/// Sorted distinct labels.
fn class_list(labels: &[u32]) -> Vec<u32> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

pub fn train_svm(features: &[FeatureVector], labels: &[u32], params: &SvmParams) -> Result<SvmModel> {
    params.validate()?;
    check_features(features)?;
    if features.len() != labels.len() {
        return Err(input_err!("{} feature vectors but {} labels", features.len(), labels.len()));
    }
    let classes = class_list(labels);
    if classes.len() < 2 {
        return Err(config_err!("need at least 2 classes, got {}", classes.len()));
    }
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    let mut sweeps = Vec::with_capacity(classes.len());
    let mut converged = Vec::with_capacity(classes.len());
    for &cls in &classes {
        let ys: Vec<f64> = labels.iter().map(|&l| if l == cls { 1.0 } else { -1.0 }).collect();
        let sol = train_binary(features, &ys, params)?;
        sweeps.push(sol.sweeps);
        converged.push(sol.converged);
        weights.push(sol.weights);
        biases.push(sol.bias);
    }
    Ok(SvmModel {
        classes,
        weights,
        biases,
        c_param: params.c,
        meta: TrainingMeta { tol: params.tol, max_iter: params.max_iter, seed: params.seed, sweeps, converged },
    })
}

/// Label with the largest score; ties go to the earliest class.
pub fn predict(model: &SvmModel, feature: &FeatureVector) -> Result<u32> {
    let scores = model.scores(feature)?;
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    Ok(model.classes[best])
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub error_rate: f64,
    /// `confusion[true][predicted]`, indexed like `classes`.
    pub confusion: Vec<Vec<usize>>,
    pub classes: Vec<u32>,
    pub n_test: usize,
}

pub fn evaluate(model: &SvmModel, features: &[FeatureVector], labels: &[u32]) -> Result<EvalReport> {
    let predictions = features.iter().map(|f| predict(model, f)).collect::<Result<Vec<_>>>()?;
    report_from_predictions(&model.classes, &predictions, labels)
}

/// Builds an evaluation report from predicted and true labels.
pub fn report_from_predictions(classes: &[u32], predicted: &[u32], truth: &[u32]) -> Result<EvalReport> {
    if predicted.is_empty() {
        return Err(input_err!("empty test set"));
    }
    if predicted.len() != truth.len() {
        return Err(input_err!("{} predictions but {} labels", predicted.len(), truth.len()));
    }
    let pos = |l: u32| {
        classes.iter().position(|&c| c == l).ok_or_else(|| Error::Input(alloc::format!("label {} unknown to the model", l)))
    };
    let k = classes.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[pos(t)?][pos(p)?] += 1;
    }
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let n = predicted.len();
    Ok(EvalReport { error_rate: 1.0 - correct as f64 / n as f64, confusion, classes: classes.to_vec(), n_test: n })
}
