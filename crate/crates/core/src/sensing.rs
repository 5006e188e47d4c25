//! Random Gaussian measurement operators and Orthogonal Matching Pursuit.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{config_err, input_err, Result};
use crate::tensor::{dot, least_squares, norm2, Matrix};

/// `M×d` Gaussian measurement matrix with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    phi: Matrix,
    seed: u64,
}

impl MeasurementMatrix {
    #[inline]
    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn measurements(&self) -> usize {
        self.phi.rows()
    }

    #[inline]
    pub fn signal_dim(&self) -> usize {
        self.phi.cols()
    }

    /// Applies the operator to a length-`d` signal.
    pub fn measure(&self, signal: &[f64]) -> Result<Vec<f64>> {
        self.phi.matvec(signal)
    }
}

/// Default measurement count for a signal of dimension `d`: `⌈d/2⌉`.
pub fn default_measurements(d: usize) -> usize {
    d.div_ceil(2)
}

/// Raw i.i.d. `N(0, 1/M)` entries, row-major, before column normalization.
pub fn gaussian_entries(d: usize, m: usize, seed: u64) -> Result<Matrix> {
    if m == 0 || d == 0 {
        return Err(config_err!("measurement matrix needs M >= 1 and d >= 1 (M={}, d={})", m, d));
    }
    if m > d {
        return Err(config_err!("measurement count M={} exceeds signal dimension d={}", m, d));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = 1.0 / libm::sqrt(m as f64);
    let data = (0..m * d)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * sd
        })
        .collect();
    Matrix::from_vec(m, d, data)
}

/// Draws a seeded Gaussian measurement matrix and normalizes each column to unit ℓ2 norm.
pub fn gaussian_measurement(d: usize, m: usize, seed: u64) -> Result<MeasurementMatrix> {
    let mut phi = gaussian_entries(d, m, seed)?;
    for j in 0..d {
        let n = norm2(&phi.column(j));
        for i in 0..m {
            phi.set(i, j, phi.get(i, j) / n);
        }
    }
    Ok(MeasurementMatrix { phi, seed })
}

/// Outcome of an OMP solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    /// Selected atom indices in selection order.
    pub support: Vec<usize>,
    /// Least-squares coefficients aligned with `support`.
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// `‖r_t‖₂` for t = 0 (the input norm) through the last iteration.
    pub residual_history: Vec<f64>,
    /// Coefficients scattered onto a length-`d` vector.
    pub sparse_vector: Vec<f64>,
}

/// Orthogonal Matching Pursuit: greedily selects up to `k` columns of `phi`
/// and re-fits `y` on the selected set by least squares after each pick.
///
/// Stops early once `‖r‖₂ ≤ tol·‖y‖₂`. Already-selected columns are excluded
/// from the correlation argmax and ties resolve to the lowest index.
pub fn omp(y: &[f64], phi: &MeasurementMatrix, k: usize, tol: f64) -> Result<OmpResult> {
    let (m, d) = (phi.measurements(), phi.signal_dim());
    if y.len() != m {
        return Err(input_err!("measurement vector has length {}, expected {}", y.len(), m));
    }
    if k > m {
        return Err(config_err!("sparsity K={} exceeds measurement count M={}", k, m));
    }
    if !(tol >= 0.0) {
        return Err(config_err!("OMP tolerance must be non-negative, got {}", tol));
    }
    let a = phi.phi();
    let y_norm = norm2(y);
    let stop = tol * y_norm;

    let mut residual = y.to_vec();
    let mut residual_norm = y_norm;
    let mut history = vec![y_norm];
    let mut selected = vec![false; d];
    let mut support = Vec::with_capacity(k);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut coefficients = Vec::new();

    while support.len() < k && residual_norm > stop {
        let corr = a.tr_matvec(&residual)?;
        let mut best: Option<(usize, f64)> = None;
        for (j, &c) in corr.iter().enumerate() {
            if selected[j] {
                continue;
            }
            let c = libm::fabs(c);
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((j, c));
            }
        }
        let Some((lambda, _)) = best else { break };
        selected[lambda] = true;
        support.push(lambda);
        columns.push(a.column(lambda));

        let sub = Matrix::from_columns(&columns)?;
        coefficients = least_squares(&sub, y)?;
        let fit = sub.matvec(&coefficients)?;
        for ((r, &yi), &fi) in residual.iter_mut().zip(y).zip(&fit) {
            *r = yi - fi;
        }
        residual_norm = norm2(&residual);
        history.push(residual_norm);
    }

    let mut sparse_vector = vec![0.0; d];
    for (&idx, &c) in support.iter().zip(&coefficients) {
        sparse_vector[idx] = c;
    }
    Ok(OmpResult { support, coefficients, residual_norm, residual_history: history, sparse_vector })
}

/// `⟨r, φ_j⟩` for a residual `r`; exposed for invariant checks.
pub fn atom_correlation(phi: &MeasurementMatrix, residual: &[f64], column: usize) -> f64 {
    dot(&phi.phi().column(column), residual)
}
