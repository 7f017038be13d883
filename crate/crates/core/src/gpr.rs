//! Exact Gaussian process regression with an isotropic squared-exponential
//! kernel: `k(a, b) = exp(-||a - b||^2 / (2 l^2))`, unit signal variance,
//! zero prior mean.
//!
//! Fitting factorizes `K + sigma^2 I` once with a Cholesky decomposition;
//! the predictive mean is `K* alpha` with `alpha = (K + sigma^2 I)^-1 y`,
//! and the predictive variance is the diagonal of `K** - K* K^-1 K*^T`
//! evaluated through triangular solves against the stored factor. Targets
//! are expected pre-scaled to `[0, 1]`, so no mean-centering is applied.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jitter escalation tried on the diagonal when the bare Cholesky fails.
/// Noise levels as small as 1e-11 make a near-singular `K` a routine event.
const JITTER_STEPS: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

/// Factorizes `k` (kernel matrix with noise already on the diagonal),
/// escalating diagonal jitter until the Cholesky succeeds. Returns the
/// factorization and the jitter it needed.
pub(crate) fn factorize_spd(
    k: &DMatrix<f64>,
) -> Result<(nalgebra::Cholesky<f64, nalgebra::Dyn>, f64)> {
    let n = k.nrows();
    for &jitter in &JITTER_STEPS {
        let mut m = k.clone();
        if jitter > 0.0 {
            for i in 0..n {
                m[(i, i)] += jitter;
            }
        }
        if let Some(chol) = m.cholesky() {
            return Ok((chol, jitter));
        }
    }
    Err(Error::Conditioning {
        jitter: *JITTER_STEPS.last().unwrap(),
    })
}

/// Hyperparameters of the squared-exponential kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    length_scale: f64,
    noise_variance: f64,
}

impl KernelParams {
    /// Requires `length_scale > 0` and `noise_variance >= 0`, both finite.
    pub fn new(length_scale: f64, noise_variance: f64) -> Result<Self> {
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(Error::input(format!(
                "length_scale must be a positive finite number, got {length_scale}"
            )));
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::input(format!(
                "noise_variance must be a non-negative finite number, got {noise_variance}"
            )));
        }
        Ok(Self {
            length_scale,
            noise_variance,
        })
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
}

/// `exp(-||a - b||^2 / (2 l^2))`; symmetric, in `(0, 1]`, exactly 1 at `a = b`.
pub fn kernel_value(a: &[f64], b: &[f64], params: &KernelParams) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "kernel_value: point dimensions differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let l = params.length_scale;
    Ok((-d2 / (2.0 * l * l)).exp())
}

/// Cross-kernel matrix: entry `(i, j)` is the kernel between row `i` of `x1`
/// and row `j` of `x2`.
pub fn kernel_matrix(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    params: &KernelParams,
) -> Result<DMatrix<f64>> {
    if x1.ncols() != x2.ncols() {
        return Err(Error::input(format!(
            "kernel_matrix: column counts differ ({} vs {})",
            x1.ncols(),
            x2.ncols()
        )));
    }
    let inv_two_l2 = 1.0 / (2.0 * params.length_scale * params.length_scale);
    let mut k = DMatrix::zeros(x1.nrows(), x2.nrows());
    for i in 0..x1.nrows() {
        for j in 0..x2.nrows() {
            let d2: f64 = (0..x1.ncols())
                .map(|c| {
                    let d = x1[(i, c)] - x2[(j, c)];
                    d * d
                })
                .sum();
            k[(i, j)] = (-d2 * inv_two_l2).exp();
        }
    }
    Ok(k)
}

/// A trained GP regressor: retained inputs, the lower Cholesky factor of
/// `K + sigma^2 I (+ jitter I)` and the weight vector `alpha`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GprModel {
    train_inputs: DMatrix<f64>,
    params: KernelParams,
    chol_lower: DMatrix<f64>,
    weights: DVector<f64>,
    /// Diagonal jitter that was needed to factorize, 0.0 in the common case.
    jitter: f64,
}

impl GprModel {
    /// Fits the regressor on `x` (one row per point) and targets `y`.
    ///
    /// If the bare factorization fails, jitter escalates over
    /// 1e-12, 1e-10, 1e-8, 1e-6 before giving up with a conditioning error.
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, params: KernelParams) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::input("gpr fit: no training points"));
        }
        if y.len() != n {
            return Err(Error::input(format!(
                "gpr fit: {} training rows but {} targets",
                n,
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(
                "gpr fit: training data contain non-finite values",
            ));
        }

        let mut k = kernel_matrix(x, x, &params)?;
        for i in 0..n {
            k[(i, i)] += params.noise_variance;
        }
        let (chol, jitter) = factorize_spd(&k)?;
        let weights = chol.solve(y);
        Ok(Self {
            train_inputs: x.clone(),
            params,
            chol_lower: chol.unpack(),
            weights,
            jitter,
        })
    }

    /// Predictive mean `K* alpha` at the query rows.
    pub fn predict_mean(&self, x_query: &DMatrix<f64>) -> Result<DVector<f64>> {
        let k_star = kernel_matrix(x_query, &self.train_inputs, &self.params)?;
        Ok(&k_star * &self.weights)
    }

    /// Predictive variance, the diagonal of `K** - K* K^-1 K*^T` with
    /// `K** = 1` for this kernel. Round-off can push the subtraction a hair
    /// below zero; entries are clamped at 0.
    pub fn predict_variance(&self, x_query: &DMatrix<f64>) -> Result<DVector<f64>> {
        let k_star = kernel_matrix(x_query, &self.train_inputs, &self.params)?;
        let v = self
            .chol_lower
            .solve_lower_triangular(&k_star.transpose())
            .ok_or_else(|| Error::Numerical("triangular solve failed in variance".into()))?;
        let var = DVector::from_fn(x_query.nrows(), |j, _| {
            (1.0 - v.column(j).norm_squared()).max(0.0)
        });
        Ok(var)
    }

    pub fn train_inputs(&self) -> &DMatrix<f64> {
        &self.train_inputs
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn chol_lower(&self) -> &DMatrix<f64> {
        &self.chol_lower
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Assembles a model from an already-computed factorization.
    pub(crate) fn from_factor(
        train_inputs: DMatrix<f64>,
        params: KernelParams,
        chol_lower: DMatrix<f64>,
        weights: DVector<f64>,
        jitter: f64,
    ) -> Self {
        Self {
            train_inputs,
            params,
            chol_lower,
            weights,
            jitter,
        }
    }

    /// Rebuilds a model from stored parts, re-factorizing the kernel matrix
    /// with the recorded jitter. Same inputs produce bit-identical factors,
    /// so a save/load round trip does not perturb predictions.
    pub(crate) fn from_parts(
        train_inputs: DMatrix<f64>,
        params: KernelParams,
        weights: DVector<f64>,
        jitter: f64,
    ) -> Result<Self> {
        let n = train_inputs.nrows();
        if weights.len() != n {
            return Err(Error::input(format!(
                "gpr from_parts: {} training rows but {} weights",
                n,
                weights.len()
            )));
        }
        let mut k = kernel_matrix(&train_inputs, &train_inputs, &params)?;
        for i in 0..n {
            k[(i, i)] += params.noise_variance + jitter;
        }
        let chol = k.cholesky().ok_or(Error::Conditioning { jitter })?;
        Ok(Self {
            train_inputs,
            params,
            chol_lower: chol.unpack(),
            weights,
            jitter,
        })
    }
}
