//! Self-consistent training of the additive GP model.
//!
//! Every component keeps a stored output vector on the training rows,
//! initialized to `a(0)·y/N`. In each cycle the components are refitted in
//! list order: component `i` is fitted against the residual
//! `y - sum_{j != i} out_j` of all other stored outputs, then its own
//! stored output is replaced by `a(c)` times its predicted mean. The
//! annealing factor `a(c) = min(s + (1-s)·e·c/C, 1)` starts below 1 so the
//! first fits cannot crowd out the later ones and reaches 1 as the cycles
//! progress. Prediction always sums plain (unscaled) component means.
//!
//! The kernel matrix of each component depends only on the projected
//! inputs, so it is factorized once per component and reused across all
//! cycles; each refit costs one pair of triangular solves.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::datasets::{Column, Dataset, Scaler};
use crate::error::{Error, Result};
use crate::gpr::{factorize_spd, kernel_matrix, GprModel, KernelParams};
use crate::projection::{project, SelectionMatrix};

/// Cycle count and annealing parameters of one training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    cycles: usize,
    scale_start: f64,
    scale_rate: f64,
}

impl TrainingSchedule {
    /// Requires `cycles >= 1`, `0 < scale_start <= 1`, `scale_rate > 0`.
    pub fn new(cycles: usize, scale_start: f64, scale_rate: f64) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::input("schedule: cycle count must be at least 1"));
        }
        if !(scale_start > 0.0 && scale_start <= 1.0) {
            return Err(Error::input(format!(
                "schedule: scale_start must be in (0, 1], got {scale_start}"
            )));
        }
        if !(scale_rate.is_finite() && scale_rate > 0.0) {
            return Err(Error::input(format!(
                "schedule: scale_rate must be positive, got {scale_rate}"
            )));
        }
        Ok(Self {
            cycles,
            scale_start,
            scale_rate,
        })
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn scale_start(&self) -> f64 {
        self.scale_start
    }

    pub fn scale_rate(&self) -> f64 {
        self.scale_rate
    }

    /// The annealing factor `min(s + (1-s)·e·c/C, 1)` for cycle `c`
    /// (counted from 0). Non-decreasing in `c`; equals `s` at `c = 0`.
    pub fn scale_factor(&self, cycle: usize) -> Result<f64> {
        if cycle >= self.cycles {
            return Err(Error::input(format!(
                "scale_factor: cycle {cycle} out of range (total {})",
                self.cycles
            )));
        }
        let s = self.scale_start;
        let ramp = s + (1.0 - s) * self.scale_rate * cycle as f64 / self.cycles as f64;
        Ok(ramp.min(1.0))
    }
}

/// A trained model: ordered `(selection, gpr)` pairs, the schedule that
/// produced them, the per-cycle training RMSE and the scaling metadata
/// carried over from the dataset.
#[derive(Debug, Clone)]
pub struct HdmrModel {
    components: Vec<(SelectionMatrix, GprModel)>,
    schedule: TrainingSchedule,
    scaler: Option<Scaler>,
    train_rmse_history: Vec<f64>,
}

/// Summary of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    /// Training-set RMSE after the final cycle, in scaled target units.
    pub rmse_train: f64,
    /// The same RMSE converted to raw target units when a scaler is known.
    pub rmse_train_raw: Option<f64>,
    /// RMSE on a held-out set, filled by evaluation tooling.
    pub rmse_eval: Option<f64>,
    /// Training-set RMSE after each cycle.
    pub cycle_rmse: Vec<f64>,
    /// Root-mean-square of each component's final contribution on the
    /// training rows, labelled by its selection matrix.
    pub component_rms: Vec<(String, f64)>,
}

/// Root-mean-square error between predictions and reference values.
pub fn rmse(pred: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::input(format!(
            "rmse: lengths differ ({} vs {})",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::input("rmse: empty vectors"));
    }
    let ms = pred
        .iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(ms.sqrt())
}

/// Observer invoked just before each component refit; used by tests to
/// check the residual construction.
#[allow(dead_code)]
pub(crate) struct TrainStep<'a> {
    pub cycle: usize,
    pub component: usize,
    pub target: &'a DVector<f64>,
    pub stored_outputs: &'a [DVector<f64>],
}

/// Trains a model on complete data. See the module docs for the cycle
/// structure.
pub fn train(
    data: &Dataset,
    matrices: Vec<SelectionMatrix>,
    kernel: KernelParams,
    schedule: TrainingSchedule,
) -> Result<(HdmrModel, FitReport)> {
    train_observed(data, matrices, kernel, schedule, &mut |_| {})
}

struct PreparedComponent {
    selection: SelectionMatrix,
    x_proj: DMatrix<f64>,
    /// Kernel matrix without the noise diagonal; maps weights to training
    /// means.
    k_plain: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

pub(crate) fn train_observed(
    data: &Dataset,
    matrices: Vec<SelectionMatrix>,
    kernel: KernelParams,
    schedule: TrainingSchedule,
    observer: &mut dyn FnMut(TrainStep<'_>),
) -> Result<(HdmrModel, FitReport)> {
    if matrices.is_empty() {
        return Err(Error::input(
            "train: at least one selection matrix is required",
        ));
    }
    if !data.is_complete() {
        return Err(Error::input("train: training data contain missing entries"));
    }
    if let Some(bad) = matrices.iter().find(|m| m.input_dim() != data.dim()) {
        return Err(Error::input(format!(
            "train: selection matrix '{}' expects {} input dimensions but data have {}",
            bad.label(),
            bad.input_dim(),
            data.dim()
        )));
    }

    let y = data.y();
    let n = data.n_rows();
    let n_comp = matrices.len();

    let mut prepared = Vec::with_capacity(n_comp);
    for (idx, selection) in matrices.into_iter().enumerate() {
        let x_proj = project(data.x(), &selection)?;
        let k_plain = kernel_matrix(&x_proj, &x_proj, &kernel)?;
        let mut k = k_plain.clone();
        for i in 0..n {
            k[(i, i)] += kernel.noise_variance();
        }
        let (chol, jitter) = factorize_spd(&k).map_err(|e| Error::Training {
            cycle: 0,
            component: idx,
            label: selection.label().to_string(),
            source: Box::new(e),
        })?;
        prepared.push(PreparedComponent {
            selection,
            x_proj,
            k_plain,
            chol,
            jitter,
        });
    }

    // every stored output starts as the annealed equal share of the target
    let a0 = schedule.scale_factor(0)?;
    let mut stored: Vec<DVector<f64>> = vec![y * (a0 / n_comp as f64); n_comp];
    let mut means: Vec<DVector<f64>> = vec![DVector::zeros(n); n_comp];
    let mut weights: Vec<DVector<f64>> = vec![DVector::zeros(n); n_comp];
    let mut history = Vec::with_capacity(schedule.cycles());

    for cycle in 0..schedule.cycles() {
        let a = schedule.scale_factor(cycle)?;
        for i in 0..n_comp {
            let mut target = y.clone();
            for (j, out) in stored.iter().enumerate() {
                if j != i {
                    target -= out;
                }
            }
            if target.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training {
                    cycle,
                    component: i,
                    label: prepared[i].selection.label().to_string(),
                    source: Box::new(Error::Numerical("residual target is not finite".into())),
                });
            }
            observer(TrainStep {
                cycle,
                component: i,
                target: &target,
                stored_outputs: &stored,
            });

            weights[i] = prepared[i].chol.solve(&target);
            means[i] = &prepared[i].k_plain * &weights[i];
            stored[i] = &means[i] * a;
        }
        let mut pred = DVector::zeros(n);
        for mean in &means {
            pred += mean;
        }
        history.push(rmse(&pred, y)?);
    }

    let mut components = Vec::with_capacity(n_comp);
    let mut component_rms = Vec::with_capacity(n_comp);
    for (i, part) in prepared.into_iter().enumerate() {
        let rms = (means[i].norm_squared() / n as f64).sqrt();
        component_rms.push((part.selection.label().to_string(), rms));
        let gpr = GprModel::from_factor(
            part.x_proj,
            kernel,
            part.chol.l(),
            weights[i].clone(),
            part.jitter,
        );
        components.push((part.selection, gpr));
    }

    let rmse_train = *history.last().unwrap();
    let rmse_train_raw = data
        .scaler()
        .map(|s| Ok::<f64, Error>(rmse_train * s.span(Column::Target)?))
        .transpose()?;
    let model = HdmrModel {
        components,
        schedule,
        scaler: data.scaler().cloned(),
        train_rmse_history: history.clone(),
    };
    let report = FitReport {
        rmse_train,
        rmse_train_raw,
        rmse_eval: None,
        cycle_rmse: history,
        component_rms,
    };
    Ok((model, report))
}

impl HdmrModel {
    pub fn components(&self) -> &[(SelectionMatrix, GprModel)] {
        &self.components
    }

    pub fn schedule(&self) -> &TrainingSchedule {
        &self.schedule
    }

    pub fn scaler(&self) -> Option<&Scaler> {
        self.scaler.as_ref()
    }

    pub fn train_rmse_history(&self) -> &[f64] {
        &self.train_rmse_history
    }

    /// Input dimensionality `D` the model expects.
    pub fn input_dim(&self) -> usize {
        self.components[0].0.input_dim()
    }

    pub(crate) fn from_parts(
        components: Vec<(SelectionMatrix, GprModel)>,
        schedule: TrainingSchedule,
        scaler: Option<Scaler>,
        train_rmse_history: Vec<f64>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::input("model must have at least one component"));
        }
        let dim = components[0].0.input_dim();
        if components.iter().any(|(m, _)| m.input_dim() != dim) {
            return Err(Error::input(
                "model components disagree on input dimensionality",
            ));
        }
        if train_rmse_history.len() != schedule.cycles() {
            return Err(Error::input(format!(
                "model history has {} entries for a {}-cycle schedule",
                train_rmse_history.len(),
                schedule.cycles()
            )));
        }
        Ok(Self {
            components,
            schedule,
            scaler,
            train_rmse_history,
        })
    }

    fn check_query(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::input(format!(
                "predict: query has {} columns but the model expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(
                "predict: query contains missing or non-finite entries",
            ));
        }
        Ok(())
    }

    /// Sum of the component means at each query row.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_query(x)?;
        let mut out = DVector::zeros(x.nrows());
        for (selection, gpr) in &self.components {
            out += gpr.predict_mean(&project(x, selection)?)?;
        }
        Ok(out)
    }

    /// Square root of the summed component variances. This is the
    /// confidence of the expectation value, not a fit-error bar: a sparse
    /// full-dimensional fit can carry a wide band around a low-RMSE mean
    /// while a low-order model carries a narrow band around a higher-RMSE
    /// mean.
    pub fn predict_std(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_query(x)?;
        let mut total = DVector::zeros(x.nrows());
        for (selection, gpr) in &self.components {
            total += gpr.predict_variance(&project(x, selection)?)?;
        }
        Ok(total.map(f64::sqrt))
    }

    /// Per-component means, one column per component; rows sum to
    /// [`HdmrModel::predict`].
    pub fn component_outputs(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_query(x)?;
        let mut out = DMatrix::zeros(x.nrows(), self.components.len());
        for (i, (selection, gpr)) in self.components.iter().enumerate() {
            out.set_column(i, &gpr.predict_mean(&project(x, selection)?)?);
        }
        Ok(out)
    }
}
