//! Additive Gaussian-process models over projected inputs, with
//! inverse-lookup imputation of missing input values.
//!
//! A model is a sum of low-dimensional component functions. Each component
//! is an exact GP regressor over a projection `X·A` of the full feature
//! matrix, where `A` is a user-chosen selection matrix (a basis column, a
//! pair of columns, or any linear combination of columns). Components are
//! fitted against each other's residuals in self-consistency cycles, with
//! an annealing factor that ramps the weight of already-fitted components
//! from `s` to 1 so early fits do not crowd out later ones.
//!
//! When every component depends on a single variable, the fitted model
//! supports imputation of one missing input per row: the missing
//! component's value is isolated as the residual of the row's target, and
//! the component function is inverted through a uniform-grid lookup table.
//! Non-monotone components yield several candidate abscissae; all of them
//! are reported and the first (closest) is chosen by default.
//!
//! ```
//! use hdmr_gpr::datasets::gen_additive;
//! use hdmr_gpr::gpr::KernelParams;
//! use hdmr_gpr::hdmr::{train, TrainingSchedule};
//! use hdmr_gpr::projection::one_d;
//!
//! let data = gen_additive(200, 3, 7).unwrap();
//! let kernel = KernelParams::new(0.6, 1e-10).unwrap();
//! let schedule = TrainingSchedule::new(50, 0.1, 2.0).unwrap();
//! let (model, report) = train(&data, one_d(3).unwrap(), kernel, schedule).unwrap();
//! assert!(report.rmse_train < 0.01);
//! let pred = model.predict(data.x()).unwrap();
//! assert_eq!(pred.len(), 200);
//! ```

pub mod datasets;
mod error;
pub mod gpr;
pub mod hdmr;
pub mod imputation;
pub mod model_io;
pub mod projection;

pub use error::{Error, Result};
