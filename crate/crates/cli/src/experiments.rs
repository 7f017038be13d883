//! Built-in end-to-end reproductions behind `eval --experiment <name>`.
//! Each one generates (or loads) its dataset, trains, imputes where
//! relevant and writes a metrics file; all randomness derives from the run
//! seed.

use std::path::Path;

use anyhow::{bail, Context, Result};

use hdmr_gpr::datasets::{
    add_noise, gen_additive, gen_coupled, gen_quartic, gen_uneven, inject_missing,
    inject_missing_in_column, load_csv, minmax_scale, sample_rows, Column, Dataset,
};
use hdmr_gpr::gpr::KernelParams;
use hdmr_gpr::hdmr::{rmse, train, TrainingSchedule};
use hdmr_gpr::imputation::{impute_dataset, ImputationPolicy};
use hdmr_gpr::projection::one_d;

use crate::commands::{ensure_out_dir, retrain_and_eval, write_history, write_metrics};

pub const EXPERIMENTS: &[&str] = &[
    "water-1d",
    "additive-impute",
    "coupled-impute",
    "quartic-candidates",
    "uneven",
    "noisy",
    "d15",
];

const WATER_ENV: &str = "HDMR_WATER_DATA";
const WATER_DEFAULT: &str = "data/h2o_pes.csv";

fn synthetic_kernel() -> KernelParams {
    KernelParams::new(0.6, 1e-10).unwrap()
}

/// Annealing must actually reach 1 for the residual fits to become
/// unbiased; rate 2 gets there halfway through the 50 cycles. Rate 1 never
/// does (a(49) = 0.982) and leaves a visible constant offset on additive
/// targets.
fn schedule() -> TrainingSchedule {
    TrainingSchedule::new(50, 0.1, 2.0).unwrap()
}

/// The water fits use the slower published ramp.
fn water_schedule() -> TrainingSchedule {
    TrainingSchedule::new(50, 0.1, 1.0).unwrap()
}

fn policy() -> ImputationPolicy {
    ImputationPolicy::new(0.0, 1000).unwrap()
}

pub fn run_experiment(name: &str, seed: u64, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let metrics = match name {
        "water-1d" => water_1d(seed, out)?,
        "additive-impute" => impute_protocol(gen_additive(10_000, 3, seed)?, seed)?,
        "coupled-impute" => impute_protocol(gen_coupled(10_000, seed)?, seed)?,
        "quartic-candidates" => quartic_candidates(seed)?,
        "uneven" => first_variable_rmse(gen_uneven(10_000, 5_000, seed)?, seed)?,
        "noisy" => {
            // sigma 0.05 is in raw target units; the stored target is
            // already scaled by its span of 3
            let clean = gen_additive(10_000, 3, seed)?;
            let sigma = 0.05 / clean.scaler().unwrap().span(Column::Target)?;
            let data = add_noise(&clean, sigma, seed.wrapping_add(1))?;
            first_variable_rmse(data, seed)?
        }
        "d15" => first_variable_rmse(gen_additive(10_000, 15, seed)?, seed)?,
        other => bail!("unknown experiment '{other}' (expected one of {EXPERIMENTS:?})"),
    };
    let path = out.join("metrics.txt");
    write_metrics(&path, &metrics)?;
    for (k, v) in &metrics {
        println!("{k} = {v}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// 1000 training points on the 10,001-row H2O potential-energy file,
/// evaluated over the whole set. Needs the external dataset; point
/// `HDMR_WATER_DATA` at it or place it at `data/h2o_pes.csv`.
fn water_1d(seed: u64, out: &Path) -> Result<Vec<(String, f64)>> {
    let path = std::env::var(WATER_ENV).unwrap_or_else(|_| WATER_DEFAULT.to_string());
    if !Path::new(&path).exists() {
        bail!(
            "water dataset not found at '{path}'; set {WATER_ENV} or place the file at \
             {WATER_DEFAULT}"
        );
    }
    let raw = load_csv(&path)?;
    let (data, scaler) = minmax_scale(&raw)?;
    let rows = sample_rows(data.n_rows(), 1000, seed.wrapping_add(3))?;
    let train_set = data.subset(&rows)?;

    let kernel = KernelParams::new(0.6, 1e-11).unwrap();
    let (model, report) = train(&train_set, one_d(data.dim())?, kernel, water_schedule())?;
    write_history(
        &out.join("history.csv"),
        &report.cycle_rmse,
        Some(scaler.span(Column::Target)?),
    )?;

    let pred = model.predict(data.x())?;
    let full = rmse(&pred, data.y())?;
    let span = scaler.span(Column::Target)?;
    Ok(vec![
        ("train_rmse".into(), report.rmse_train),
        ("full_rmse".into(), full),
        ("full_rmse_raw".into(), full * span),
    ])
}

/// The 400-row protocol: 100 training rows, 300 rows with one hole each
/// (100 per column), impute, then retrain on all 400 completed rows and
/// score on the full dataset.
fn impute_protocol(data: Dataset, seed: u64) -> Result<Vec<(String, f64)>> {
    let train_set = data.subset(&(0..100).collect::<Vec<_>>())?;
    let impute_set = data.subset(&(100..400).collect::<Vec<_>>())?;
    let (holed, truth) = inject_missing(&impute_set, 100, seed.wrapping_add(2))?;

    let (model, report) = train(&train_set, one_d(3)?, synthetic_kernel(), schedule())?;
    let pred = model.predict(data.x())?;
    let full_before = rmse(&pred, data.y())?;

    let outcome = impute_dataset(&model, &holed, &policy(), Some(&truth))?;
    let per_var = outcome.per_variable_rmse.context("truth supplied")?;

    // retrain on the 100 clean + 300 imputed rows
    let retrain_set = concat_rows(&[train_set, outcome.completed])?;
    let retrain_rmse = retrain_and_eval(&retrain_set, &data, "1d", synthetic_kernel(), schedule())?;

    let mut metrics = vec![
        ("train_rmse".into(), report.rmse_train),
        ("full_rmse".into(), full_before),
    ];
    for (var, err) in per_var {
        metrics.push((format!("imputation_rmse[x{}]", var + 1), err));
    }
    metrics.push(("retrain_rmse".into(), retrain_rmse));
    Ok(metrics)
}

/// Quartic inversion coverage: holes in the quartic variable only, the
/// threshold set to the measured model RMSE, success counted when the true
/// value sits within one grid step of some candidate.
fn quartic_candidates(seed: u64) -> Result<Vec<(String, f64)>> {
    let data = gen_quartic(10_000, seed)?;
    let train_set = data.subset(&(0..100).collect::<Vec<_>>())?;
    let impute_set = data.subset(&(100..200).collect::<Vec<_>>())?;
    let (holed, truth) = inject_missing_in_column(&impute_set, 0, 100, seed.wrapping_add(2))?;

    let (model, _) = train(&train_set, one_d(3)?, synthetic_kernel(), schedule())?;
    let pred = model.predict(data.x())?;
    let model_rmse = rmse(&pred, data.y())?;

    // the threshold must cover both the model error and the table's own
    // output-space quantization, or steep branches drop out of the
    // candidate sets when the fit error is very small
    let subintervals = 1000usize;
    let table = hdmr_gpr::imputation::build_lookup(&model, subintervals)?;
    let delta = model_rmse + table.max_adjacent_gap(0)? / 2.0;
    let outcome = impute_dataset(
        &model,
        &holed,
        &ImputationPolicy::new(delta, subintervals)?,
        Some(&truth),
    )?;
    let resolution = 1.0 / subintervals as f64;
    let truth_map: std::collections::BTreeMap<usize, f64> =
        truth.iter().map(|c| (c.row, c.value)).collect();
    let covered = outcome
        .cells
        .iter()
        .filter(|cell| {
            let x_true = truth_map[&cell.row.unwrap()];
            cell.candidates
                .iter()
                .any(|c| (c - x_true).abs() <= resolution)
        })
        .count();
    let coverage = covered as f64 / outcome.cells.len() as f64;
    Ok(vec![
        ("model_rmse".into(), model_rmse),
        ("delta".into(), delta),
        ("candidate_coverage".into(), coverage),
    ])
}

/// 200 training rows, 100 holes in the first variable, imputation RMSE on
/// that variable; the stress-case protocol.
fn first_variable_rmse(data: Dataset, seed: u64) -> Result<Vec<(String, f64)>> {
    let picked = sample_rows(data.n_rows(), 300, seed.wrapping_add(3))?;
    let train_set = data.subset(&picked[..200])?;
    let impute_set = data.subset(&picked[200..])?;
    let (holed, truth) = inject_missing_in_column(&impute_set, 0, 100, seed.wrapping_add(2))?;

    let dim = data.dim();
    let (model, report) = train(&train_set, one_d(dim)?, synthetic_kernel(), schedule())?;
    let outcome = impute_dataset(&model, &holed, &policy(), Some(&truth))?;
    let per_var = outcome.per_variable_rmse.context("truth supplied")?;
    Ok(vec![
        ("train_rmse".into(), report.rmse_train),
        ("imputation_rmse[x1]".into(), per_var[&0]),
    ])
}

/// Stacks datasets row-wise; they must agree on columns and scaler.
fn concat_rows(parts: &[Dataset]) -> Result<Dataset> {
    let total: usize = parts.iter().map(Dataset::n_rows).sum();
    let first = parts.first().context("concat: no parts")?;
    let dim = first.dim();
    let mut x = nalgebra::DMatrix::zeros(total, dim);
    let mut y = nalgebra::DVector::zeros(total);
    let mut offset = 0;
    for part in parts.iter() {
        if part.dim() != dim {
            bail!("concat: column counts differ");
        }
        for r in 0..part.n_rows() {
            for c in 0..dim {
                x[(offset + r, c)] = part.x()[(r, c)];
            }
            y[offset + r] = part.y()[r];
        }
        offset += part.n_rows();
    }
    Ok(Dataset::new(
        first.feature_names().to_vec(),
        first.target_name().to_string(),
        x,
        y,
        first.scaler().cloned(),
    )?)
}
