//! The five subcommands. Each one is a plain function from a parsed config
//! to files in the output directory; all randomness is derived from the run
//! seed, so identical config + seed means identical output bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DVector;

use hdmr_gpr::datasets::{
    self, add_noise, apply_scaler, gen_additive, gen_coupled, gen_power, gen_quartic, gen_uneven,
    inject_missing, load_csv, minmax_scale, sample_rows, save_csv, Dataset,
};
use hdmr_gpr::gpr::KernelParams;
use hdmr_gpr::hdmr::{rmse, train, HdmrModel, TrainingSchedule};
use hdmr_gpr::imputation::{impute_dataset, load_report, save_report, ImputationPolicy};
use hdmr_gpr::model_io::{load_model, save_model};
use hdmr_gpr::projection;

use crate::config::RunConfig;

/// Seeds for the independent random streams, derived from the run seed.
pub fn generator_seed(seed: u64) -> u64 {
    seed
}
fn noise_seed(seed: u64) -> u64 {
    seed.wrapping_add(1)
}
fn injection_seed(seed: u64) -> u64 {
    seed.wrapping_add(2)
}
fn split_seed(seed: u64) -> u64 {
    seed.wrapping_add(3)
}

/// Builds the dataset a command operates on. Generated data come out
/// scaled; file data are scaled on request, preferring the model's stored
/// scaler (training-time ranges) over ranges recomputed from the file.
pub fn prepare_data(config: &RunConfig, seed: u64, model: Option<&HdmrModel>) -> Result<Dataset> {
    let d = &config.data;
    let data = if let Some(path) = &d.path {
        let raw = load_csv(path)?;
        if d.scale {
            match model.and_then(HdmrModel::scaler) {
                Some(scaler) => apply_scaler(&raw, scaler)?,
                None => minmax_scale(&raw)?.0,
            }
        } else {
            raw
        }
    } else {
        let gen_seed = generator_seed(seed);
        match d.generator.as_deref().expect("validated") {
            "additive" => gen_additive(
                d.n.expect("validated"),
                d.dim
                    .context("[data]: generator 'additive' requires `dim`")?,
                gen_seed,
            )?,
            "power" => gen_power(d.n.expect("validated"), gen_seed)?,
            "coupled" => gen_coupled(d.n.expect("validated"), gen_seed)?,
            "quartic" => gen_quartic(d.n.expect("validated"), gen_seed)?,
            "uneven" => gen_uneven(
                d.n_normal.expect("validated"),
                d.n_uniform.expect("validated"),
                gen_seed,
            )?,
            _ => unreachable!("validated"),
        }
    };
    match d.noise_sigma {
        Some(sigma) => Ok(add_noise(&data, sigma, noise_seed(seed))?),
        None => Ok(data),
    }
}

fn model_params(config: &RunConfig) -> Result<(KernelParams, TrainingSchedule)> {
    let k = config.kernel()?;
    let s = config.schedule()?;
    let kernel = KernelParams::new(k.length_scale, k.noise_variance)
        .context("[kernel]: invalid parameters")?;
    let schedule = TrainingSchedule::new(s.cycles, s.scale_start, s.scale_rate)
        .context("[schedule]: invalid parameters")?;
    Ok((kernel, schedule))
}

fn policy(config: &RunConfig) -> Result<ImputationPolicy> {
    let i = config.imputation()?;
    ImputationPolicy::new(i.delta, i.subintervals).context("[imputation]: invalid parameters")
}

pub fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

/// Writes `key = value` lines; the stable format every run emits metrics in.
pub fn write_metrics(path: &Path, entries: &[(String, f64)]) -> Result<()> {
    let mut text = String::new();
    for (key, value) in entries {
        writeln!(text, "{key} = {value}").unwrap();
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_history(path: &Path, report_cycles: &[f64], raw_span: Option<f64>) -> Result<()> {
    let mut text = String::new();
    match raw_span {
        Some(span) => {
            writeln!(text, "cycle,rmse,rmse_raw").unwrap();
            for (c, r) in report_cycles.iter().enumerate() {
                writeln!(text, "{c},{r},{}", r * span).unwrap();
            }
        }
        None => {
            writeln!(text, "cycle,rmse").unwrap();
            for (c, r) in report_cycles.iter().enumerate() {
                writeln!(text, "{c},{r}").unwrap();
            }
        }
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn cmd_gen(config: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    if config.data.generator.is_none() {
        bail!("[data]: `gen` needs a generator, not a file path");
    }
    ensure_out_dir(out)?;
    let data = prepare_data(config, seed, None)?;
    let (data, truth) = match &config.missing {
        Some(m) => inject_missing(&data, m.per_column, injection_seed(seed))?,
        None => (data, Vec::new()),
    };
    let data_path = out.join("dataset.csv");
    save_csv(&data, &data_path)?;
    println!("wrote {} ({} rows)", data_path.display(), data.n_rows());
    if !truth.is_empty() {
        let truth_path = out.join("truth.csv");
        datasets::save_ground_truth(&truth, data.feature_names(), &truth_path)?;
        println!(
            "wrote {} ({} withheld cells)",
            truth_path.display(),
            truth.len()
        );
    }
    Ok(())
}

pub fn cmd_fit(config: &RunConfig, seed: u64, out: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let data = prepare_data(config, seed, None)?;
    let train_set = match config.run.train_points {
        Some(k) if k < data.n_rows() => {
            let rows = sample_rows(data.n_rows(), k, split_seed(seed))?;
            data.subset(&rows)?
        }
        _ => data.clone(),
    };
    let matrices = projection::parse(&config.matrices()?.spec, train_set.dim())
        .context("[matrices]: invalid spec")?;
    let (kernel, schedule) = model_params(config)?;
    let (model, report) = train(&train_set, matrices, kernel, schedule)?;

    save_model(&model, out.join("model.json"))?;
    save_csv(&train_set, out.join("train_data.csv"))?;
    let span = model
        .scaler()
        .map(|s| s.span(datasets::Column::Target))
        .transpose()?;
    write_history(&out.join("history.csv"), &report.cycle_rmse, span)?;

    let mut metrics = vec![("train_rmse".to_string(), report.rmse_train)];
    if let Some(raw) = report.rmse_train_raw {
        metrics.push(("train_rmse_raw".to_string(), raw));
    }
    for (label, rms) in &report.component_rms {
        metrics.push((format!("component_rms[{label}]"), *rms));
    }
    write_metrics(&out.join("metrics.txt"), &metrics)?;
    println!(
        "trained {} components in {} cycles, train rmse {}",
        model.components().len(),
        schedule.cycles(),
        report.rmse_train
    );
    Ok(())
}

pub fn cmd_predict(config: &RunConfig, seed: u64, out: &Path, model_path: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let model = load_model(model_path)?;
    let data = prepare_data(config, seed, Some(&model))?;
    if !data.is_complete() {
        bail!("predict needs complete input rows; run `impute` first");
    }
    let pred = model.predict(data.x())?;
    let std = if config.run.with_std {
        Some(model.predict_std(data.x())?)
    } else {
        None
    };

    let mut text = String::new();
    match &std {
        Some(_) => writeln!(text, "true,predicted,std").unwrap(),
        None => writeln!(text, "true,predicted").unwrap(),
    }
    for i in 0..data.n_rows() {
        match &std {
            Some(s) => writeln!(text, "{},{},{}", data.y()[i], pred[i], s[i]).unwrap(),
            None => writeln!(text, "{},{}", data.y()[i], pred[i]).unwrap(),
        }
    }
    let path = out.join("predictions.csv");
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {} ({} rows)", path.display(), data.n_rows());
    Ok(())
}

pub fn cmd_impute(config: &RunConfig, seed: u64, out: &Path, model_path: &Path) -> Result<()> {
    ensure_out_dir(out)?;
    let model = load_model(model_path)?;
    let data = prepare_data(config, seed, Some(&model))?;
    let outcome = impute_dataset(&model, &data, &policy(config)?, None)?;

    let completed_path = out.join("completed.csv");
    save_csv(&outcome.completed, &completed_path)?;
    let report_path = out.join("impute_report.csv");
    save_report(
        &outcome.cells,
        outcome.completed.feature_names(),
        &report_path,
    )?;
    println!(
        "imputed {} cells; wrote {} and {}",
        outcome.cells.len(),
        completed_path.display(),
        report_path.display()
    );
    Ok(())
}

pub fn cmd_eval(
    config: &RunConfig,
    seed: u64,
    out: &Path,
    model_path: Option<&Path>,
) -> Result<()> {
    ensure_out_dir(out)?;
    let model = model_path.map(load_model).transpose()?;

    let eval_data = match &config.run.eval_path {
        Some(path) => {
            let raw = load_csv(path)?;
            if config.data.scale {
                match model.as_ref().and_then(|m| m.scaler()) {
                    Some(scaler) => apply_scaler(&raw, scaler)?,
                    None => minmax_scale(&raw)?.0,
                }
            } else {
                raw
            }
        }
        None => prepare_data(config, seed, model.as_ref())?,
    };

    let mut metrics: Vec<(String, f64)> = Vec::new();
    if let Some(model) = &model {
        if !eval_data.is_complete() {
            bail!("eval set has missing entries; evaluate on complete data");
        }
        let pred = model.predict(eval_data.x())?;
        let err = rmse(&pred, eval_data.y())?;
        metrics.push(("rmse_eval".to_string(), err));
        if let Some(scaler) = model.scaler() {
            metrics.push((
                "rmse_eval_raw".to_string(),
                err * scaler.span(datasets::Column::Target)?,
            ));
        }
    }

    match (&config.run.truth_path, &config.run.report_path) {
        (Some(truth_path), Some(report_path)) => {
            let names = eval_data.feature_names();
            let truth = datasets::load_ground_truth(truth_path, names)?;
            let cells = load_report(report_path, names)?;
            let truth_map: std::collections::BTreeMap<(usize, usize), f64> =
                truth.iter().map(|c| ((c.row, c.col), c.value)).collect();
            let mut per_var: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
            for cell in &cells {
                let row = cell.row.context("report cell without a row index")?;
                let key = (row, cell.variable_index);
                let true_value = truth_map.get(&key).with_context(|| {
                    format!(
                        "ground truth does not cover row {row} column {}",
                        names[cell.variable_index]
                    )
                })?;
                per_var
                    .entry(cell.variable_index)
                    .or_default()
                    .push(cell.chosen - true_value);
            }
            for (var, errs) in per_var {
                let pred = DVector::from_vec(errs);
                let zero = DVector::zeros(pred.len());
                metrics.push((
                    format!("imputation_rmse[{}]", names[var]),
                    rmse(&pred, &zero)?,
                ));
            }
        }
        (None, None) => {}
        _ => bail!("[run]: `truth_path` and `report_path` must be set together"),
    }

    if metrics.is_empty() {
        bail!("eval: nothing to do; pass --model and/or set truth_path + report_path");
    }
    let path = out.join("metrics.txt");
    write_metrics(&path, &metrics)?;
    for (k, v) in &metrics {
        println!("{k} = {v}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Retrains on a completed dataset and reports RMSE over a reference set;
/// shared by the imputation experiments.
pub fn retrain_and_eval(
    completed: &Dataset,
    reference: &Dataset,
    spec: &str,
    kernel: KernelParams,
    schedule: TrainingSchedule,
) -> Result<f64> {
    let matrices = projection::parse(spec, completed.dim())?;
    let (model, _) = train(completed, matrices, kernel, schedule)?;
    let pred = model.predict(reference.x())?;
    Ok(rmse(&pred, reference.y())?)
}

/// Output directory resolution: flag wins over config.
pub fn resolve_out(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.unwrap_or_else(|| config.run.out.clone())
}
