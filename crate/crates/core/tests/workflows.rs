//! Cross-module workflows through the public API: mixed-order fitting,
//! raw-unit file ingestion, and the save/impute/report loop.

use hdmr_gpr::datasets::{
    gen_coupled, inject_missing, load_csv, minmax_scale, save_csv, Column, Dataset,
};
use hdmr_gpr::gpr::KernelParams;
use hdmr_gpr::hdmr::{rmse, train, TrainingSchedule};
use hdmr_gpr::imputation::{impute_dataset, load_report, save_report, ImputationPolicy};
use hdmr_gpr::model_io::{load_model, save_model};
use hdmr_gpr::projection::{mixed, one_d, parse};

fn kernel() -> KernelParams {
    KernelParams::new(0.6, 1e-10).unwrap()
}

fn schedule() -> TrainingSchedule {
    TrainingSchedule::new(50, 0.1, 2.0).unwrap()
}

#[test]
fn mixed_order_components_capture_coupling() {
    let data = gen_coupled(2000, 31).unwrap();
    let train_set = data.subset(&(0..150).collect::<Vec<_>>()).unwrap();

    // six overlapping components converge much slower than three disjoint
    // ones; give the mixed family the cycles it needs
    let long = TrainingSchedule::new(400, 0.1, 2.0).unwrap();
    let (first_order, _) = train(&train_set, one_d(3).unwrap(), kernel(), schedule()).unwrap();
    let (mixed_order, _) = train(&train_set, mixed(3, &[1, 2]).unwrap(), kernel(), long).unwrap();

    let err =
        |m: &hdmr_gpr::hdmr::HdmrModel| rmse(&m.predict(data.x()).unwrap(), data.y()).unwrap();
    let err_1d = err(&first_order);
    let err_mixed = err(&mixed_order);
    // the pair components absorb the 0.2xy coupling the 1d family cannot
    assert!(
        err_mixed < 0.7 * err_1d,
        "mixed rmse {err_mixed} should clearly beat 1d {err_1d}"
    );
}

#[test]
fn raw_unit_file_round_trip_with_scaling() {
    // a file in raw units, energy-like target on [0, 20000]
    let dir = tempfile::tempdir().unwrap();
    let base = gen_coupled(600, 9).unwrap();
    let raw = Dataset::new(
        base.feature_names().to_vec(),
        "energy".to_string(),
        base.x() * 4.0,
        base.y() * 20_000.0,
        None,
    )
    .unwrap();
    let path = dir.path().join("raw.csv");
    save_csv(&raw, &path).unwrap();

    let loaded = load_csv(&path).unwrap();
    let (scaled, scaler) = minmax_scale(&loaded).unwrap();
    let (model, report) = train(&scaled, one_d(3).unwrap(), kernel(), schedule()).unwrap();

    // scaled units in [0, 1]; raw conversion through the stored span
    let span = scaler.span(Column::Target).unwrap();
    let raw_rmse = report.rmse_train * span;
    assert_eq!(report.rmse_train_raw.unwrap(), raw_rmse);
    assert!(report.rmse_train < 0.05);
    assert_eq!(model.scaler().unwrap(), &scaler);
}

#[test]
fn saved_model_imputes_like_the_original() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_coupled(500, 17).unwrap();
    let train_set = data.subset(&(0..100).collect::<Vec<_>>()).unwrap();
    let impute_set = data.subset(&(100..200).collect::<Vec<_>>()).unwrap();
    let (holed, truth) = inject_missing(&impute_set, 30, 5).unwrap();

    let matrices = parse("1d", 3).unwrap();
    let (model, _) = train(&train_set, matrices, kernel(), schedule()).unwrap();
    let model_path = dir.path().join("model.json");
    save_model(&model, &model_path).unwrap();
    let reloaded = load_model(&model_path).unwrap();

    let policy = ImputationPolicy::new(0.0, 500).unwrap();
    let out_a = impute_dataset(&model, &holed, &policy, Some(&truth)).unwrap();
    let out_b = impute_dataset(&reloaded, &holed, &policy, Some(&truth)).unwrap();
    assert_eq!(out_a.cells, out_b.cells);
    assert_eq!(out_a.completed, out_b.completed);

    // the report file carries the full candidate sets through a round trip
    let report_path = dir.path().join("report.csv");
    save_report(&out_a.cells, holed.feature_names(), &report_path).unwrap();
    let cells = load_report(&report_path, holed.feature_names()).unwrap();
    assert_eq!(cells, out_a.cells);
    assert_eq!(cells.len(), 90);
}
