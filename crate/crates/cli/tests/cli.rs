//! End-to-end checks of the `hdmr` binary: determinism of artifacts,
//! config diagnostics, and the fit -> predict -> impute -> eval loop.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hdmr(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdmr"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const BASE_CONFIG: &str = r#"
[data]
generator = "additive"
n = 400
dim = 3

[matrices]
spec = "1d"

[kernel]
length_scale = 0.6
noise_variance = 1e-10

[schedule]
cycles = 25
scale_start = 0.1
scale_rate = 2.0

[imputation]
delta = 0.0
subintervals = 500

[run]
seed = 11
train_points = 100
"#;

fn metric(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} not in {}", path.display()))
        .to_string()
}

#[test]
fn generation_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), BASE_CONFIG).unwrap();
    assert_ok(&hdmr(
        &["gen", "--config", "run.toml", "--out", "a"],
        dir.path(),
    ));
    assert_ok(&hdmr(
        &["gen", "--config", "run.toml", "--out", "b"],
        dir.path(),
    ));
    let a = fs::read(dir.path().join("a/dataset.csv")).unwrap();
    let b = fs::read(dir.path().join("b/dataset.csv")).unwrap();
    assert_eq!(a, b);

    // a different seed changes the bytes
    assert_ok(&hdmr(
        &["gen", "--config", "run.toml", "--out", "c", "--seed", "12"],
        dir.path(),
    ));
    let c = fs::read(dir.path().join("c/dataset.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn fit_predict_eval_loop_reproduces_training_rmse() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), BASE_CONFIG).unwrap();
    assert_ok(&hdmr(
        &["fit", "--config", "run.toml", "--out", "fit"],
        dir.path(),
    ));
    let train_rmse = metric(&dir.path().join("fit/metrics.txt"), "train_rmse");

    // deterministic refit produces identical metrics bytes
    assert_ok(&hdmr(
        &["fit", "--config", "run.toml", "--out", "fit2"],
        dir.path(),
    ));
    assert_eq!(
        fs::read(dir.path().join("fit/metrics.txt")).unwrap(),
        fs::read(dir.path().join("fit2/metrics.txt")).unwrap()
    );

    // evaluating the model on its own training file reports the same rmse
    let eval_config = r#"
[data]
path = "fit/train_data.csv"

[run]
seed = 11
"#;
    fs::write(dir.path().join("eval.toml"), eval_config).unwrap();
    assert_ok(&hdmr(
        &[
            "eval",
            "--config",
            "eval.toml",
            "--model",
            "fit/model.json",
            "--out",
            "eval",
        ],
        dir.path(),
    ));
    let rmse_eval = metric(&dir.path().join("eval/metrics.txt"), "rmse_eval");
    assert_eq!(train_rmse, rmse_eval);

    // predictions carry a non-negative std column on request
    let predict_config = r#"
[data]
path = "fit/train_data.csv"

[run]
seed = 11
with_std = true
"#;
    fs::write(dir.path().join("predict.toml"), predict_config).unwrap();
    assert_ok(&hdmr(
        &[
            "predict",
            "--config",
            "predict.toml",
            "--model",
            "fit/model.json",
            "--out",
            "pred",
        ],
        dir.path(),
    ));
    let preds = fs::read_to_string(dir.path().join("pred/predictions.csv")).unwrap();
    let mut lines = preds.lines();
    assert_eq!(lines.next().unwrap(), "true,predicted,std");
    let mut rows = 0;
    for line in lines {
        let std: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(std >= 0.0);
        rows += 1;
    }
    assert_eq!(rows, 100);
}

#[test]
fn impute_round_trip_and_passthrough() {
    let dir = tempfile::tempdir().unwrap();
    let gen_config = BASE_CONFIG.replace("[matrices]", "[missing]\nper_column = 20\n\n[matrices]");
    fs::write(dir.path().join("holed.toml"), &gen_config).unwrap();
    fs::write(dir.path().join("run.toml"), BASE_CONFIG).unwrap();

    assert_ok(&hdmr(
        &["gen", "--config", "holed.toml", "--out", "data"],
        dir.path(),
    ));
    assert_ok(&hdmr(
        &["gen", "--config", "run.toml", "--out", "clean"],
        dir.path(),
    ));
    assert_ok(&hdmr(
        &["fit", "--config", "run.toml", "--out", "fit"],
        dir.path(),
    ));

    let impute_config = r#"
[data]
path = "data/dataset.csv"

[imputation]
delta = 0.0
subintervals = 500

[run]
seed = 11
"#;
    fs::write(dir.path().join("impute.toml"), impute_config).unwrap();
    assert_ok(&hdmr(
        &[
            "impute",
            "--config",
            "impute.toml",
            "--model",
            "fit/model.json",
            "--out",
            "imp",
        ],
        dir.path(),
    ));

    // one report record per hole
    let report = fs::read_to_string(dir.path().join("imp/impute_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 60);

    // scoring the report against the withheld truth gives small errors
    let eval_config = r#"
[data]
path = "imp/completed.csv"

[run]
seed = 11
truth_path = "data/truth.csv"
report_path = "imp/impute_report.csv"
"#;
    fs::write(dir.path().join("score.toml"), eval_config).unwrap();
    assert_ok(&hdmr(
        &["eval", "--config", "score.toml", "--out", "score"],
        dir.path(),
    ));
    let text = fs::read_to_string(dir.path().join("score/metrics.txt")).unwrap();
    for var in ["x1", "x2", "x3"] {
        let value: f64 = text
            .lines()
            .find_map(|l| l.strip_prefix(&format!("imputation_rmse[{var}] = ")))
            .unwrap()
            .parse()
            .unwrap();
        assert!(value < 0.05, "{var} imputation rmse {value}");
    }

    // a hole-free file passes through byte-identically
    let passthrough_config = r#"
[data]
path = "clean/dataset.csv"

[imputation]
delta = 0.0
subintervals = 500

[run]
seed = 11
"#;
    fs::write(dir.path().join("pass.toml"), passthrough_config).unwrap();
    assert_ok(&hdmr(
        &[
            "impute",
            "--config",
            "pass.toml",
            "--model",
            "fit/model.json",
            "--out",
            "pass",
        ],
        dir.path(),
    ));
    assert_eq!(
        fs::read(dir.path().join("clean/dataset.csv")).unwrap(),
        fs::read(dir.path().join("pass/completed.csv")).unwrap()
    );
    let report = fs::read_to_string(dir.path().join("pass/impute_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1);
}

#[test]
fn config_errors_name_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();

    let typo = BASE_CONFIG.replace("length_scale", "lenght_scale");
    fs::write(dir.path().join("typo.toml"), typo).unwrap();
    let out = hdmr(&["fit", "--config", "typo.toml", "--out", "x"], dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("lenght_scale"), "stderr: {stderr}");

    let bad_value = BASE_CONFIG.replace("length_scale = 0.6", "length_scale = -1.0");
    fs::write(dir.path().join("bad.toml"), bad_value).unwrap();
    let out = hdmr(&["fit", "--config", "bad.toml", "--out", "x"], dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("length_scale"), "stderr: {stderr}");

    let out = hdmr(
        &["fit", "--config", "nosuch.toml", "--out", "x"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuch.toml"));

    let out = hdmr(&["eval", "--experiment", "bogus", "--out", "x"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    // a dropped section is named in the diagnostic
    let head = BASE_CONFIG.split("[kernel]").next().unwrap();
    let tail_start = BASE_CONFIG.find("[schedule]").unwrap();
    let no_kernel = format!("{head}{}", &BASE_CONFIG[tail_start..]);
    fs::write(dir.path().join("nokernel.toml"), no_kernel).unwrap();
    let out = hdmr(
        &["fit", "--config", "nokernel.toml", "--out", "x"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[kernel]"));
}

#[test]
fn experiment_metrics_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    // small, fast experiment: quartic candidate coverage
    for out in ["e1", "e2"] {
        assert_ok(&hdmr(
            &[
                "eval",
                "--experiment",
                "quartic-candidates",
                "--seed",
                "5",
                "--out",
                out,
            ],
            dir.path(),
        ));
    }
    assert_eq!(
        fs::read(dir.path().join("e1/metrics.txt")).unwrap(),
        fs::read(dir.path().join("e2/metrics.txt")).unwrap()
    );
}
