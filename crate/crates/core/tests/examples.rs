//! Every runnable example, executed at small size.

#[allow(dead_code)]
#[path = "../examples/generate_data.rs"]
mod generate_data;
#[allow(dead_code)]
#[path = "../examples/build_reservoir.rs"]
mod build_reservoir;
#[allow(dead_code)]
#[path = "../examples/train_readout.rs"]
mod train_readout;
#[allow(dead_code)]
#[path = "../examples/infer_unseen.rs"]
mod infer_unseen;
#[allow(dead_code)]
#[path = "../examples/error_metrics.rs"]
mod error_metrics;
#[allow(dead_code)]
#[path = "../examples/ensemble_sweep.rs"]
mod ensemble_sweep;
#[allow(dead_code)]
#[path = "../examples/histogram.rs"]
mod histogram;

#[test]
fn generate_data_runs() {
    let dir = tempfile::tempdir().unwrap();
    generate_data::run("B", Some(dir.path())).unwrap();
    assert!(dir.path().join("reference_torus.csv").exists());
}

#[test]
fn build_reservoir_runs() {
    build_reservoir::run("A", 3, 200).unwrap();
}

#[test]
fn train_readout_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let model = train_readout::run("A", 1, 40, Some(&path)).unwrap();
    assert_eq!(model.w_out.nrows(), 41);
    assert!(path.exists());
}

#[test]
fn infer_unseen_runs() {
    infer_unseen::run("A", 0, 40, 300).unwrap();
}

#[test]
fn error_metrics_runs() {
    error_metrics::run("A").unwrap();
}

#[test]
fn ensemble_and_histogram_run() {
    let dir = tempfile::tempdir().unwrap();
    let records = ensemble_sweep::run("A", 3, 30, 200, dir.path()).unwrap();
    assert_eq!(records.len(), 3);
    histogram::run(&dir.path().join("report.csv")).unwrap();
}
