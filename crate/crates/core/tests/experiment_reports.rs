use newtonreg::experiment::{
    self, emit_report, read_report_json, read_rows_csv, run_example1, run_example2, ExperimentReport, ReportFormat, CSV_COLUMNS,
};
use newtonreg::{AlphaSchedule, FilterSpec};

fn small_report() -> ExperimentReport {
    run_example1(1.1, &[1e-2, 1e-3], &[3, 4, 5], FilterSpec::Landweber, AlphaSchedule::geometric(1.0, 0.5).unwrap()).unwrap()
}

fn strip_runtime(mut r: ExperimentReport) -> ExperimentReport {
    for row in &mut r.rows {
        row.runtime_ms = 0.0;
    }
    r
}

#[test]
fn reports_are_deterministic() {
    assert_eq!(strip_runtime(small_report()), strip_runtime(small_report()));
    let a = run_example2(1.1, &[1e-2], &[9]).unwrap();
    let b = run_example2(1.1, &[1e-2], &[9]).unwrap();
    assert_eq!(strip_runtime(a), strip_runtime(b));
}

#[test]
fn rows_follow_input_order_and_ratio_is_consistent() {
    let r = small_report();
    let keys: Vec<(f64, u64)> = r.rows.iter().map(|row| (row.delta, row.seed)).collect();
    assert_eq!(keys, vec![(1e-2, 3), (1e-2, 4), (1e-2, 5), (1e-3, 3), (1e-3, 4), (1e-3, 5)]);
    for row in &r.rows {
        assert!((row.ratio * row.delta.sqrt() - row.error).abs() <= 1e-12 * row.error);
    }
    assert!(r.failures.is_empty());
    assert!(r.details.iter().all(|d| d.discrepancy_bracket));
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let r = small_report();
    emit_report(&r, ReportFormat::Csv, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(text.lines().count(), r.rows.len() + 1);
    assert_eq!(read_rows_csv(&path).unwrap(), r.rows);
}

#[test]
fn single_row_ratio_recomputes_on_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    let mut r = small_report();
    r.rows.truncate(1);
    emit_report(&r, ReportFormat::Csv, &path).unwrap();
    let back = read_rows_csv(&path).unwrap();
    assert_eq!(back.len(), 1);
    assert!((back[0].ratio - back[0].error / back[0].delta.sqrt()).abs() <= 1e-12 * back[0].ratio);
}

#[test]
fn json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let r = small_report();
    emit_report(&r, ReportFormat::Json, &path).unwrap();
    assert_eq!(read_report_json(&path).unwrap(), r);
}

#[test]
fn empty_report_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_report(&ExperimentReport::empty("example1"), ReportFormat::Csv, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));
    assert!(read_rows_csv(&path).unwrap().is_empty());
}

#[test]
fn io_errors_carry_the_path() {
    let err = emit_report(&ExperimentReport::empty("x"), ReportFormat::Csv, std::path::Path::new("/nonexistent/dir/out.csv")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/out.csv"), "{err}");
}

#[test]
fn noise_free_rows_use_the_floor() {
    let r = run_example2(1.1, &[0.0], &[0]).unwrap();
    let d = &r.details[0];
    assert!(!d.discrepancy_bracket);
    assert!(r.rows[0].error < d.initial_error);
    assert!(r.rows[0].ratio.is_infinite());
}

#[test]
fn aggregates_use_medians() {
    let r = small_report();
    let agg = r.aggregate(1e-2, 1.1).unwrap();
    let errs: Vec<f64> = r.rows.iter().filter(|x| x.delta == 1e-2).map(|x| x.error).collect();
    assert_eq!(agg.runs, 3);
    assert_eq!(agg.median_error, experiment::median(&errs));
    assert!(r.slope(1.1).is_some());
}
