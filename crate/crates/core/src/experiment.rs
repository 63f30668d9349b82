//! Noisy-data experiments on the reference boundary value problem.
//!
//! Each `(δ, seed)` pair is one independent run: synthesize exact data from
//! the true coefficient, add seeded Gaussian noise rescaled to norm exactly
//! `δ`, iterate with the discrepancy principle and record the error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvp::{self, BvpSpec, GridFunction};
use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::newton::{self, FilterPath, IterationTrace, SolveConfig, Termination};
use crate::schedules::AlphaSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub seed: u64,
    pub target_delta: f64,
}

/// `u + δ ξ/‖ξ‖` with `ξ` i.i.d. standard normal from a ChaCha8 stream
/// seeded by `model.seed`; the norm is the grid-weighted one.
pub fn gen_noise(u: &GridFunction, model: NoiseModel) -> Result<GridFunction> {
    if !(model.target_delta >= 0.0 && model.target_delta.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise level must be nonnegative, got {}", model.target_delta)));
    }
    if model.target_delta == 0.0 {
        return Ok(u.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let xi = loop {
        let xi = GridFunction((0..u.m()).map(|_| StandardNormal.sample(&mut rng)).collect());
        if xi.norm() > 0.0 {
            break xi;
        }
    };
    let scale = model.target_delta / xi.norm();
    Ok(GridFunction(u.iter().zip(xi.iter()).map(|(a, e)| a + scale * e).collect()))
}

/// Which initial guess the run starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    /// `c0 = 1 + t`
    Smooth,
    /// `c0 = 2 - t`
    Rough,
}

impl Example {
    pub fn name(&self) -> &'static str {
        match self {
            Example::Smooth => "example1",
            Example::Rough => "example2",
        }
    }

    pub fn initial_guess(&self, m: usize) -> GridFunction {
        match self {
            Example::Smooth => bvp::smooth_initial_guess(m),
            Example::Rough => bvp::rough_initial_guess(m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub example: Example,
    pub taus: Vec<f64>,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub filter: FilterSpec,
    pub schedule: AlphaSchedule,
    pub m: usize,
    pub n_max: usize,
    pub path: FilterPath,
}

impl ExperimentConfig {
    pub fn new(example: Example, tau: f64, deltas: Vec<f64>, seeds: Vec<u64>) -> Self {
        Self {
            example,
            taus: vec![tau],
            deltas,
            seeds,
            filter: FilterSpec::Landweber,
            schedule: AlphaSchedule::geometric(1.0, 0.5).expect("valid default schedule"),
            m: BvpSpec::DEFAULT_M,
            n_max: SolveConfig::DEFAULT_N_MAX,
            path: FilterPath::Auto,
        }
    }
}

/// One CSV line of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub delta: f64,
    pub tau: f64,
    pub filter: String,
    pub schedule: String,
    pub seed: u64,
    pub n_delta: usize,
    pub error: f64,
    /// `error / δ^{1/2}`
    pub ratio: f64,
    pub runtime_ms: f64,
}

pub const CSV_COLUMNS: [&str; 9] = [
    "delta", "tau", "filter", "schedule", "seed", "n_delta", "error", "ratio", "runtime_ms",
];

/// Per-run data that does not fit the flat CSV layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowDetail {
    pub delta: f64,
    pub tau: f64,
    pub seed: u64,
    pub termination: Termination,
    pub residuals: Vec<f64>,
    pub discrepancy_bracket: bool,
    pub initial_error: f64,
    pub final_iterate: Vec<f64>,
    pub scaling_estimate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub delta: f64,
    pub tau: f64,
    pub seed: u64,
    pub step: Option<usize>,
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub delta: f64,
    pub tau: f64,
    pub runs: usize,
    pub median_n_delta: f64,
    pub median_error: f64,
    pub median_ratio: f64,
}

/// Least-squares slope of `ln(median error)` against `ln δ` at fixed τ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub tau: f64,
    pub slope: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub example: String,
    pub rows: Vec<ExperimentRow>,
    pub details: Vec<RowDetail>,
    pub failures: Vec<RowFailure>,
    pub aggregates: Vec<Aggregate>,
    pub slopes: Vec<SlopeFit>,
}

impl ExperimentReport {
    pub fn empty(example: &str) -> Self {
        Self {
            example: example.to_string(),
            rows: Vec::new(),
            details: Vec::new(),
            failures: Vec::new(),
            aggregates: Vec::new(),
            slopes: Vec::new(),
        }
    }

    pub fn aggregate(&self, delta: f64, tau: f64) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.delta == delta && a.tau == tau)
    }

    pub fn slope(&self, tau: f64) -> Option<f64> {
        self.slopes.iter().find(|s| s.tau == tau).map(|s| s.slope)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

struct RunOutcome {
    row: ExperimentRow,
    detail: RowDetail,
}

fn run_single(
    cfg: &ExperimentConfig,
    spec: &BvpSpec,
    exact_data: &GridFunction,
    truth: &GridFunction,
    tau: f64,
    delta: f64,
    seed: u64,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let y = gen_noise(exact_data, NoiseModel { seed, target_delta: delta })?;
    let x0 = cfg.example.initial_guess(cfg.m);
    let mut solve_cfg = SolveConfig::new(cfg.filter, cfg.schedule.clone(), tau, delta, x0.0.clone())
        .with_truth(truth.0.clone())
        .with_n_max(cfg.n_max)
        .with_path(cfg.path);
    solve_cfg.scaling = newton::ScalingCheck::Warn;
    let trace: IterationTrace = newton::solve(spec, &y, &solve_cfg)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    let error = trace.last().error_norm.expect("truth supplied");
    let row = ExperimentRow {
        delta,
        tau,
        filter: cfg.filter.to_string(),
        schedule: cfg.schedule.to_string(),
        seed,
        n_delta: trace.stopping_index(),
        error,
        ratio: error / delta.sqrt(),
        runtime_ms,
    };
    let detail = RowDetail {
        delta,
        tau,
        seed,
        termination: trace.termination,
        residuals: trace.residuals(),
        discrepancy_bracket: delta > 0.0 && trace.satisfies_discrepancy_bracket(),
        initial_error: trace.records[0].error_norm.expect("truth supplied"),
        final_iterate: trace.final_iterate().to_vec(),
        scaling_estimate: trace.scaling.as_ref().map(|s| s.norm_estimate),
    };
    Ok(RunOutcome { row, detail })
}

/// Runs every `(τ, δ, seed)` combination. Rows come out in input order
/// regardless of scheduling; solver failures are recorded and skipped.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if let Some(t) = cfg.taus.iter().find(|t| !t.is_finite() || **t <= 1.0) {
        return Err(Error::InvalidConfig(format!("τ must exceed 1, got {t}")));
    }
    if let Some(d) = cfg.deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::InvalidConfig(format!("δ must be nonnegative, got {d}")));
    }
    let spec = bvp::reference_spec(cfg.m)?;
    let truth = bvp::reference_truth(cfg.m);
    let exact = spec.forward(&truth)?;

    let jobs: Vec<(f64, f64, u64)> = cfg
        .taus
        .iter()
        .flat_map(|&tau| cfg.deltas.iter().flat_map(move |&d| cfg.seeds.iter().map(move |&s| (tau, d, s))))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(tau, delta, seed)| (tau, delta, seed, run_single(cfg, &spec, &exact, &truth, tau, delta, seed)))
        .collect();

    let mut report = ExperimentReport::empty(cfg.example.name());
    for (tau, delta, seed, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                report.rows.push(o.row);
                report.details.push(o.detail);
            }
            Err(e) => report.failures.push(RowFailure {
                delta,
                tau,
                seed,
                step: e.step(),
                kind: e.kind().to_string(),
                message: e.to_string(),
            }),
        }
    }

    for &tau in &cfg.taus {
        let mut points = Vec::new();
        for &delta in &cfg.deltas {
            let rows: Vec<&ExperimentRow> = report.rows.iter().filter(|r| r.tau == tau && r.delta == delta).collect();
            if rows.is_empty() {
                continue;
            }
            let agg = Aggregate {
                delta,
                tau,
                runs: rows.len(),
                median_n_delta: median(&rows.iter().map(|r| r.n_delta as f64).collect::<Vec<_>>()),
                median_error: median(&rows.iter().map(|r| r.error).collect::<Vec<_>>()),
                median_ratio: median(&rows.iter().map(|r| r.ratio).collect::<Vec<_>>()),
            };
            if delta > 0.0 && agg.median_error > 0.0 {
                points.push((delta.ln(), agg.median_error.ln()));
            }
            report.aggregates.push(agg);
        }
        if points.len() >= 2 {
            report.slopes.push(SlopeFit {
                tau,
                slope: fit_slope(&points),
                points: points.len(),
            });
        }
    }
    Ok(report)
}

/// Smooth initial guess `c0 = 1+t`, m = 100.
pub fn run_example1(
    tau: f64,
    deltas: &[f64],
    seeds: &[u64],
    filter: FilterSpec,
    schedule: AlphaSchedule,
) -> Result<ExperimentReport> {
    let mut cfg = ExperimentConfig::new(Example::Smooth, tau, deltas.to_vec(), seeds.to_vec());
    cfg.filter = filter;
    cfg.schedule = schedule;
    run_experiment(&cfg)
}

/// Rough initial guess `c0 = 2-t`, Landweber, `α_n = 2^{-n}`, m = 100.
pub fn run_example2(tau: f64, deltas: &[f64], seeds: &[u64]) -> Result<ExperimentReport> {
    run_experiment(&ExperimentConfig::new(Example::Rough, tau, deltas.to_vec(), seeds.to_vec()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

pub fn write_rows_csv<W: Write>(rows: &[ExperimentRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report<W: Write>(report: &ExperimentReport, format: ReportFormat, mut out: W) -> Result<()> {
    let path = Path::new("<stream>");
    match format {
        ReportFormat::Csv => write_rows_csv(&report.rows, out).map_err(|source| Error::Csv {
            path: path.into(),
            source,
        }),
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report).map_err(|source| Error::Json {
                path: path.into(),
                source,
            })?;
            out.write_all(b"\n").map_err(|source| Error::Io {
                path: path.into(),
                source,
            })
        }
    }
}

/// Writes the report to `path`. CSV carries the rows only; JSON carries everything.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    match format {
        ReportFormat::Csv => write_rows_csv(&report.rows, &mut out).map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?,
        ReportFormat::Json => serde_json::to_writer_pretty(&mut out, report).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })?,
    }
    out.flush().map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<ExperimentRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.into(),
        source,
    })?;
    let headers = r.headers().map_err(|source| Error::Csv {
        path: path.into(),
        source,
    })?;
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::InvalidConfig(format!("{}: unexpected CSV header", path.display())));
    }
    r.deserialize()
        .collect::<csv::Result<Vec<ExperimentRow>>>()
        .map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })
}

pub fn read_report_json(path: &Path) -> Result<ExperimentReport> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

/// `node,c_true,c_init,c_final` for plotting one run.
pub fn write_solution_csv(path: &Path, truth: &[f64], init: &[f64], computed: &[f64]) -> Result<()> {
    let wrap = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(["node", "c_true", "c_init", "c_final"]).map_err(wrap)?;
    for (i, t) in bvp::nodes(truth.len()).iter().enumerate() {
        w.write_record([t.to_string(), truth[i].to_string(), init[i].to_string(), computed[i].to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_identity() {
        let u = GridFunction::from_fn(10, |t| t);
        assert_eq!(gen_noise(&u, NoiseModel { seed: 1, target_delta: 0.0 }).unwrap(), u);
    }

    #[test]
    fn noise_has_exact_norm() {
        let u = bvp::smooth_initial_guess(100);
        for seed in 0..20 {
            let y = gen_noise(&u, NoiseModel { seed, target_delta: 1e-3 }).unwrap();
            let d = GridFunction(y.iter().zip(u.iter()).map(|(a, b)| a - b).collect());
            assert!((d.norm() - 1e-3).abs() <= 1e-15, "{}", d.norm());
        }
    }

    #[test]
    fn noise_is_deterministic() {
        let u = bvp::smooth_initial_guess(50);
        let m = NoiseModel { seed: 42, target_delta: 1e-2 };
        assert_eq!(gen_noise(&u, m).unwrap(), gen_noise(&u, m).unwrap());
        let other = NoiseModel { seed: 43, ..m };
        assert_ne!(gen_noise(&u, m).unwrap(), gen_noise(&u, other).unwrap());
    }

    #[test]
    fn noise_rejects_negative_level() {
        let u = GridFunction::zeros(3);
        assert!(gen_noise(&u, NoiseModel { seed: 0, target_delta: -1.0 }).is_err());
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4].iter().map(|d: &f64| (d.ln(), (0.4 * d.sqrt()).ln())).collect();
        assert!((fit_slope(&pts) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_experiment_config() {
        let cfg = ExperimentConfig::new(Example::Smooth, 1.0, vec![1e-2], vec![0]);
        assert!(run_experiment(&cfg).is_err());
        let cfg = ExperimentConfig::new(Example::Smooth, 1.1, vec![-1e-2], vec![0]);
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn empty_report_csv_is_header_only() {
        let mut buf = Vec::new();
        write_report(&ExperimentReport::empty("example1"), ReportFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));
    }
}
