use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use newtonreg::bvp;
use newtonreg::experiment::{self, Example, ExperimentConfig, ExperimentReport, ReportFormat};
use newtonreg::filters::{self, FilterBoundReport, FilterSpec};
use newtonreg::newton::{self, SourceDiagnostic};
use newtonreg::schedules::{self, AlphaSchedule};
use newtonreg::{Error, Result};

#[derive(Parser)]
#[command(name = "newtonreg", version, about = "Inexact Newton regularization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parameter identification with the smooth start c0 = 1 + t.
    Example1(RunArgs),
    /// Parameter identification with the rough start c0 = 2 - t.
    Example2(RunArgs),
    /// Grid check of the filter bounds plus iterative/spectral agreement.
    VerifyFilters(VerifyArgs),
    /// Admissibility audit of a geometric step-size schedule.
    AuditSchedule(ScheduleArgs),
    /// Source-representation diagnostic for both initial guesses.
    SourceCheck(SourceArgs),
}

#[derive(Args, Clone)]
struct FilterArgs {
    /// landweber, lardy, exp-euler or tikhonov-N
    #[arg(long, default_value = "landweber")]
    filter: FilterSpec,
    /// Overrides N when the filter is iterated Tikhonov.
    #[arg(long)]
    tikhonov_order: Option<u32>,
}

impl FilterArgs {
    fn spec(&self) -> Result<FilterSpec> {
        match (self.filter, self.tikhonov_order) {
            (FilterSpec::IteratedTikhonov { .. }, Some(n)) => FilterSpec::tikhonov(n),
            (_, Some(_)) => Err(Error::InvalidConfig("--tikhonov-order requires --filter tikhonov".into())),
            (f, None) => Ok(f),
        }
    }
}

#[derive(Args, Clone)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 0.5)]
    ratio_r: f64,
    #[arg(long, default_value_t = 60)]
    n_max: usize,
}

impl ScheduleArgs {
    fn schedule(&self) -> Result<AlphaSchedule> {
        AlphaSchedule::geometric(self.alpha0, self.ratio_r)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Discrepancy factors; comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1.1")]
    tau: Vec<f64>,
    /// A single noise level; shorthand for --deltas.
    #[arg(long, conflicts_with = "deltas")]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5,1e-6")]
    deltas: Vec<f64>,
    /// A single seed; shorthand for --seeds.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma list or half-open range `a..b`.
    #[arg(long, default_value = "0..10", value_parser = parse_seeds)]
    seeds: Seeds,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, default_value_t = bvp::BvpSpec::DEFAULT_M)]
    m: usize,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    format: ReportFormat,
    /// Writes node,c_true,c_init,c_final of the first run.
    #[arg(long)]
    dump_solution: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> std::result::Result<Seeds, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
        if a >= b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(Seeds((a..b).collect()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|e| format!("{t}: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(Seeds)
}

#[derive(Args)]
struct VerifyArgs {
    /// Checks every family when absent.
    #[arg(long)]
    filter: Option<FilterSpec>,
    #[arg(long)]
    tikhonov_order: Option<u32>,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 0.5)]
    ratio_r: f64,
    #[arg(long, default_value_t = 20)]
    n_max: usize,
    /// Interior Chebyshev points of the λ grid.
    #[arg(long, default_value_t = 64)]
    grid_points: usize,
    /// Random operators per α in the cross-path check.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SourceArgs {
    #[arg(long, default_value_t = bvp::BvpSpec::DEFAULT_M)]
    m: usize,
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
    #[arg(long, default_value_t = newton::SOURCE_EIGENVALUE_FLOOR)]
    floor: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CrossPath {
    alpha: f64,
    relative_discrepancy: f64,
}

#[derive(Serialize)]
struct FilterVerification {
    filter: String,
    bounds: FilterBoundReport,
    cross_path: Vec<CrossPath>,
}

#[derive(Serialize)]
struct SourceCheck {
    example: &'static str,
    diagnostic: SourceDiagnostic,
}

struct Failure(Error);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e)
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_examples(example: Example, args: RunArgs) -> std::result::Result<ExperimentReport, Failure> {
    let mut cfg = ExperimentConfig::new(example, args.tau[0], args.delta.map_or(args.deltas, |d| vec![d]), args.seed.map_or(args.seeds.0, |s| vec![s]));
    cfg.taus = args.tau;
    cfg.filter = args.filter.spec()?;
    cfg.schedule = args.schedule.schedule()?;
    cfg.n_max = args.schedule.n_max;
    cfg.m = args.m;
    let report = experiment::run_experiment(&cfg)?;

    match &args.out {
        Some(path) => experiment::emit_report(&report, args.format, path)?,
        None => {
            let stdout = std::io::stdout();
            experiment::write_report(&report, args.format, stdout.lock())?;
        }
    }
    if let Some(path) = &args.dump_solution {
        if let Some(detail) = report.details.first() {
            experiment::write_solution_csv(
                path,
                &bvp::reference_truth(cfg.m),
                &example.initial_guess(cfg.m),
                &detail.final_iterate,
            )?;
        }
    }
    for agg in &report.aggregates {
        log::info!(
            "tau={} delta={:e} runs={} median n={} error={:.3e} ratio={:.3}",
            agg.tau, agg.delta, agg.runs, agg.median_n_delta, agg.median_error, agg.median_ratio
        );
    }
    Ok(report)
}

fn verify_filters(args: VerifyArgs) -> Result<()> {
    let families = match (args.filter, args.tikhonov_order) {
        (Some(FilterSpec::IteratedTikhonov { .. }), Some(n)) => vec![FilterSpec::tikhonov(n)?],
        (Some(f), None) => vec![f],
        (None, None) => FilterSpec::ALL_DEFAULT.to_vec(),
        _ => return Err(Error::InvalidConfig("--tikhonov-order requires --filter tikhonov".into())),
    };
    let schedule = AlphaSchedule::geometric(args.alpha0, args.ratio_r)?;
    let grid = filters::chebyshev_lambda_grid(args.grid_points);
    let nu = filters::default_nu_grid();
    let mut out = Vec::new();
    for spec in families {
        let bounds = filters::verify_a5_bounds(spec, &schedule, args.n_max, &grid, &nu)?;
        let cross_path = [1.0, 0.5, 0.125]
            .into_iter()
            .map(|alpha| {
                Ok(CrossPath {
                    alpha,
                    relative_discrepancy: filters::cross_path_discrepancy(spec, alpha, 20, args.trials, args.seed)?,
                })
            })
            .collect::<Result<_>>()?;
        out.push(FilterVerification {
            filter: spec.to_string(),
            bounds,
            cross_path,
        });
    }
    write_json(&out, args.out.as_ref())
}

fn source_check(args: SourceArgs) -> Result<()> {
    let spec = bvp::reference_spec(args.m)?;
    let truth = bvp::reference_truth(args.m);
    let out = [Example::Smooth, Example::Rough]
        .into_iter()
        .map(|ex| {
            Ok(SourceCheck {
                example: ex.name(),
                diagnostic: newton::source_condition_diagnostic_with_floor(
                    &spec,
                    &truth,
                    &ex.initial_guess(args.m),
                    args.nu,
                    args.floor,
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(&out, args.out.as_ref())
}

fn report_error(e: &Error) {
    let payload = json!({ "error": e.kind(), "step": e.step(), "message": e.to_string() });
    let _ = writeln!(std::io::stderr(), "{payload}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Example1(args) => run_examples(Example::Smooth, args).map(Some),
        Command::Example2(args) => run_examples(Example::Rough, args).map(Some),
        Command::VerifyFilters(args) => verify_filters(args).map(|_| None).map_err(Failure),
        Command::AuditSchedule(args) => args
            .schedule()
            .and_then(|s| schedules::audit(&s, args.n_max))
            .and_then(|a| write_json(&a, None))
            .map(|_| None)
            .map_err(Failure),
        Command::SourceCheck(args) => source_check(args).map(|_| None).map_err(Failure),
    };
    match result {
        Ok(Some(report)) if !report.failures.is_empty() => {
            let payload = json!({ "error": "row_failures", "failures": report.failures });
            let _ = writeln!(std::io::stderr(), "{payload}");
            ExitCode::FAILURE
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure(e)) => {
            report_error(&e);
            ExitCode::FAILURE
        }
    }
}
