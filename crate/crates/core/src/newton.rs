//! The outer inexact Newton iteration with discrepancy-principle stopping.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{apply_filter_iterative, apply_filter_spectral, FilterSpec, InnerOptions};
use crate::linops::{operator_norm, sym_eigen, weighted_norm, DenseMatrix, LinearOperator};
use crate::schedules::AlphaSchedule;

/// Largest model dimension for which the materialized-Jacobian path is used
/// automatically.
pub const SPECTRAL_PATH_LIMIT: usize = 512;

/// A nonlinear forward map `F: X → Y` between weighted Euclidean spaces.
///
/// Both spaces carry a uniform weight on the plain dot product (the grid
/// spacing for discretized L² functions). `linearize` must return `F'(x)`
/// with an `apply_adjoint` that is the adjoint with respect to those
/// weighted inner products.
pub trait InverseProblem {
    fn model_dim(&self) -> usize;
    fn data_dim(&self) -> usize;

    fn model_weight(&self) -> f64 {
        1.0
    }

    fn data_weight(&self) -> f64 {
        1.0
    }

    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn linearize<'a>(&'a self, x: &[f64]) -> Result<Box<dyn LinearOperator + 'a>>;

    fn derivative_apply(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        let lin = self.linearize(x)?;
        let mut out = vec![0.0; lin.dim_out()];
        lin.apply(h, &mut out);
        Ok(out)
    }

    fn adjoint_apply(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let lin = self.linearize(x)?;
        let mut out = vec![0.0; lin.dim_in()];
        lin.apply_adjoint(w, &mut out);
        Ok(out)
    }

    /// The matrix of `F'(x)` (plain coordinates), when cheap to form.
    fn jacobian_matrix(&self, _x: &[f64]) -> Option<Result<DenseMatrix>> {
        None
    }
}

/// `F(x) = T x` with unit weights.
#[derive(Clone, Debug)]
pub struct LinearProblem {
    pub operator: DenseMatrix,
}

impl LinearProblem {
    pub fn new(operator: DenseMatrix) -> Self {
        Self { operator }
    }
}

impl InverseProblem for LinearProblem {
    fn model_dim(&self) -> usize {
        self.operator.cols()
    }
    fn data_dim(&self) -> usize {
        self.operator.rows()
    }
    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.model_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model_dim(),
                actual: x.len(),
            });
        }
        Ok(self.operator.matvec(x))
    }
    fn linearize<'a>(&'a self, _x: &[f64]) -> Result<Box<dyn LinearOperator + 'a>> {
        Ok(Box::new(&self.operator))
    }
    fn jacobian_matrix(&self, _x: &[f64]) -> Option<Result<DenseMatrix>> {
        Some(Ok(self.operator.clone()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterPath {
    /// Spectral when the problem offers a Jacobian and `model_dim ≤ 512`.
    #[default]
    Auto,
    Iterative,
    Spectral,
}

/// What to do when `‖F'(x0)‖ > min(1, √α₀)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingCheck {
    Off,
    #[default]
    Warn,
    Enforce,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub filter: FilterSpec,
    pub schedule: AlphaSchedule,
    pub tau: f64,
    pub delta: f64,
    pub n_max: usize,
    pub x0: Vec<f64>,
    pub scaling: ScalingCheck,
    pub path: FilterPath,
    pub inner: InnerOptions,
    /// Stopping threshold on the residual when `delta == 0`.
    pub residual_floor: f64,
    /// Exact solution, for error tracking only.
    pub truth: Option<Vec<f64>>,
}

impl SolveConfig {
    pub const DEFAULT_N_MAX: usize = 60;
    pub const DEFAULT_RESIDUAL_FLOOR: f64 = 1e-14;

    pub fn new(filter: FilterSpec, schedule: AlphaSchedule, tau: f64, delta: f64, x0: Vec<f64>) -> Self {
        Self {
            filter,
            schedule,
            tau,
            delta,
            n_max: Self::DEFAULT_N_MAX,
            x0,
            scaling: ScalingCheck::default(),
            path: FilterPath::default(),
            inner: InnerOptions::default(),
            residual_floor: Self::DEFAULT_RESIDUAL_FLOOR,
            truth: None,
        }
    }

    pub fn with_truth(mut self, truth: Vec<f64>) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn with_path(mut self, path: FilterPath) -> Self {
        self.path = path;
        self
    }

    pub fn with_scaling(mut self, scaling: ScalingCheck) -> Self {
        self.scaling = scaling;
        self
    }

    fn validate(&self, problem: &dyn InverseProblem, y: &[f64]) -> Result<()> {
        if !(self.tau > 1.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("τ must exceed 1, got {}", self.tau)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("δ must be nonnegative, got {}", self.delta)));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidConfig("n_max must be at least 1".into()));
        }
        if let FilterSpec::IteratedTikhonov { order: 0 } = self.filter {
            return Err(Error::InvalidConfig("Tikhonov order must be at least 1".into()));
        }
        for (len, expected) in [
            (self.x0.len(), problem.model_dim()),
            (y.len(), problem.data_dim()),
            (self.truth.as_ref().map_or(problem.model_dim(), Vec::len), problem.model_dim()),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch { expected, actual: len });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `‖F(x_n) - y^δ‖ ≤ τδ` for the first time.
    Discrepancy,
    /// Noise-free run reached the residual floor.
    ResidualFloor,
    /// `n_max` reached.
    Budget,
    /// The next iterate left the domain; it is not part of the trace.
    DomainExit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    /// `α_n`, used for the step from `x_n` to `x_{n+1}`.
    pub alpha: f64,
    /// `s_n`.
    pub partial_sum: f64,
    pub residual_norm: f64,
    pub error_norm: Option<f64>,
    /// Inner recurrence steps spent on the step out of `x_n` (0 for the last record).
    pub inner_iterations: u64,
    pub iterate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub norm_estimate: f64,
    pub bound: f64,
    pub converged: bool,
}

impl ScalingReport {
    pub fn satisfied(&self) -> bool {
        self.norm_estimate <= self.bound
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub tau: f64,
    pub delta: f64,
    pub scaling: Option<ScalingReport>,
}

impl IterationTrace {
    /// Index of the last iterate (`n_δ` when stopped by the discrepancy principle).
    pub fn stopping_index(&self) -> usize {
        self.records.len() - 1
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("trace always holds x_0")
    }

    pub fn final_iterate(&self) -> &[f64] {
        &self.last().iterate
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual_norm).collect()
    }

    /// `‖F(x_{n_δ}) - y^δ‖ ≤ τδ < ‖F(x_n) - y^δ‖` for all `n < n_δ`.
    pub fn satisfies_discrepancy_bracket(&self) -> bool {
        let bound = self.tau * self.delta;
        let (last, earlier) = self.records.split_last().expect("trace always holds x_0");
        last.residual_norm <= bound && earlier.iter().all(|r| r.residual_norm > bound)
    }

    /// One JSON object per record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Per-step scalars; iterates are left out.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "alpha", "partial_sum", "residual_norm", "error_norm", "inner_iterations"])?;
        for r in &self.records {
            w.write_record([
                r.n.to_string(),
                r.alpha.to_string(),
                r.partial_sum.to_string(),
                r.residual_norm.to_string(),
                r.error_norm.map(|e| e.to_string()).unwrap_or_default(),
                r.inner_iterations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Jacobian rescaled to orthonormal coordinates of the weighted spaces.
fn orthonormal_jacobian(problem: &dyn InverseProblem, x: &[f64]) -> Result<DenseMatrix> {
    let j = problem.jacobian_matrix(x).ok_or(Error::MissingJacobian)??;
    Ok(j.scaled((problem.data_weight() / problem.model_weight()).sqrt()))
}

fn use_spectral(problem: &dyn InverseProblem, x: &[f64], path: FilterPath) -> Result<Option<DenseMatrix>> {
    match path {
        FilterPath::Iterative => Ok(None),
        FilterPath::Spectral => orthonormal_jacobian(problem, x).map(Some),
        FilterPath::Auto if problem.model_dim() <= SPECTRAL_PATH_LIMIT => match problem.jacobian_matrix(x) {
            Some(_) => orthonormal_jacobian(problem, x).map(Some),
            None => Ok(None),
        },
        FilterPath::Auto => Ok(None),
    }
}

/// `g_α(F'(x)*F'(x)) F'(x)* residual` and the inner step count.
fn newton_step(
    problem: &dyn InverseProblem,
    cfg: &SolveConfig,
    x: &[f64],
    residual: &[f64],
    alpha: f64,
) -> Result<(Vec<f64>, u64)> {
    if let Some(k) = use_spectral(problem, x, cfg.path)? {
        let sy = problem.data_weight().sqrt();
        let sx = problem.model_weight().sqrt();
        let b: Vec<f64> = residual.iter().map(|r| r * sy).collect();
        let z = apply_filter_spectral(cfg.filter, alpha, &k, &b)?;
        let steps = cfg.filter.inner_steps(alpha)?;
        Ok((z.into_iter().map(|v| v / sx).collect(), steps))
    } else {
        let lin = problem.linearize(x)?;
        let out = apply_filter_iterative(cfg.filter, alpha, lin.as_ref(), residual, &cfg.inner)?;
        Ok((out.solution, out.inner_iterations))
    }
}

fn scaling_report(problem: &dyn InverseProblem, x0: &[f64], alpha0: f64) -> Result<ScalingReport> {
    let lin = problem.linearize(x0)?;
    let est = operator_norm(lin.as_ref());
    Ok(ScalingReport {
        norm_estimate: est.value,
        bound: alpha0.sqrt().min(1.0),
        converged: est.converged,
    })
}

/// Runs the inexact Newton iteration from `cfg.x0` against data `y_delta`.
///
/// Stops at the first `n` with `‖F(x_n) - y^δ‖ ≤ τδ` (or below the residual
/// floor when `δ = 0`), at `n_max`, or when the next iterate leaves the
/// domain. Failures inside a step come back as [`Error::AtStep`].
pub fn solve(problem: &dyn InverseProblem, y_delta: &[f64], cfg: &SolveConfig) -> Result<IterationTrace> {
    cfg.validate(problem, y_delta)?;
    if !problem.in_domain(&cfg.x0) {
        return Err(Error::InvalidConfig("initial guess lies outside the domain".into()));
    }
    let wx = problem.model_weight();
    let wy = problem.data_weight();

    let scaling = match cfg.scaling {
        ScalingCheck::Off => None,
        check => {
            let rep = scaling_report(problem, &cfg.x0, cfg.schedule.alpha0()).map_err(|e| e.at_step(0))?;
            if !rep.satisfied() {
                if check == ScalingCheck::Enforce {
                    return Err(Error::ScalingViolation {
                        norm: rep.norm_estimate,
                        bound: rep.bound,
                    }
                    .at_step(0));
                }
                log::warn!(
                    "‖F'(x0)‖ ≈ {:.4e} exceeds min(1, √α₀) = {:.4e}",
                    rep.norm_estimate,
                    rep.bound
                );
            }
            Some(rep)
        }
    };

    let threshold = cfg.tau * cfg.delta;
    let mut x = cfg.x0.clone();
    let mut fx = problem.evaluate(&x).map_err(|e| e.at_step(0))?;
    let mut records = Vec::new();
    let termination = loop {
        let n = records.len();
        let residual: Vec<f64> = fx.iter().zip(y_delta).map(|(f, y)| f - y).collect();
        let residual_norm = weighted_norm(&residual, wy);
        let error_norm = cfg.truth.as_ref().map(|t| {
            let e: Vec<f64> = x.iter().zip(t).map(|(a, b)| a - b).collect();
            weighted_norm(&e, wx)
        });
        let alpha = cfg.schedule.alpha_at(n).map_err(|e| e.at_step(n))?;
        let partial_sum = cfg.schedule.partial_sum(Some(n)).map_err(|e| e.at_step(n))?;
        records.push(IterationRecord {
            n,
            alpha,
            partial_sum,
            residual_norm,
            error_norm,
            inner_iterations: 0,
            iterate: x.clone(),
        });

        if cfg.delta > 0.0 {
            if residual_norm <= threshold {
                break Termination::Discrepancy;
            }
        } else if residual_norm <= cfg.residual_floor {
            break Termination::ResidualFloor;
        }
        if n >= cfg.n_max {
            break Termination::Budget;
        }

        let (step, inner) = newton_step(problem, cfg, &x, &residual, alpha).map_err(|e| e.at_step(n))?;
        let next: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - s).collect();
        if next.iter().any(|v| !v.is_finite()) || !problem.in_domain(&next) {
            break Termination::DomainExit;
        }
        match problem.evaluate(&next) {
            Ok(f) => fx = f,
            Err(Error::SingularPivot { .. }) => break Termination::DomainExit,
            Err(e) => return Err(e.at_step(n + 1)),
        }
        records[n].inner_iterations = inner;
        x = next;
    };

    Ok(IterationTrace {
        records,
        termination,
        tau: cfg.tau,
        delta: cfg.delta,
        scaling,
    })
}

/// Outcome of [`source_condition_diagnostic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceDiagnostic {
    pub nu: f64,
    pub eigenvalue_floor: f64,
    /// `‖ω‖` of the minimum-norm fit over the retained eigenpairs.
    pub omega_norm_estimate: f64,
    /// Fraction `‖P_excluded (x0 - x†)‖ / ‖x0 - x†‖` left unexplained.
    pub residual_of_fit: f64,
    pub excluded_components: usize,
}

pub const SOURCE_EIGENVALUE_FLOOR: f64 = 1e-12;

/// Fits `(T*T)^ν ω = x0 - x†` with `T = F'(x†)`, dropping eigenvalues of
/// `T*T` at or below the floor.
pub fn source_condition_diagnostic(
    problem: &dyn InverseProblem,
    x_truth: &[f64],
    x0: &[f64],
    nu: f64,
) -> Result<SourceDiagnostic> {
    source_condition_diagnostic_with_floor(problem, x_truth, x0, nu, SOURCE_EIGENVALUE_FLOOR)
}

pub fn source_condition_diagnostic_with_floor(
    problem: &dyn InverseProblem,
    x_truth: &[f64],
    x0: &[f64],
    nu: f64,
    floor: f64,
) -> Result<SourceDiagnostic> {
    if !(nu > 0.0 && nu <= 0.5) {
        return Err(Error::InvalidConfig(format!("ν must lie in (0, 1/2], got {nu}")));
    }
    for v in [x_truth, x0] {
        if v.len() != problem.model_dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.model_dim(),
                actual: v.len(),
            });
        }
    }
    let k = orthonormal_jacobian(problem, x_truth)?;
    let eig = sym_eigen(&k.gram())?;
    let sx = problem.model_weight().sqrt();
    let d: Vec<f64> = x0.iter().zip(x_truth).map(|(a, b)| (a - b) * sx).collect();
    let coeffs = eig.to_eigenbasis(&d);
    let total: f64 = coeffs.iter().map(|c| c * c).sum();

    let mut omega_sq = 0.0;
    let mut excluded_sq = 0.0;
    let mut excluded = 0;
    for (c, &lam) in coeffs.iter().zip(&eig.eigenvalues) {
        if lam > floor {
            omega_sq += (c * lam.powf(-nu)).powi(2);
        } else {
            excluded_sq += c * c;
            excluded += 1;
        }
    }
    Ok(SourceDiagnostic {
        nu,
        eigenvalue_floor: floor,
        omega_norm_estimate: omega_sq.sqrt(),
        residual_of_fit: if total > 0.0 { (excluded_sq / total).sqrt() } else { 0.0 },
        excluded_components: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_problem() -> LinearProblem {
        LinearProblem::new(DenseMatrix::from_diagonal(&[0.9, 0.5, 0.1]))
    }

    #[test]
    fn exact_start_stops_immediately() {
        let p = diag_problem();
        let truth = vec![1.0, 1.0, 1.0];
        let y = p.evaluate(&truth).unwrap();
        let cfg = SolveConfig::new(FilterSpec::Landweber, AlphaSchedule::geometric(1.0, 0.5).unwrap(), 1.1, 0.0, truth.clone());
        let t = solve(&p, &y, &cfg).unwrap();
        assert_eq!(t.termination, Termination::ResidualFloor);
        assert_eq!(t.stopping_index(), 0);
        assert_eq!(t.final_iterate(), truth.as_slice());
    }

    #[test]
    fn discrepancy_stop_and_bracket() {
        let p = diag_problem();
        let truth = vec![1.0, 1.0, 1.0];
        let mut y = p.evaluate(&truth).unwrap();
        y[0] += 0.01;
        let cfg = SolveConfig::new(FilterSpec::IteratedTikhonov { order: 1 }, AlphaSchedule::geometric(1.0, 0.5).unwrap(), 1.5, 0.01, vec![0.0; 3])
            .with_truth(truth);
        let t = solve(&p, &y, &cfg).unwrap();
        assert_eq!(t.termination, Termination::Discrepancy);
        assert!(t.satisfies_discrepancy_bracket());
        assert!(t.records.iter().all(|r| r.error_norm.is_some()));
    }

    #[test]
    fn budget_termination() {
        let p = diag_problem();
        let y = p.evaluate(&[1.0, 1.0, 1.0]).unwrap();
        let cfg = SolveConfig::new(FilterSpec::Landweber, AlphaSchedule::explicit(vec![1.0; 10]).unwrap(), 2.0, 0.0, vec![0.0; 3])
            .with_n_max(5);
        let t = solve(&p, &y, &cfg).unwrap();
        assert_eq!(t.termination, Termination::Budget);
        assert_eq!(t.records.len(), 6);
        assert_eq!(t.records[0].inner_iterations, 1);
        assert_eq!(t.last().inner_iterations, 0);
    }

    #[test]
    fn config_validation() {
        let p = diag_problem();
        let y = vec![0.0; 3];
        let s = AlphaSchedule::geometric(1.0, 0.5).unwrap();
        let bad_tau = SolveConfig::new(FilterSpec::Landweber, s.clone(), 1.0, 0.1, vec![0.0; 3]);
        assert!(matches!(solve(&p, &y, &bad_tau), Err(Error::InvalidConfig(_))));
        let bad_dim = SolveConfig::new(FilterSpec::Landweber, s.clone(), 1.1, 0.1, vec![0.0; 2]);
        assert!(matches!(solve(&p, &y, &bad_dim), Err(Error::DimensionMismatch { .. })));
        let bad_delta = SolveConfig::new(FilterSpec::Landweber, s, 1.1, -0.1, vec![0.0; 3]);
        assert!(solve(&p, &y, &bad_delta).is_err());
    }

    #[test]
    fn scaling_enforcement() {
        let p = LinearProblem::new(DenseMatrix::from_diagonal(&[2.0, 0.5]));
        let y = vec![1.0, 1.0];
        let s = AlphaSchedule::geometric(1.0, 0.5).unwrap();
        let cfg = SolveConfig::new(FilterSpec::IteratedTikhonov { order: 1 }, s, 1.1, 0.1, vec![0.0; 2])
            .with_scaling(ScalingCheck::Enforce);
        let err = solve(&p, &y, &cfg).unwrap_err();
        assert_eq!(err.step(), Some(0));
        assert_eq!(err.kind(), "scaling_violation");

        let warn = cfg.clone().with_scaling(ScalingCheck::Warn).with_n_max(3);
        let t = solve(&p, &y, &warn).unwrap();
        let rep = t.scaling.unwrap();
        assert!(!rep.satisfied());
        assert!((rep.norm_estimate - 2.0).abs() < 0.02);
    }

    #[test]
    fn inner_budget_error_carries_step() {
        let p = diag_problem();
        let y = p.evaluate(&[1.0, 1.0, 1.0]).unwrap();
        let mut cfg = SolveConfig::new(FilterSpec::Landweber, AlphaSchedule::geometric(1.0, 0.5).unwrap(), 1.1, 0.0, vec![0.0; 3])
            .with_path(FilterPath::Iterative)
            .with_n_max(20);
        cfg.inner.budget_cap = 16;
        let err = solve(&p, &y, &cfg).unwrap_err();
        assert_eq!(err.step(), Some(5));
        assert_eq!(err.kind(), "inner_budget_exceeded");
    }

    #[test]
    fn spectral_path_requires_jacobian() {
        struct NoJac;
        impl InverseProblem for NoJac {
            fn model_dim(&self) -> usize {
                1
            }
            fn data_dim(&self) -> usize {
                1
            }
            fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![0.5 * x[0]])
            }
            fn linearize<'a>(&'a self, _x: &[f64]) -> Result<Box<dyn LinearOperator + 'a>> {
                Ok(Box::new(DenseMatrix::from_diagonal(&[0.5])))
            }
        }
        let cfg = SolveConfig::new(FilterSpec::Landweber, AlphaSchedule::geometric(1.0, 0.5).unwrap(), 1.1, 0.0, vec![0.0])
            .with_path(FilterPath::Spectral);
        assert_eq!(solve(&NoJac, &[0.5], &cfg).unwrap_err().kind(), "missing_jacobian");
        let auto = cfg.with_path(FilterPath::Auto).with_n_max(4);
        assert!(solve(&NoJac, &[0.5], &auto).is_ok());
        assert!(source_condition_diagnostic(&NoJac, &[1.0], &[0.0], 0.5).is_err());
    }

    #[test]
    fn trace_serialization() {
        let p = diag_problem();
        let y = p.evaluate(&[1.0, 1.0, 1.0]).unwrap();
        let cfg = SolveConfig::new(FilterSpec::Landweber, AlphaSchedule::geometric(1.0, 0.5).unwrap(), 1.1, 0.0, vec![0.0; 3])
            .with_n_max(3);
        let t = solve(&p, &y, &cfg).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&buf).unwrap().lines().collect();
        assert_eq!(lines.len(), 4);
        let rec: IterationRecord = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(rec, t.records[2]);
        let mut csv_buf = Vec::new();
        t.write_csv(&mut csv_buf).unwrap();
        let text = String::from_utf8(csv_buf).unwrap();
        assert!(text.starts_with("n,alpha,partial_sum,residual_norm,error_norm,inner_iterations\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn source_diagnostic_trivial() {
        let p = diag_problem();
        let x = vec![1.0, 2.0, 3.0];
        let d = source_condition_diagnostic(&p, &x, &x, 0.5).unwrap();
        assert_eq!(d.omega_norm_estimate, 0.0);
        assert_eq!(d.residual_of_fit, 0.0);
        // x0 - x† = (T*T)^{1/2} (1, 1, 1) = (0.9, 0.5, 0.1)
        let x0 = vec![1.9, 2.5, 3.1];
        let d = source_condition_diagnostic(&p, &x, &x0, 0.5).unwrap();
        assert!((d.omega_norm_estimate - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(d.excluded_components, 0);
        // A floor above 0.01 drops the weakest direction.
        let d = source_condition_diagnostic_with_floor(&p, &x, &x0, 0.5, 0.05).unwrap();
        assert_eq!(d.excluded_components, 1);
        let expected = 0.1 / (0.81f64 + 0.25 + 0.01).sqrt();
        assert!((d.residual_of_fit - expected).abs() < 1e-12);
    }
}
