//! Spectral filter functions `g_α` and their residuals `r_α(λ) = 1 - λ g_α(λ)`.
//!
//! A filter is applied to a linear map `K` as `g_α(K*K) K* b`, either by the
//! family's own inner recurrence ([`apply_filter_iterative`]) or exactly
//! through an eigendecomposition of `KᵀK` ([`apply_filter_spectral`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{self, norm2, sym_eigen, DenseMatrix, LinearOperator};
use crate::schedules::AlphaSchedule;

/// The filter family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FilterSpec {
    /// `g_α(λ) = ((α+λ)^N - α^N) / (λ (α+λ)^N)`; `N = 1` is Levenberg–Marquardt.
    IteratedTikhonov { order: u32 },
    /// `g_α(λ) = (1 - e^{-λ/α}) / λ`.
    ExponentialEuler,
    /// `g_α(λ) = Σ_{l<⌊1/α⌋} (1-λ)^l`, for `0 < α ≤ 1`.
    Landweber,
    /// `g_α(λ) = Σ_{i=1}^{⌊1/α⌋} (1+λ)^{-i}`, for `0 < α ≤ 1`.
    Lardy,
}

impl FilterSpec {
    pub const ALL_DEFAULT: [FilterSpec; 4] = [
        FilterSpec::IteratedTikhonov { order: 1 },
        FilterSpec::ExponentialEuler,
        FilterSpec::Landweber,
        FilterSpec::Lardy,
    ];

    pub fn tikhonov(order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("Tikhonov order must be at least 1".into()));
        }
        Ok(FilterSpec::IteratedTikhonov { order })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            FilterSpec::IteratedTikhonov { .. } => "tikhonov",
            FilterSpec::ExponentialEuler => "exp-euler",
            FilterSpec::Landweber => "landweber",
            FilterSpec::Lardy => "lardy",
        }
    }

    /// Validates `α` and returns `⌊1/α⌋` for the two step-counting families.
    fn check_alpha(&self, alpha: f64) -> Result<Option<f64>> {
        if let FilterSpec::IteratedTikhonov { order: 0 } = self {
            return Err(Error::InvalidConfig("Tikhonov order must be at least 1".into()));
        }
        let bad = Error::FilterDomain {
            family: self.family_name(),
            alpha,
        };
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(bad);
        }
        match self {
            FilterSpec::Landweber | FilterSpec::Lardy => {
                if alpha > 1.0 {
                    return Err(bad);
                }
                let k = (1.0 / alpha).floor();
                if !k.is_finite() || k > u64::MAX as f64 {
                    return Err(bad);
                }
                Ok(Some(k))
            }
            _ => Ok(None),
        }
    }

    /// Number of inner recurrence steps the family takes at this `α`.
    pub fn inner_steps(&self, alpha: f64) -> Result<u64> {
        Ok(match (self, self.check_alpha(alpha)?) {
            (_, Some(k)) => k as u64,
            (FilterSpec::IteratedTikhonov { order }, None) => *order as u64,
            _ => 0,
        })
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::IteratedTikhonov { order } => write!(f, "tikhonov-{order}"),
            other => f.write_str(other.family_name()),
        }
    }
}

impl FromStr for FilterSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "landweber" => Ok(FilterSpec::Landweber),
            "lardy" => Ok(FilterSpec::Lardy),
            "exp-euler" | "exponential-euler" | "expeuler" => Ok(FilterSpec::ExponentialEuler),
            "tikhonov" | "lm" | "levenberg-marquardt" => FilterSpec::tikhonov(1),
            other => match other.strip_prefix("tikhonov-") {
                Some(n) => FilterSpec::tikhonov(
                    n.parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad Tikhonov order in {s:?}")))?,
                ),
                None => Err(Error::InvalidConfig(format!("unknown filter family {s:?}"))),
            },
        }
    }
}

/// `r_α(λ)` split into sign and log-magnitude so products can be formed
/// without underflow.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Residual {
    Zero,
    /// `r = sign · exp(log_abs)`
    Nonzero { log_abs: f64, negative: bool },
}

impl Residual {
    fn value(self) -> f64 {
        match self {
            Residual::Zero => 0.0,
            Residual::Nonzero { log_abs, negative } => {
                let v = log_abs.exp();
                if negative {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::SpectralDomain(lambda))
    }
}

/// Returns `(g_α(λ), r_α(λ))` from one shared exponent so that
/// `r = 1 - λ g` holds to rounding.
fn eval_pair(spec: FilterSpec, alpha: f64, lambda: f64) -> Result<(f64, Residual)> {
    let steps = spec.check_alpha(alpha)?;
    check_lambda(lambda)?;
    if lambda == 0.0 {
        let g = match spec {
            FilterSpec::IteratedTikhonov { order } => order as f64 / alpha,
            FilterSpec::ExponentialEuler => 1.0 / alpha,
            FilterSpec::Landweber | FilterSpec::Lardy => steps.unwrap_or(0.0),
        };
        return Ok((g, Residual::Nonzero { log_abs: 0.0, negative: false }));
    }
    // r = ±exp(z); g = (1 - r)/λ.
    let (z, negative) = match spec {
        FilterSpec::IteratedTikhonov { order } => (-(order as f64) * (lambda / alpha).ln_1p(), false),
        FilterSpec::ExponentialEuler => (-lambda / alpha, false),
        FilterSpec::Lardy => (-steps.unwrap_or(0.0) * lambda.ln_1p(), false),
        FilterSpec::Landweber => {
            let k = steps.unwrap_or(0.0);
            if lambda < 1.0 {
                (k * (-lambda).ln_1p(), false)
            } else if lambda == 1.0 {
                return Ok((1.0, Residual::Zero));
            } else {
                let odd = (k % 2.0) == 1.0;
                (k * (lambda - 1.0).ln(), odd)
            }
        }
    };
    let residual = if z == f64::NEG_INFINITY {
        Residual::Zero
    } else {
        Residual::Nonzero { log_abs: z, negative }
    };
    let one_minus_r = if negative { 1.0 + z.exp() } else { -z.exp_m1() };
    Ok((one_minus_r / lambda, residual))
}

/// `g_α(λ)`; at `λ = 0` the removable-singularity limit.
///
/// `λ` above 1 is accepted (all four closed forms stay defined) even though
/// the filter theory only concerns `[0, 1]`.
pub fn eval_g(spec: FilterSpec, alpha: f64, lambda: f64) -> Result<f64> {
    Ok(eval_pair(spec, alpha, lambda)?.0)
}

/// `r_α(λ) = 1 - λ g_α(λ)` in the family's closed form.
pub fn eval_residual(spec: FilterSpec, alpha: f64, lambda: f64) -> Result<f64> {
    Ok(eval_pair(spec, alpha, lambda)?.1.value())
}

/// `∏_k r_{α_k}(λ)`, multiplied in log space while every factor is nonzero.
pub fn residual_product(spec: FilterSpec, alphas: &[f64], lambda: f64) -> Result<f64> {
    let mut log_abs = 0.0;
    let mut negative = false;
    for &a in alphas {
        match eval_pair(spec, a, lambda)?.1 {
            Residual::Zero => return Ok(0.0),
            Residual::Nonzero { log_abs: l, negative: n } => {
                log_abs += l;
                negative ^= n;
            }
        }
    }
    Ok(Residual::Nonzero { log_abs, negative }.value())
}

/// Knobs for the inner recurrences of [`apply_filter_iterative`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    /// Maximum number of inner steps per application.
    pub budget_cap: u64,
    /// Relative residual target for the shifted normal-equation solves.
    pub cg_rtol: f64,
    /// Operators with at most this many columns are materialized so the
    /// exponential Euler filter can be applied spectrally.
    pub materialize_limit: usize,
    /// Largest `λ_max Δt` allowed by the exponential Euler integrator.
    pub ode_step_fraction: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            budget_cap: 1 << 22,
            cg_rtol: 1e-13,
            materialize_limit: 512,
            ode_step_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterApplication {
    pub solution: Vec<f64>,
    pub inner_iterations: u64,
}

fn check_dims(op: &dyn LinearOperator, b: &[f64]) -> Result<()> {
    if b.len() != op.dim_out() {
        return Err(Error::DimensionMismatch {
            expected: op.dim_out(),
            actual: b.len(),
        });
    }
    Ok(())
}

fn check_budget(required: u64, opts: &InnerOptions) -> Result<()> {
    if required > opts.budget_cap {
        Err(Error::InnerBudgetExceeded {
            required,
            cap: opts.budget_cap,
        })
    } else {
        Ok(())
    }
}

/// `K*(b - K z)` into `out`, reusing `tmp` (length `dim_out`).
fn normal_residual(op: &dyn LinearOperator, b: &[f64], z: &[f64], tmp: &mut [f64], out: &mut [f64]) {
    op.apply(z, tmp);
    for (t, bi) in tmp.iter_mut().zip(b) {
        *t = bi - *t;
    }
    op.apply_adjoint(tmp, out);
}

/// Conjugate gradients for `(shift I + K*K) x = rhs`.
fn solve_shifted_normal(op: &dyn LinearOperator, shift: f64, rhs: &[f64], rtol: f64) -> Result<Vec<f64>> {
    let n = op.dim_in();
    let mut x = vec![0.0; n];
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = linops::dot(&r, &r);
    let mut kp = vec![0.0; op.dim_out()];
    let mut ap = vec![0.0; n];
    let max_iter = (10 * n).max(100);
    for _ in 0..max_iter {
        if rr.sqrt() <= rtol * rhs_norm {
            return Ok(x);
        }
        op.apply(&p, &mut kp);
        op.apply_adjoint(&kp, &mut ap);
        for (a, pi) in ap.iter_mut().zip(&p) {
            *a += shift * pi;
        }
        let step = rr / linops::dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_next = linops::dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    // Recompute the true residual before giving up; the recursive one drifts.
    op.apply(&x, &mut kp);
    op.apply_adjoint(&kp, &mut ap);
    let true_res: f64 = ap
        .iter()
        .zip(&x)
        .zip(rhs)
        .map(|((a, xi), ri)| (ri - a - shift * xi).powi(2))
        .sum::<f64>()
        .sqrt()
        / rhs_norm;
    if true_res <= rtol.sqrt() * 1e-2 {
        Ok(x)
    } else {
        Err(Error::LinearSolve {
            residual: true_res,
            iterations: max_iter,
        })
    }
}

/// `g_α(K*K) K* b` through the family's inner recurrence:
///
/// * iterated Tikhonov: `N` solves with `αI + K*K`,
/// * Landweber: `⌊1/α⌋` explicit sweeps `z ← z + K*(b - Kz)`,
/// * Lardy: `⌊1/α⌋` solves with `I + K*K`,
/// * exponential Euler: spectral on the materialized operator when it has
///   at most `materialize_limit` columns, otherwise explicit midpoint
///   integration of `z' = K*(b - Kz)` over `[0, 1/α]`.
///
/// Assumes `‖K‖ ≤ 1`.
pub fn apply_filter_iterative(
    spec: FilterSpec,
    alpha: f64,
    op: &dyn LinearOperator,
    b: &[f64],
    opts: &InnerOptions,
) -> Result<FilterApplication> {
    check_dims(op, b)?;
    let steps = spec.inner_steps(alpha)?;
    let n = op.dim_in();
    let mut z = vec![0.0; n];
    let mut tmp = vec![0.0; op.dim_out()];
    let mut grad = vec![0.0; n];

    match spec {
        FilterSpec::Landweber => {
            check_budget(steps, opts)?;
            for _ in 0..steps {
                normal_residual(op, b, &z, &mut tmp, &mut grad);
                for (zi, gi) in z.iter_mut().zip(&grad) {
                    *zi += gi;
                }
            }
        }
        FilterSpec::IteratedTikhonov { .. } | FilterSpec::Lardy => {
            check_budget(steps, opts)?;
            let shift = if matches!(spec, FilterSpec::Lardy) { 1.0 } else { alpha };
            for _ in 0..steps {
                normal_residual(op, b, &z, &mut tmp, &mut grad);
                let d = solve_shifted_normal(op, shift, &grad, opts.cg_rtol)?;
                for (zi, di) in z.iter_mut().zip(&d) {
                    *zi += di;
                }
            }
        }
        FilterSpec::ExponentialEuler => {
            if n <= opts.materialize_limit {
                let k = linops::materialize(op);
                return Ok(FilterApplication {
                    solution: apply_filter_spectral(spec, alpha, &k, b)?,
                    inner_iterations: n as u64,
                });
            }
            return integrate_exponential_euler(alpha, op, b, opts);
        }
    }
    Ok(FilterApplication {
        solution: z,
        inner_iterations: steps,
    })
}

/// Explicit midpoint integration of `z' = K*(b - Kz)`, `z(0) = 0`, up to
/// `t = 1/α`, with `λ_max Δt ≤ ode_step_fraction`.
pub fn integrate_exponential_euler(
    alpha: f64,
    op: &dyn LinearOperator,
    b: &[f64],
    opts: &InnerOptions,
) -> Result<FilterApplication> {
    check_dims(op, b)?;
    FilterSpec::ExponentialEuler.check_alpha(alpha)?;
    let n = op.dim_in();
    let horizon = 1.0 / alpha;
    let sigma = linops::operator_norm(op).value;
    let lambda_max = (sigma * sigma * 1.01).max(f64::MIN_POSITIVE);
    let dt_max = opts.ode_step_fraction / lambda_max;
    let steps_f = (horizon / dt_max).ceil().max(1.0);
    if steps_f > opts.budget_cap as f64 {
        return Err(Error::InnerBudgetExceeded {
            required: steps_f.min(u64::MAX as f64) as u64,
            cap: opts.budget_cap,
        });
    }
    let steps = steps_f as u64;
    let dt = horizon / steps_f;

    let mut z = vec![0.0; n];
    let mut mid = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut tmp = vec![0.0; op.dim_out()];
    for _ in 0..steps {
        normal_residual(op, b, &z, &mut tmp, &mut k1);
        for i in 0..n {
            mid[i] = z[i] + 0.5 * dt * k1[i];
        }
        normal_residual(op, b, &mid, &mut tmp, &mut k2);
        for i in 0..n {
            z[i] += dt * k2[i];
        }
    }
    Ok(FilterApplication {
        solution: z,
        inner_iterations: steps,
    })
}

/// `g_α(KᵀK) Kᵀ b` from the eigendecomposition of `KᵀK`.
pub fn apply_filter_spectral(spec: FilterSpec, alpha: f64, k: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    spec.check_alpha(alpha)?;
    if b.len() != k.rows() {
        return Err(Error::DimensionMismatch {
            expected: k.rows(),
            actual: b.len(),
        });
    }
    let eig = sym_eigen(&k.gram())?;
    let g: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&lam| eval_g(spec, alpha, lam.max(0.0)))
        .collect::<Result<_>>()?;
    let mut c = eig.to_eigenbasis(&k.matvec_transpose(b));
    for (ci, gi) in c.iter_mut().zip(&g) {
        *ci *= gi;
    }
    Ok(eig.from_eigenbasis(&c))
}

/// Largest relative gap `‖z_iter - z_spec‖ / ‖z_spec‖` between the two
/// application paths over `trials` random `dim × dim` operators scaled to
/// `‖K‖ = 0.99`, with seeded Gaussian entries and right-hand sides.
pub fn cross_path_discrepancy(spec: FilterSpec, alpha: f64, dim: usize, trials: usize, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let opts = InnerOptions::default();
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let entries: Vec<f64> = (0..dim * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let raw = DenseMatrix::new(dim, dim, entries)?;
        let sigma = raw.to_nalgebra().singular_values().max();
        let k = raw.scaled(0.99 / sigma);
        let b: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let spectral = apply_filter_spectral(spec, alpha, &k, &b)?;
        let iterative = apply_filter_iterative(spec, alpha, &k, &b, &opts)?.solution;
        let diff: Vec<f64> = iterative.iter().zip(&spectral).map(|(a, s)| a - s).collect();
        worst = worst.max(norm2(&diff) / norm2(&spectral));
    }
    Ok(worst)
}

/// Which points the bound check sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaGridInfo {
    pub description: String,
    pub lambda_points: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub nu_values: Vec<f64>,
}

/// Outcome of [`verify_a5_bounds`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBoundReport {
    /// Largest excess of `λ^ν ∏_{k=j}^n r_{α_k}(λ)` over `(s_n - s_{j-1})^{-ν}`,
    /// or below zero; 0 when the inequality holds everywhere on the grid.
    pub max_g1_violation: f64,
    /// `max α_j (s_n - s_{j-1})^ν λ^ν g_{α_j}(λ) ∏_{k=j+1}^n r_{α_k}(λ)`.
    pub observed_b2: f64,
    pub grid: LambdaGridInfo,
    pub schedule_prefix_length: usize,
}

/// `points` Chebyshev nodes mapped to `[0, 1]`, plus both endpoints, ascending.
pub fn chebyshev_lambda_grid(points: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..points)
        .map(|i| {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / points as f64;
            0.5 * (1.0 - theta.cos())
        })
        .collect();
    grid.insert(0, 0.0);
    grid.push(1.0);
    grid
}

pub fn default_nu_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

/// Samples both filter inequalities for every `0 ≤ j ≤ n ≤ n_max`, `λ` and
/// `ν` on the given grids.
pub fn verify_a5_bounds(
    spec: FilterSpec,
    schedule: &AlphaSchedule,
    n_max: usize,
    lambda_grid: &[f64],
    nu_grid: &[f64],
) -> Result<FilterBoundReport> {
    for &lam in lambda_grid {
        if !(0.0..=1.0).contains(&lam) {
            return Err(Error::SpectralDomain(lam));
        }
    }
    if let Some(nu) = nu_grid.iter().find(|nu| !(0.0..=1.0).contains(*nu)) {
        return Err(Error::InvalidConfig(format!("ν = {nu} outside [0, 1]")));
    }
    let alphas: Vec<f64> = (0..=n_max).map(|n| schedule.alpha_at(n)).collect::<Result<_>>()?;
    let sums: Vec<f64> = (0..=n_max).map(|n| schedule.partial_sum(Some(n))).collect::<Result<_>>()?;
    let span = |j: usize, n: usize| if j == 0 { sums[n] } else { sums[n] - sums[j - 1] };

    let mut max_violation = 0.0_f64;
    let mut observed_b2 = 0.0_f64;
    let mut g = vec![0.0; alphas.len()];
    let mut r = vec![Residual::Zero; alphas.len()];
    for &lam in lambda_grid {
        for (k, &a) in alphas.iter().enumerate() {
            let (gk, rk) = eval_pair(spec, a, lam)?;
            g[k] = gk;
            r[k] = rk;
        }
        for j in 0..=n_max {
            // Running ∏_{k=j+1}^{n} r_k as (log|·|, sign, zero).
            let mut log_tail = 0.0;
            let mut neg_tail = false;
            let mut zero_tail = false;
            for n in j..=n_max {
                if n > j {
                    match r[n] {
                        Residual::Zero => zero_tail = true,
                        Residual::Nonzero { log_abs, negative } => {
                            log_tail += log_abs;
                            neg_tail ^= negative;
                        }
                    }
                }
                let tail = if zero_tail {
                    0.0
                } else {
                    Residual::Nonzero { log_abs: log_tail, negative: neg_tail }.value()
                };
                let full = match r[j] {
                    Residual::Zero => 0.0,
                    Residual::Nonzero { log_abs, negative } if !zero_tail => Residual::Nonzero {
                        log_abs: log_abs + log_tail,
                        negative: negative ^ neg_tail,
                    }
                    .value(),
                    Residual::Nonzero { .. } => 0.0,
                };
                let s = span(j, n);
                for &nu in nu_grid {
                    let lam_nu = lam.powf(nu);
                    let lhs = lam_nu * full;
                    let bound = s.powf(-nu);
                    max_violation = max_violation.max(lhs - bound).max(-lhs);
                    let b2 = alphas[j] * (lam * s).powf(nu) * g[j] * tail;
                    observed_b2 = observed_b2.max(b2);
                }
            }
        }
    }

    Ok(FilterBoundReport {
        max_g1_violation: max_violation.max(0.0),
        observed_b2,
        grid: LambdaGridInfo {
            description: format!("{} points on [0, 1]", lambda_grid.len()),
            lambda_points: lambda_grid.len(),
            lambda_min: lambda_grid.iter().copied().fold(f64::INFINITY, f64::min),
            lambda_max: lambda_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            nu_values: nu_grid.to_vec(),
        },
        schedule_prefix_length: n_max + 1,
    })
}
