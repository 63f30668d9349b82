//! Coefficient identification in the two-point boundary value problem
//!
//! ```text
//! -u'' + c u = f  on (0, 1),   u(0) = g0,   u(1) = g1,
//! ```
//!
//! with forward map `F(c) = u(c)`. Discretized by second-order central
//! differences on `m` interior nodes `t_i = i h`, `h = 1/(m+1)`; boundary
//! values are folded into the right-hand side. Both `c` and `u` live on the
//! interior nodes and carry the inner product `h Σ a_i b_i`.
//!
//! With `A(c) = -d²/dt² + c`:
//!
//! * `F'(c) h = -A(c)⁻¹ (h u(c))`
//! * `F'(c)* w = -u(c) A(c)⁻¹ w`

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{weighted_dot, weighted_norm, DenseMatrix, LinearOperator, TridiagonalFactorization, TridiagonalSystem};
use crate::newton::InverseProblem;

/// Largest grid for which [`BvpSpec::materialize_jacobian`] is allowed.
pub const JACOBIAN_SIZE_CAP: usize = 512;

/// Values at the interior nodes `t_i = i/(m+1)`, `i = 1..=m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridFunction(pub Vec<f64>);

impl GridFunction {
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        GridFunction(nodes(m).into_iter().map(f).collect())
    }

    pub fn zeros(m: usize) -> Self {
        GridFunction(vec![0.0; m])
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.0.len() as f64 + 1.0)
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.m())
    }

    /// Discrete L² norm `sqrt(h Σ v_i²)`.
    pub fn norm(&self) -> f64 {
        weighted_norm(&self.0, self.h())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        weighted_dot(&self.0, other, self.h())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Writes `node,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "value"])?;
        for (t, v) in self.nodes().iter().zip(&self.0) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Deref for GridFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for GridFunction {
    fn from(v: Vec<f64>) -> Self {
        GridFunction(v)
    }
}

/// Interior nodes of the uniform grid with `m` interior points.
pub fn nodes(m: usize) -> Vec<f64> {
    let h = 1.0 / (m as f64 + 1.0);
    (1..=m).map(|i| i as f64 * h).collect()
}

/// The discretized boundary value problem: grid size, source term and
/// boundary data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvpSpec {
    m: usize,
    f: Vec<f64>,
    g0: f64,
    g1: f64,
}

impl BvpSpec {
    pub const DEFAULT_M: usize = 100;

    pub fn new(m: usize, f: Vec<f64>, g0: f64, g1: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 interior nodes, got {m}")));
        }
        if f.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: f.len() });
        }
        if !(g0.is_finite() && g1.is_finite()) || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("source and boundary data must be finite".into()));
        }
        Ok(Self { m, f, g0, g1 })
    }

    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64, g0: f64, g1: f64) -> Result<Self> {
        Self::new(m, nodes(m).into_iter().map(f).collect(), g0, g1)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.m as f64 + 1.0)
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.m)
    }

    pub fn source(&self) -> &[f64] {
        &self.f
    }

    pub fn boundary(&self) -> (f64, f64) {
        (self.g0, self.g1)
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: v.len(),
            });
        }
        Ok(())
    }

    /// `A(c)`: `(2/h² + c_i)` on the diagonal, `-1/h²` off it.
    pub fn system(&self, c: &[f64]) -> Result<TridiagonalSystem> {
        self.check_len(c)?;
        let ih2 = 1.0 / (self.h() * self.h());
        TridiagonalSystem::new(
            vec![-ih2; self.m - 1],
            c.iter().map(|ci| 2.0 * ih2 + ci).collect(),
            vec![-ih2; self.m - 1],
        )
    }

    fn factorize(&self, c: &[f64]) -> Result<TridiagonalFactorization> {
        self.system(c)?.factorize()
    }

    fn solve_state(&self, fact: &TridiagonalFactorization) -> Vec<f64> {
        let ih2 = 1.0 / (self.h() * self.h());
        let mut rhs = self.f.clone();
        rhs[0] += self.g0 * ih2;
        rhs[self.m - 1] += self.g1 * ih2;
        fact.solve_in_place(&mut rhs);
        rhs
    }

    /// `u(c)`.
    pub fn forward(&self, c: &[f64]) -> Result<GridFunction> {
        let fact = self.factorize(c)?;
        Ok(GridFunction(self.solve_state(&fact)))
    }

    /// `F'(c) h = -A(c)⁻¹ (h ⊙ u_c)`, with `u_c = forward(c)` supplied by the caller.
    pub fn derivative_apply(&self, c: &[f64], u_c: &[f64], hdir: &[f64]) -> Result<GridFunction> {
        self.check_len(u_c)?;
        self.check_len(hdir)?;
        let lin = BvpLinearization {
            fact: self.factorize(c)?,
            u: u_c.to_vec(),
        };
        let mut out = vec![0.0; self.m];
        lin.apply(hdir, &mut out);
        Ok(GridFunction(out))
    }

    /// `F'(c)* w = -u_c ⊙ A(c)⁻¹ w`.
    pub fn adjoint_apply(&self, c: &[f64], u_c: &[f64], w: &[f64]) -> Result<GridFunction> {
        self.check_len(u_c)?;
        self.check_len(w)?;
        let lin = BvpLinearization {
            fact: self.factorize(c)?,
            u: u_c.to_vec(),
        };
        let mut out = vec![0.0; self.m];
        lin.apply_adjoint(w, &mut out);
        Ok(GridFunction(out))
    }

    /// Matrix of `F'(c)`; column `j` is the derivative in direction `e_j`.
    pub fn materialize_jacobian(&self, c: &[f64]) -> Result<DenseMatrix> {
        if self.m > JACOBIAN_SIZE_CAP {
            return Err(Error::SizeCap {
                size: self.m,
                cap: JACOBIAN_SIZE_CAP,
            });
        }
        let lin = self.linearization(c)?;
        Ok(crate::linops::materialize(&lin))
    }

    pub fn linearization(&self, c: &[f64]) -> Result<BvpLinearization> {
        let fact = self.factorize(c)?;
        let u = self.solve_state(&fact);
        Ok(BvpLinearization { fact, u })
    }
}

/// `F'(c)` at a fixed coefficient, holding the factorized `A(c)` and `u(c)`.
#[derive(Clone, Debug)]
pub struct BvpLinearization {
    fact: TridiagonalFactorization,
    u: Vec<f64>,
}

impl BvpLinearization {
    pub fn state(&self) -> &[f64] {
        &self.u
    }
}

impl LinearOperator for BvpLinearization {
    fn dim_in(&self) -> usize {
        self.u.len()
    }
    fn dim_out(&self) -> usize {
        self.u.len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), ui) in out.iter_mut().zip(x).zip(&self.u) {
            *o = -xi * ui;
        }
        self.fact.solve_in_place(out);
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
        self.fact.solve_in_place(out);
        for (o, ui) in out.iter_mut().zip(&self.u) {
            *o *= -ui;
        }
    }
}

impl InverseProblem for BvpSpec {
    fn model_dim(&self) -> usize {
        self.m
    }
    fn data_dim(&self) -> usize {
        self.m
    }
    fn model_weight(&self) -> f64 {
        self.h()
    }
    fn data_weight(&self) -> f64 {
        self.h()
    }
    fn in_domain(&self, c: &[f64]) -> bool {
        c.len() == self.m && c.iter().all(|v| v.is_finite())
    }
    fn evaluate(&self, c: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(c)?.0)
    }
    fn linearize<'a>(&'a self, c: &[f64]) -> Result<Box<dyn LinearOperator + 'a>> {
        Ok(Box::new(self.linearization(c)?))
    }
    fn jacobian_matrix(&self, c: &[f64]) -> Option<Result<DenseMatrix>> {
        Some(self.materialize_jacobian(c))
    }
}

/// The reference configuration: `f = (1+t)(1+t-0.8 sin 2πt)`, `g0 = 1`,
/// `g1 = 2`, whose continuum solution for `c† = 1+t-0.8 sin 2πt` is `u = 1+t`.
pub fn reference_spec(m: usize) -> Result<BvpSpec> {
    BvpSpec::from_fn(m, |t| (1.0 + t) * (1.0 + t - 0.8 * (2.0 * PI * t).sin()), 1.0, 2.0)
}

/// `c†(t) = 1 + t - 0.8 sin(2πt)`.
pub fn reference_truth(m: usize) -> GridFunction {
    GridFunction::from_fn(m, |t| 1.0 + t - 0.8 * (2.0 * PI * t).sin())
}

/// `c0 = 1 + t`; `c0 - c†` lies in the range of `F'(c†)*`.
pub fn smooth_initial_guess(m: usize) -> GridFunction {
    GridFunction::from_fn(m, |t| 1.0 + t)
}

/// `c0 = 2 - t`; `c0 - c†` has no useful source representation.
pub fn rough_initial_guess(m: usize) -> GridFunction {
    GridFunction::from_fn(m, |t| 2.0 - t)
}
