use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteOperators;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::reduced::ReducedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Gradient,
    Direct,
}

impl SolveMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(Self::Gradient),
            "direct" => Ok(Self::Direct),
            other => Err(Error::Config(format!("unknown solve mode `{other}` (gradient|direct)"))),
        }
    }
}

/// Settings of the reduced Tikhonov inversion.
#[derive(Debug, Clone)]
pub struct InverseConfig {
    pub lambda: f64,
    /// Step size; `None` selects `1 / (s_max^2 + lambda)`.
    pub beta: Option<f64>,
    pub max_iters: usize,
    /// Gradient-norm stopping threshold; `None` selects
    /// `1e-10 (|g_0| + 1)`.
    pub grad_tol: Option<f64>,
    pub mode: SolveMode,
    /// Starting guess; `None` is the zero field.
    pub initial: Option<Field>,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            beta: None,
            max_iters: 10_000,
            grad_tol: None,
            mode: SolveMode::Direct,
            initial: None,
        }
    }
}

impl InverseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::invalid(format!("beta must be positive, got {b}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if let Some(t) = self.grad_tol {
            if !(t >= 0.0) {
                return Err(Error::invalid(format!("grad_tol must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// Outcome of a reduced inversion.
#[derive(Debug, Clone)]
pub struct InversionResult {
    pub recovered: Field,
    pub coefficients: DVector<f64>,
    /// `J` at every iterate, starting with the initial guess.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub lambda: f64,
    /// Step size used; `None` for the direct solve.
    pub beta: Option<f64>,
    pub final_objective: f64,
    pub converged: bool,
}

fn check_dims(model: &ReducedModel, v: &DVector<f64>) -> Result<()> {
    if v.len() != model.n_pod() {
        return Err(Error::DimensionMismatch {
            expected: model.n_pod(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `J(f) = 1/2 |S f - m|^2 + lambda/2 |f|^2` in reduced coordinates.
pub fn objective(model: &ReducedModel, f_r: &DVector<f64>, m_r: &DVector<f64>, lambda: f64) -> Result<f64> {
    check_dims(model, f_r)?;
    check_dims(model, m_r)?;
    let res = model.spod_matrix() * f_r - m_r;
    Ok(0.5 * res.norm_squared() + 0.5 * lambda * f_r.norm_squared())
}

/// `S^T (S f - m) + lambda f`.
pub fn gradient_of_j(model: &ReducedModel, f_r: &DVector<f64>, m_r: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_dims(model, f_r)?;
    check_dims(model, m_r)?;
    let s = model.spod_matrix();
    let res = s * f_r - m_r;
    Ok(s.tr_mul(&res) + f_r * lambda)
}

fn singular_range(s: &DMatrix<f64>) -> (f64, f64) {
    let sv = s.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, max)
}

fn initial_coordinates(model: &ReducedModel, ops: &DiscreteOperators, cfg: &InverseConfig) -> Result<DVector<f64>> {
    match &cfg.initial {
        Some(f0) => {
            f0.check_grid(ops.grid())?;
            Ok(model.basis().coordinates(f0.values(), ops))
        }
        None => Ok(DVector::zeros(model.n_pod())),
    }
}

fn finish(model: &ReducedModel, ops: &DiscreteOperators, coefficients: &DVector<f64>) -> Result<Field> {
    Field::from_values(ops.grid(), model.basis().expand(coefficients))
}

/// Gradient iteration `f_{k+1} = f_k - beta dJ(f_k)` in `span(Psi)`.
pub fn tikhonov_gradient_descent(model: &ReducedModel, m: &Field, ops: &DiscreteOperators, cfg: &InverseConfig) -> Result<InversionResult> {
    cfg.validate()?;
    m.check_grid(ops.grid())?;
    let lambda = cfg.lambda;
    let (_, s_max) = singular_range(model.spod_matrix());
    let bound = 2.0 / (s_max * s_max + lambda);
    let beta = cfg.beta.unwrap_or(1.0 / (s_max * s_max + lambda));
    if beta >= bound {
        return Err(Error::StepTooLarge { step: beta, bound });
    }
    let m_r = model.basis().coordinates(m.values(), ops);
    let mut f = initial_coordinates(model, ops, cfg)?;
    let mut g = gradient_of_j(model, &f, &m_r, lambda)?;
    let tol = cfg.grad_tol.unwrap_or(1e-10 * (g.norm() + 1.0));
    let mut history = vec![objective(model, &f, &m_r, lambda)?];
    let mut iterations = 0;
    let mut converged = g.norm() <= tol;
    while !converged && iterations < cfg.max_iters {
        f.axpy(-beta, &g, 1.0);
        g = gradient_of_j(model, &f, &m_r, lambda)?;
        history.push(objective(model, &f, &m_r, lambda)?);
        iterations += 1;
        converged = g.norm() <= tol;
    }
    let final_objective = *history.last().expect("history holds J(f_0)");
    Ok(InversionResult {
        recovered: finish(model, ops, &f)?,
        coefficients: f,
        history,
        iterations,
        lambda,
        beta: Some(beta),
        final_objective,
        converged,
    })
}

/// Reduced coordinates of the exact minimizer: `(S^T S + lambda I) f = S^T m_r`.
pub fn tikhonov_direct_coordinates(model: &ReducedModel, m_r: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_dims(model, m_r)?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let s = model.spod_matrix();
    let n = model.n_pod();
    if lambda == 0.0 {
        let (s_min, s_max) = singular_range(s);
        if n == 0 || s_min <= 1e-14 * s_max {
            return Err(Error::SingularNormalMatrix);
        }
    }
    let normal = s.tr_mul(s) + DMatrix::identity(n, n) * lambda;
    let chol = normal.cholesky().ok_or(Error::SingularNormalMatrix)?;
    Ok(chol.solve(&s.tr_mul(m_r)))
}

/// Closed-form reduced Tikhonov minimizer.
pub fn tikhonov_direct(model: &ReducedModel, m: &Field, ops: &DiscreteOperators, lambda: f64) -> Result<InversionResult> {
    m.check_grid(ops.grid())?;
    let m_r = model.basis().coordinates(m.values(), ops);
    let f = tikhonov_direct_coordinates(model, &m_r, lambda)?;
    let j = objective(model, &f, &m_r, lambda)?;
    Ok(InversionResult {
        recovered: finish(model, ops, &f)?,
        coefficients: f,
        history: vec![j],
        iterations: 0,
        lambda,
        beta: None,
        final_objective: j,
        converged: true,
    })
}

/// Dispatches on `cfg.mode`.
pub fn invert(model: &ReducedModel, m: &Field, ops: &DiscreteOperators, cfg: &InverseConfig) -> Result<InversionResult> {
    cfg.validate()?;
    match cfg.mode {
        SolveMode::Gradient => tikhonov_gradient_descent(model, m, ops, cfg),
        SolveMode::Direct => tikhonov_direct(model, m, ops, cfg.lambda),
    }
}
