//! The online proximal method of multipliers: per-round proximal
//! augmented-Lagrangian step, multiplier update and KKT certificate.

mod run;

pub use run::{opmm_run, RoundTrace, Route, RunSummary, Runner};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::SimpleSet;
use crate::linalg::{axpy, dist, norm, norm_sq, positive_part, sub};
use crate::oracle::{RoundModels, ThetaStrategy};
use crate::pgd::{self, PgdSettings, DEFAULT_SHRINK, DEFAULT_SUFFICIENT_DECREASE};

/// Settings of the inner projected-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerSolverParams {
    pub max_iters: usize,
    /// Residual tolerance. When `relative` is set the effective tolerance is
    /// `tol · (1 + ‖∇F(x_t)‖)`.
    pub tol: f64,
    pub relative: bool,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for InnerSolverParams {
    fn default() -> Self {
        InnerSolverParams {
            max_iters: 10_000,
            tol: 1e-9,
            relative: true,
            shrink: DEFAULT_SHRINK,
            sufficient_decrease: DEFAULT_SUFFICIENT_DECREASE,
        }
    }
}

/// Algorithm inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoParams {
    pub sigma: f64,
    pub alpha: f64,
    /// Horizon `T`.
    pub horizon: usize,
    pub theta_strategy: ThetaStrategy,
    pub inner: InnerSolverParams,
    /// Abort on inner-solver failure instead of continuing with the best iterate.
    pub strict: bool,
}

impl AlgoParams {
    /// `σ = T^{-1/4}`, `α = T^{1/4}`.
    pub fn theorem1(horizon: usize, theta_strategy: ThetaStrategy) -> Self {
        let t = horizon as f64;
        Self::custom(t.powf(-0.25), t.powf(0.25), horizon, theta_strategy)
    }

    /// `σ = T^{-1/2}`, `α = T^{1/2}` for convex quadratic losses.
    pub fn quadratic(horizon: usize, theta_strategy: ThetaStrategy) -> Self {
        let t = horizon as f64;
        Self::custom(t.powf(-0.5), t.powf(0.5), horizon, theta_strategy)
    }

    pub fn custom(sigma: f64, alpha: f64, horizon: usize, theta_strategy: ThetaStrategy) -> Self {
        AlgoParams {
            sigma,
            alpha,
            horizon,
            theta_strategy,
            inner: InnerSolverParams::default(),
            strict: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("alpha", self.alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConstant { name, value: v });
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConstant {
                name: "horizon",
                value: 0.0,
            });
        }
        if self.inner.tol.is_nan() || self.inner.tol <= 0.0 || !(self.inner.shrink > 0.0 && self.inner.shrink < 1.0) {
            return Err(Error::InvalidConstant {
                name: "inner",
                value: self.inner.tol,
            });
        }
        Ok(())
    }
}

/// Algorithm state `(t, x^t, λ^t)` plus the last round's models and certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub t: usize,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub last_models: Option<RoundModels>,
    pub w_cert: Option<Vec<f64>>,
}

impl IterateState {
    pub fn initial(x1: Vec<f64>, p: usize) -> Self {
        IterateState {
            t: 1,
            x: x1,
            lambda: vec![0.0; p],
            last_models: None,
            w_cert: None,
        }
    }
}

/// Augmented Lagrangian `q₀(x) + (1/2σ)[Σ[λ_i + σq_i(x)]₊² − ‖λ‖²]` and its gradient.
pub fn aug_lagrangian(models: &RoundModels, lambda: &[f64], sigma: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let (mut value, mut grad) = models.objective.eval_with_gradient(x);
    let mut penalty = -norm_sq(lambda);
    for (q, l) in models.constraints.iter().zip(lambda) {
        let (qv, qg) = q.eval_with_gradient(x);
        let shifted = positive_part(l + sigma * qv);
        penalty += shifted * shifted;
        if shifted > 0.0 {
            axpy(&mut grad, shifted, &qg);
        }
    }
    value += penalty / (2.0 * sigma);
    (value, grad)
}

/// Proximal subproblem objective `F(x) = L_σ(x, λ) + (α/2)‖x − x_t‖²`.
pub fn prox_objective(
    models: &RoundModels,
    lambda: &[f64],
    sigma: f64,
    alpha: f64,
    x_t: &[f64],
    x: &[f64],
) -> (f64, Vec<f64>) {
    let (mut value, mut grad) = aug_lagrangian(models, lambda, sigma, x);
    let d = sub(x, x_t);
    value += 0.5 * alpha * norm_sq(&d);
    axpy(&mut grad, alpha, &d);
    (value, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub x: Vec<f64>,
    pub residual: f64,
    /// Effective residual tolerance used.
    pub tol: f64,
    pub iterations: usize,
}

/// Effective inner tolerance at the anchor.
pub fn effective_tol(
    models: &RoundModels,
    lambda: &[f64],
    sigma: f64,
    alpha: f64,
    x_t: &[f64],
    inner: &InnerSolverParams,
) -> f64 {
    if inner.relative {
        let g0 = prox_objective(models, lambda, sigma, alpha, x_t, x_t).1;
        inner.tol * (1.0 + norm(&g0))
    } else {
        inner.tol
    }
}

/// Solves `min_{x∈C} L_σ(x, λ) + (α/2)‖x − x_t‖²` by projected gradient.
pub fn solve_subproblem(
    set: &SimpleSet,
    models: &RoundModels,
    lambda: &[f64],
    sigma: f64,
    alpha: f64,
    x_t: &[f64],
    inner: &InnerSolverParams,
) -> Result<SubproblemSolution> {
    check_dim(set.dim(), x_t.len())?;
    check_dim(models.constraints.len(), lambda.len())?;
    let tol = effective_tol(models, lambda, sigma, alpha, x_t, inner);
    // Lipschitz estimate of ∇F at the anchor for the first trial step.
    let curvature = alpha
        + models.objective.theta.norm()
        + models
            .constraints
            .iter()
            .zip(lambda)
            .map(|(q, l)| sigma * norm_sq(&q.grad) + (l + sigma * q.constant).abs() * q.theta.norm())
            .sum::<f64>();
    let settings = PgdSettings {
        tol,
        max_iters: inner.max_iters,
        initial_step: 1.0 / curvature,
        shrink: inner.shrink,
        sufficient_decrease: inner.sufficient_decrease,
    };
    let out = pgd::minimize(
        set,
        |x| prox_objective(models, lambda, sigma, alpha, x_t, x),
        x_t,
        settings,
    );
    if out.converged {
        Ok(SubproblemSolution {
            x: out.x,
            residual: out.residual,
            tol,
            iterations: out.iterations,
        })
    } else {
        Err(Error::MaxItersExceeded {
            best: out.x,
            residual: out.residual,
            tol,
            iterations: out.iterations,
        })
    }
}

/// `λ⁺_i = [λ_i + σ q_i(x_next)]₊`
pub fn update_multipliers(lambda: &[f64], sigma: f64, models: &RoundModels, x_next: &[f64]) -> Vec<f64> {
    lambda
        .iter()
        .zip(&models.constraints)
        .map(|(l, q)| positive_part(l + sigma * q.eval(x_next)))
        .collect()
}

/// Normal-cone element from the subproblem's stationarity identity:
/// `w = −[∇q₀(x⁺) + Σ λ⁺_i ∇q_i(x⁺) + α(x⁺ − x_t)]`.
pub fn recover_w(models: &RoundModels, lambda_next: &[f64], alpha: f64, x_t: &[f64], x_next: &[f64]) -> Vec<f64> {
    let mut s = models.objective.gradient(x_next);
    for (q, l) in models.constraints.iter().zip(lambda_next) {
        axpy(&mut s, *l, &q.gradient(x_next));
    }
    axpy(&mut s, alpha, &sub(x_next, x_t));
    s.iter().map(|v| -v).collect()
}

/// `|‖λ⁺‖ − ‖λ‖|`
pub fn multiplier_step(lambda: &[f64], lambda_next: &[f64]) -> f64 {
    (norm(lambda_next) - norm(lambda)).abs()
}

/// `‖λ − [λ + σ g]₊‖`
pub fn complementarity_residual(lambda: &[f64], sigma: f64, g: &[f64]) -> f64 {
    let shifted: Vec<f64> = lambda
        .iter()
        .zip(g)
        .map(|(l, gi)| positive_part(l + sigma * gi))
        .collect();
    dist(lambda, &shifted)
}
