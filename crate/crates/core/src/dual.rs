//! Projection version of the method for convex constraints.
//!
//! With `Θ_i = 0` and `Θ₀ = η I` the proximal subproblem has a concave dual
//! over `y ≥ 0` whose only nonsmooth-looking piece is a squared distance to
//! the feasible set. Solving the dual by projected gradient ascent and
//! projecting once recovers the primal step.

use crate::error::{check_dim, Error, Result};
use crate::geometry::{SimpleSet, WeightedMetric};
use crate::linalg::{axpy, dist, dot, norm, norm_sq, positive_part, sub, Mat};
use crate::opmm::InnerSolverParams;
use crate::oracle::{RoundModels, Theta};

/// Dual ascent state: `y ≥ 0`, `ω(y)` and `∇ω(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub y: Vec<f64>,
    pub omega_value: f64,
    pub omega_gradient: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub state: DualState,
    /// `‖y − [y + η∇ω(y)]₊‖ / η`
    pub residual: f64,
    pub tol: f64,
    pub iterations: usize,
}

/// One round's dual problem.
#[derive(Debug, Clone)]
pub struct DualProblem<'a> {
    set: &'a SimpleSet,
    x_t: Vec<f64>,
    f_value: f64,
    grad_f: Vec<f64>,
    g: Vec<f64>,
    jac: Mat,
    lambda: Vec<f64>,
    sigma: f64,
    alpha: f64,
    eta: f64,
}

impl<'a> DualProblem<'a> {
    /// Builds the dual from round models. Requires convex constraints,
    /// `Θ_i = 0` and a scalar `Θ₀ = η I` with `η ≥ 0`.
    pub fn from_models(
        set: &'a SimpleSet,
        models: &RoundModels,
        convex_flags: &[bool],
        lambda: &[f64],
        sigma: f64,
        alpha: f64,
    ) -> Result<Self> {
        if let Some(i) = convex_flags.iter().position(|c| !c) {
            return Err(Error::ConvexityRequired(format!("g{} is not convex", i + 1)));
        }
        let eta = match models.objective.theta {
            Theta::Zero => 0.0,
            Theta::ScalarIdentity(e) if e >= 0.0 => e,
            ref other => {
                return Err(Error::ConvexityRequired(format!(
                    "objective curvature {other:?} is not a nonnegative multiple of I"
                )))
            }
        };
        if let Some(i) = models.constraints.iter().position(|q| q.theta != Theta::Zero) {
            return Err(Error::ConvexityRequired(format!(
                "constraint model {} is curved",
                i + 1
            )));
        }
        let rows: Vec<Vec<f64>> = models.constraints.iter().map(|q| q.grad.clone()).collect();
        let n = set.dim();
        let jac = if rows.is_empty() {
            Mat::zeros(0, n)
        } else {
            Mat::from_rows(&rows)
        };
        Self::from_parts(
            set,
            models.anchor().to_vec(),
            models.objective.constant,
            models.objective.grad.clone(),
            models.constraints.iter().map(|q| q.constant).collect(),
            jac,
            lambda.to_vec(),
            sigma,
            alpha,
            eta,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        set: &'a SimpleSet,
        x_t: Vec<f64>,
        f_value: f64,
        grad_f: Vec<f64>,
        g: Vec<f64>,
        jac: Mat,
        lambda: Vec<f64>,
        sigma: f64,
        alpha: f64,
        eta: f64,
    ) -> Result<Self> {
        let n = set.dim();
        check_dim(n, x_t.len())?;
        check_dim(n, grad_f.len())?;
        check_dim(g.len(), lambda.len())?;
        check_dim(g.len(), jac.rows())?;
        check_dim(n, jac.cols())?;
        for (name, v) in [("sigma", sigma), ("alpha", alpha)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConstant { name, value: v });
            }
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidConstant {
                name: "eta",
                value: eta,
            });
        }
        if lambda.iter().any(|l| *l < 0.0) {
            return Err(Error::InvalidConstant {
                name: "lambda",
                value: lambda.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
        Ok(DualProblem {
            set,
            x_t,
            f_value,
            grad_f,
            g,
            jac,
            lambda,
            sigma,
            alpha,
            eta,
        })
    }

    /// `α + η`, the scalar of `H = (α + η) I`.
    pub fn h(&self) -> f64 {
        self.alpha + self.eta
    }

    /// `x_t − H⁻¹(∇f_t(x_t) + σ Jᵀ y)` together with `∇f_t(x_t) + σ Jᵀ y`.
    fn shifted(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut v = self.grad_f.clone();
        axpy(&mut v, self.sigma, &self.jac.tr_mul_vec(y));
        let h = self.h();
        let z = self.x_t.iter().zip(&v).map(|(x, vi)| x - vi / h).collect();
        (z, v)
    }

    /// `ω(y)` and `∇ω(y)`.
    pub fn objective(&self, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.g.len(), y.len())?;
        let h = self.h();
        let (z, v) = self.shifted(y);
        let (half_dist_sq, _) = self.set.weighted_dist_sq(&WeightedMetric::ScalarIdentity(h), &z)?;
        let shift: Vec<f64> = self
            .lambda
            .iter()
            .zip(&self.g)
            .map(|(l, g)| l + self.sigma * g)
            .collect();
        let value = -0.5 * self.sigma * norm_sq(y) + dot(y, &shift) - norm_sq(&v) / (2.0 * h) + half_dist_sq;

        let proj = self.set.project(&z)?;
        let jd = self.jac.mul_vec(&sub(&self.x_t, &proj));
        let grad = (0..y.len())
            .map(|i| -self.sigma * y[i] + shift[i] - self.sigma * jd[i])
            .collect();
        Ok((value, grad))
    }

    pub fn state(&self, y: Vec<f64>) -> Result<DualState> {
        let (omega_value, omega_gradient) = self.objective(&y)?;
        Ok(DualState {
            y,
            omega_value,
            omega_gradient,
        })
    }

    /// Projected gradient ascent over `y ≥ 0`, warm started at `λ`.
    pub fn solve(&self, inner: &InnerSolverParams) -> Result<DualSolution> {
        let sigma = self.sigma;
        // ∇ω is Lipschitz with constant σ + σ²‖J‖²/h.
        let lip = sigma + sigma * sigma * norm_sq(self.jac.as_slice()) / self.h();
        let step = 1.0 / lip;
        let mut y = self.lambda.clone();
        let (mut value, mut grad) = self.objective(&y)?;
        let tol = if inner.relative {
            inner.tol * (1.0 + norm(&grad))
        } else {
            inner.tol
        };
        let mut best: Option<(f64, Vec<f64>, f64, Vec<f64>)> = None;
        for k in 0..=inner.max_iters {
            let next: Vec<f64> = y
                .iter()
                .zip(&grad)
                .map(|(yi, gi)| positive_part(yi + step * gi))
                .collect();
            let residual = dist(&next, &y) / step;
            if best.as_ref().is_none_or(|b| residual < b.0) {
                best = Some((residual, y.clone(), value, grad.clone()));
            }
            if residual <= tol {
                return Ok(DualSolution {
                    state: DualState {
                        y,
                        omega_value: value,
                        omega_gradient: grad,
                    },
                    residual,
                    tol,
                    iterations: k,
                });
            }
            if k == inner.max_iters {
                break;
            }
            y = next;
            (value, grad) = self.objective(&y)?;
        }
        let (residual, y, _, _) = best.expect("at least one iterate");
        Err(Error::MaxItersExceeded {
            best: y,
            residual,
            tol,
            iterations: inner.max_iters,
        })
    }

    /// `x⁺ = Π_C(x_t − H⁻¹(∇f_t(x_t) + σ Jᵀ y))`
    pub fn recover_primal(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.g.len(), y.len())?;
        let (z, _) = self.shifted(y);
        self.set.weighted_project(&WeightedMetric::ScalarIdentity(self.h()), &z)
    }

    /// Primal objective of the linearized subproblem (without the constant `−‖λ‖²/2σ`),
    /// the quantity whose optimum equals `ω(y*) + f_t(x_t)`.
    pub fn primal_objective(&self, x: &[f64]) -> f64 {
        let d = sub(x, &self.x_t);
        let jd = self.jac.mul_vec(&d);
        let penalty: f64 = (0..self.g.len())
            .map(|i| positive_part(self.lambda[i] + self.sigma * (self.g[i] + jd[i])).powi(2))
            .sum();
        self.f_value + dot(&self.grad_f, &d) + 0.5 * self.h() * norm_sq(&d) + penalty / (2.0 * self.sigma)
    }

    /// `f_t(x_t)`, the constant dropped from `ω`.
    pub fn f_value(&self) -> f64 {
        self.f_value
    }
}

/// `λ⁺ = [∇ω(y*) + σ y*]₊`
pub fn recover_multiplier(omega_gradient: &[f64], sigma: f64, y_star: &[f64]) -> Vec<f64> {
    omega_gradient
        .iter()
        .zip(y_star)
        .map(|(g, y)| positive_part(g + sigma * y))
        .collect()
}

#[cfg(test)]
mod tests;
