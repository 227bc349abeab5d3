//! Problem definition: the loss stream, the constraint family, quadratic
//! surrogates and the structural constants that drive the regret bounds.

mod audit;
mod constants;
mod model;

pub use audit::{assumption_audit, Assumption, AuditCheck, AuditInput, AuditReport};
pub use constants::{ConstantsSnapshot, StructuralConstants};
pub use model::{build_models, build_models_unchecked, QuadModel, RoundModels, Theta, ThetaStrategy};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{SimpleSet, FEASIBILITY_TOL};
use crate::linalg::Mat;

/// One round's loss `f_t`.
pub trait RoundOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// The constant Hessian when the loss is a convex quadratic, `None` otherwise.
    fn quadratic_hessian(&self) -> Option<Mat> {
        None
    }
}

/// Declared Lipschitz constants of every loss in a stream over the feasible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants {
    /// Bound on `|f_t(x) − f_t(x')| / ‖x − x'‖` and on `‖∇f_t‖`.
    pub kappa_f: f64,
    /// Lipschitz constant of `∇f_t`.
    pub l_f: f64,
}

/// Online source of losses. Losses are consumed strictly in round order.
pub trait LossStream: Send {
    fn dim(&self) -> usize;
    fn constants(&self) -> LossConstants;
    fn next_loss(&mut self) -> Box<dyn RoundOracle>;
}

/// Declared constants of a constraint family over the feasible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintConstants {
    pub kappa_g: f64,
    pub nu_g: f64,
    pub l_g: f64,
}

/// The shared long-term constraints `g(x) ≤ 0`.
pub trait ConstraintFamily: Send + Sync {
    fn dim(&self) -> usize;
    /// Number of constraints `p`.
    fn count(&self) -> usize;
    fn values(&self, x: &[f64]) -> Vec<f64>;
    /// `p × n` Jacobian.
    fn jacobian(&self, x: &[f64]) -> Mat;
    fn convex_flags(&self) -> Vec<bool>;
    fn constants(&self) -> ConstraintConstants;
    /// A point of the set with every constraint strictly negative.
    fn slater_point(&self) -> Vec<f64>;

    fn all_convex(&self) -> bool {
        self.convex_flags().iter().all(|c| *c)
    }
}

/// `ε₀ = min_i −g_i(x̂)` at the Slater point.
pub fn slater_margin(constraints: &dyn ConstraintFamily) -> f64 {
    constraints
        .values(&constraints.slater_point())
        .iter()
        .fold(f64::INFINITY, |acc, g| acc.min(-g))
}

/// A complete online problem instance.
pub struct Problem {
    pub set: SimpleSet,
    pub constraints: Box<dyn ConstraintFamily>,
    pub stream: Box<dyn LossStream>,
    /// Initial decision `x¹`.
    pub x1: Vec<f64>,
}

impl Problem {
    pub fn new(
        set: SimpleSet,
        constraints: Box<dyn ConstraintFamily>,
        stream: Box<dyn LossStream>,
        x1: Vec<f64>,
    ) -> Result<Self> {
        let n = set.dim();
        check_dim(n, constraints.dim())?;
        check_dim(n, stream.dim())?;
        check_dim(n, x1.len())?;
        let violation = set.infeasibility(&x1);
        if violation > FEASIBILITY_TOL {
            return Err(Error::Infeasible { violation });
        }
        let slater = constraints.slater_point();
        check_dim(n, slater.len())?;
        let violation = set.infeasibility(&slater);
        if violation > FEASIBILITY_TOL {
            return Err(Error::Infeasible { violation });
        }
        let margin = slater_margin(constraints.as_ref());
        if margin.is_nan() || margin <= 0.0 {
            return Err(Error::InvalidConstant {
                name: "slater_margin",
                value: margin,
            });
        }
        Ok(Problem {
            set,
            constraints,
            stream,
            x1,
        })
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }
}
