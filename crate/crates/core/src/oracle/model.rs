use serde::{Deserialize, Serialize};

use super::{ConstraintFamily, RoundOracle};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, sub, Mat};

/// Curvature matrix of a quadratic model.
#[derive(Debug, Clone, PartialEq)]
pub enum Theta {
    Zero,
    ScalarIdentity(f64),
    /// Symmetric `n × n`.
    Dense(Mat),
}

impl Theta {
    /// Collapses `c·I` to [`Theta::ScalarIdentity`] and the zero matrix to [`Theta::Zero`].
    pub fn from_symmetric(m: Mat) -> Theta {
        let n = m.rows();
        let c = m.get(0, 0);
        let scalar = (0..n).all(|i| (0..n).all(|j| m.get(i, j) == if i == j { c } else { 0.0 }));
        match (scalar, c == 0.0) {
            (true, true) => Theta::Zero,
            (true, false) => Theta::ScalarIdentity(c),
            _ => Theta::Dense(m),
        }
    }

    pub fn apply(&self, d: &[f64]) -> Vec<f64> {
        match self {
            Theta::Zero => vec![0.0; d.len()],
            Theta::ScalarIdentity(c) => d.iter().map(|v| c * v).collect(),
            Theta::Dense(m) => m.mul_vec(d),
        }
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        match self {
            Theta::Zero => 0.0,
            Theta::ScalarIdentity(c) => c.abs(),
            Theta::Dense(m) => m.sym_spectral_norm(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Theta::Zero => 0.0,
            Theta::ScalarIdentity(c) => *c,
            Theta::Dense(m) => m.sym_eigenvalues()[0],
        }
    }
}

/// `q(x) = c + ⟨g, x − x^t⟩ + ½⟨Θ(x − x^t), x − x^t⟩`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadModel {
    pub anchor: Vec<f64>,
    pub constant: f64,
    pub grad: Vec<f64>,
    pub theta: Theta,
}

impl QuadModel {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = sub(x, &self.anchor);
        let td = self.theta.apply(&d);
        self.constant + dot(&self.grad, &d) + 0.5 * dot(&td, &d)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = sub(x, &self.anchor);
        let mut g = self.theta.apply(&d);
        for (gi, ci) in g.iter_mut().zip(&self.grad) {
            *gi += ci;
        }
        g
    }

    pub fn eval_with_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = sub(x, &self.anchor);
        let td = self.theta.apply(&d);
        let value = self.constant + dot(&self.grad, &d) + 0.5 * dot(&td, &d);
        let g = td.iter().zip(&self.grad).map(|(a, b)| a + b).collect();
        (value, g)
    }
}

/// The surrogates `q^t_0` (objective) and `q^t_i` (constraints) of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundModels {
    pub objective: QuadModel,
    pub constraints: Vec<QuadModel>,
}

impl RoundModels {
    pub fn anchor(&self) -> &[f64] {
        &self.objective.anchor
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|q| q.eval(x)).collect()
    }

    /// Largest `‖Θ^t_i‖` over the objective and constraint models.
    pub fn theta_bound(&self) -> f64 {
        self.constraints
            .iter()
            .map(|q| q.theta.norm())
            .fold(self.objective.theta.norm(), f64::max)
    }
}

/// How the curvature matrices `Θ^t_i` are chosen each round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ThetaStrategy {
    /// All curvatures zero. Constraints must be convex.
    #[default]
    Zero,
    /// `Θ₀ = η₀ I`, `Θ_i = 0`. Constraints must be convex.
    Scalar { eta0: f64 },
    /// `Θ₀ = η₀ I`; `Θ_i = −L_g I` for non-convex `g_i`, zero otherwise.
    ConcaveMinorant { eta0: f64 },
    /// `Θ₀ = ∇²f_t` for convex quadratic losses; constraint curvature as in `ConcaveMinorant`.
    LossHessian,
}

impl ThetaStrategy {
    fn requires_convex_constraints(&self) -> bool {
        matches!(self, ThetaStrategy::Zero | ThetaStrategy::Scalar { .. })
    }

    /// Bound `κ_q` on `‖Θ^t_i‖` implied by the strategy.
    pub fn kappa_q(&self, constraints: &dyn ConstraintFamily, l_f: f64) -> f64 {
        let minorant = if constraints.all_convex() {
            0.0
        } else {
            constraints.constants().l_g
        };
        match self {
            ThetaStrategy::Zero => 0.0,
            ThetaStrategy::Scalar { eta0 } => *eta0,
            ThetaStrategy::ConcaveMinorant { eta0 } => eta0.max(minorant),
            ThetaStrategy::LossHessian => l_f.max(minorant),
        }
    }
}

/// Builds the round surrogates at `x_t`, checking that the strategy fits the problem.
pub fn build_models(
    loss: &dyn RoundOracle,
    constraints: &dyn ConstraintFamily,
    x_t: &[f64],
    strategy: ThetaStrategy,
) -> Result<RoundModels> {
    if strategy.requires_convex_constraints() {
        let bad: Vec<usize> = constraints
            .convex_flags()
            .iter()
            .enumerate()
            .filter(|(_, c)| !**c)
            .map(|(i, _)| i + 1)
            .collect();
        if !bad.is_empty() {
            return Err(Error::StrategyAssumptionViolation(format!(
                "{strategy:?} needs convex constraints, but g{bad:?} are not"
            )));
        }
    }
    build_models_unchecked(loss, constraints, x_t, strategy)
}

/// Like [`build_models`] but skips the convexity requirement, so that an
/// audit can observe what the strategy does on an unsuitable problem.
pub fn build_models_unchecked(
    loss: &dyn RoundOracle,
    constraints: &dyn ConstraintFamily,
    x_t: &[f64],
    strategy: ThetaStrategy,
) -> Result<RoundModels> {
    let n = x_t.len();
    check_dim(loss.dim(), n)?;
    check_dim(constraints.dim(), n)?;

    let objective_theta = match strategy {
        ThetaStrategy::Zero => Theta::Zero,
        ThetaStrategy::Scalar { eta0 } | ThetaStrategy::ConcaveMinorant { eta0 } => {
            if !(eta0.is_finite() && eta0 >= 0.0) {
                return Err(Error::StrategyAssumptionViolation(format!(
                    "eta0 = {eta0} must be nonnegative"
                )));
            }
            if eta0 == 0.0 {
                Theta::Zero
            } else {
                Theta::ScalarIdentity(eta0)
            }
        }
        ThetaStrategy::LossHessian => match loss.quadratic_hessian() {
            Some(h) => Theta::from_symmetric(h),
            None => {
                return Err(Error::StrategyAssumptionViolation(
                    "LossHessian needs a convex quadratic loss".into(),
                ))
            }
        },
    };
    let objective = QuadModel {
        anchor: x_t.to_vec(),
        constant: loss.value(x_t),
        grad: loss.gradient(x_t),
        theta: objective_theta,
    };

    let values = constraints.values(x_t);
    let jac = constraints.jacobian(x_t);
    let flags = constraints.convex_flags();
    let l_g = constraints.constants().l_g;
    let constraint_models = values
        .iter()
        .enumerate()
        .map(|(i, gi)| {
            let theta = match strategy {
                ThetaStrategy::ConcaveMinorant { .. } | ThetaStrategy::LossHessian if !flags[i] && l_g > 0.0 => {
                    Theta::ScalarIdentity(-l_g)
                }
                _ => Theta::Zero,
            };
            QuadModel {
                anchor: x_t.to_vec(),
                constant: *gi,
                grad: jac.row(i).to_vec(),
                theta,
            }
        })
        .collect();
    Ok(RoundModels {
        objective,
        constraints: constraint_models,
    })
}
