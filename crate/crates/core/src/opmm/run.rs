use serde::{Deserialize, Serialize};

use super::{
    complementarity_residual, multiplier_step, recover_w, solve_subproblem, update_multipliers, AlgoParams,
    IterateState,
};
use crate::dual::{recover_multiplier, DualProblem};
use crate::error::{Error, Result};
use crate::linalg::{dist, norm};
use crate::metrics::{theory_bounds, AggregateQuadratic, PendingRound, RegretLedger, Regrets, TheoryBounds};
use crate::oracle::{build_models, Problem, RoundOracle, StructuralConstants, ThetaStrategy};

/// Slack on the per-round multiplier step bound.
pub const STEP_BOUND_SLACK: f64 = 1e-9;

/// How each round's subproblem is solved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Projected gradient on the proximal augmented Lagrangian.
    #[default]
    Primal,
    /// Dual ascent with primal and multiplier recovery. Convex constraints only.
    Dual,
}

/// Extra per-round output of the dual route.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRound {
    pub y: Vec<f64>,
    pub omega_gradient: Vec<f64>,
    /// `‖[λ + σ q(x^{t+1})]₊ − [∇ω(y) + σy]₊‖`
    pub identity_gap: f64,
    /// Primal subproblem value at `x^{t+1}` minus `ω(y) + f_t(x^t)`.
    pub duality_gap: f64,
    pub primal_value: f64,
    pub dual_value: f64,
}

/// Everything observed in one round `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub t: usize,
    pub x: Vec<f64>,
    pub x_next: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_next: Vec<f64>,
    pub w: Vec<f64>,
    /// `f_t(x^t)`
    pub f_value: f64,
    /// `g(x^t)`
    pub g: Vec<f64>,
    /// `g(x^{t+1})`
    pub g_next: Vec<f64>,
    /// Inner residual and the effective tolerance it was held to.
    pub residual: f64,
    pub inner_tol: f64,
    pub iterations: usize,
    /// The inner solver stopped at its iteration cap.
    pub solver_failed: bool,
    /// `|‖λ^{t+1}‖ − ‖λ^t‖|`
    pub multiplier_step: f64,
    pub step_bound_ok: bool,
    /// `‖λ^{t+1} − [λ^{t+1} + σ g(x^{t+1})]₊‖`
    pub complementarity: f64,
    /// Running `‖Σ H_τ‖ / t`.
    pub lagrangian_avg_norm: f64,
    /// Running `max_i Σ g_i(x^τ) / t`.
    pub violation_avg_max: f64,
    /// `min_s ψ(σ, α, s)`.
    pub psi_bound: f64,
    pub psi_ok: bool,
    pub dual: Option<DualRound>,
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rounds: usize,
    pub route: Route,
    pub params: AlgoParams,
    pub x1: Vec<f64>,
    pub final_state: IterateState,
    pub ledger: RegretLedger,
    pub regrets: Regrets,
    pub constants: StructuralConstants,
    pub bounds: TheoryBounds,
    /// `‖λ^1‖, ‖λ^2‖, …, ‖λ^{T+1}‖`
    pub lambda_norms: Vec<f64>,
    pub step_bound_ok: bool,
    pub psi_ok: bool,
    pub max_multiplier_step: f64,
    pub failed_rounds: Vec<usize>,
    /// Sum of the first `T` losses, when they are convex quadratics.
    pub aggregate: Option<AggregateQuadratic>,
}

/// Drives the online protocol one round at a time.
pub struct Runner {
    problem: Problem,
    params: AlgoParams,
    route: Route,
    constants: StructuralConstants,
    bounds: TheoryBounds,
    state: IterateState,
    loss: Box<dyn RoundOracle>,
    ledger: RegretLedger,
    aggregate: Option<AggregateQuadratic>,
    lambda_norms: Vec<f64>,
    step_bound_ok: bool,
    psi_ok: bool,
    max_multiplier_step: f64,
    failed_rounds: Vec<usize>,
}

impl Runner {
    pub fn new(mut problem: Problem, params: AlgoParams, route: Route) -> Result<Self> {
        params.validate()?;
        let cons = problem.constraints.as_ref();
        if route == Route::Dual {
            if !cons.all_convex() {
                return Err(Error::ConvexityRequired("constraint family is not convex".into()));
            }
            if !matches!(
                params.theta_strategy,
                ThetaStrategy::Zero | ThetaStrategy::Scalar { .. }
            ) {
                return Err(Error::ConvexityRequired(format!(
                    "{:?} does not give a scalar objective curvature",
                    params.theta_strategy
                )));
            }
        }
        let loss_constants = problem.stream.constants();
        let kappa_q = params.theta_strategy.kappa_q(cons, loss_constants.l_f);
        let constants = StructuralConstants::from_problem(cons, &problem.set, loss_constants, kappa_q)?;
        let bounds = theory_bounds(&constants, params.sigma, params.alpha, params.horizon)?;
        let n = problem.dim();
        let p = cons.count();
        let loss = problem.stream.next_loss();
        let aggregate = loss.quadratic_hessian().map(|_| AggregateQuadratic::new(n));
        let state = IterateState::initial(problem.x1.clone(), p);
        Ok(Runner {
            problem,
            params,
            route,
            constants,
            bounds,
            state,
            loss,
            ledger: RegretLedger::new(n, p),
            aggregate,
            lambda_norms: vec![0.0],
            step_bound_ok: true,
            psi_ok: true,
            max_multiplier_step: 0.0,
            failed_rounds: Vec::new(),
        })
    }

    pub fn state(&self) -> &IterateState {
        &self.state
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    pub fn constants(&self) -> &StructuralConstants {
        &self.constants
    }

    pub fn bounds(&self) -> &TheoryBounds {
        &self.bounds
    }

    pub fn params(&self) -> &AlgoParams {
        &self.params
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// The loss `f_t` of the round about to be played.
    pub fn current_loss(&self) -> &dyn RoundOracle {
        self.loss.as_ref()
    }

    /// Rounds completed so far.
    pub fn rounds(&self) -> usize {
        self.ledger.len()
    }

    pub fn is_done(&self) -> bool {
        self.rounds() >= self.params.horizon
    }

    /// Plays round `t`: commits `x^{t+1}`, updates the multipliers and only
    /// then draws `f_{t+1}`.
    pub fn step(&mut self) -> Result<RoundTrace> {
        let AlgoParams {
            sigma,
            alpha,
            theta_strategy,
            inner,
            strict,
            ..
        } = self.params;
        let set = &self.problem.set;
        let cons = self.problem.constraints.as_ref();
        let t = self.state.t;
        let x_t = self.state.x.clone();
        let lambda = self.state.lambda.clone();

        let models = build_models(self.loss.as_ref(), cons, &x_t, theta_strategy)?;
        let (x_next, lambda_next, residual, inner_tol, iterations, failed, dual) = match self.route {
            Route::Primal => {
                let (sol, failed) = match solve_subproblem(set, &models, &lambda, sigma, alpha, &x_t, &inner) {
                    Ok(s) => (s, false),
                    Err(Error::MaxItersExceeded {
                        best,
                        residual,
                        tol,
                        iterations,
                    }) if !strict => (
                        super::SubproblemSolution {
                            x: best,
                            residual,
                            tol,
                            iterations,
                        },
                        true,
                    ),
                    Err(e) => return Err(e),
                };
                let lambda_next = update_multipliers(&lambda, sigma, &models, &sol.x);
                (sol.x, lambda_next, sol.residual, sol.tol, sol.iterations, failed, None)
            }
            Route::Dual => {
                let dp = DualProblem::from_models(set, &models, &cons.convex_flags(), &lambda, sigma, alpha)?;
                let (state, residual, tol, iterations, failed) = match dp.solve(&inner) {
                    Ok(s) => (s.state, s.residual, s.tol, s.iterations, false),
                    Err(Error::MaxItersExceeded {
                        best,
                        residual,
                        tol,
                        iterations,
                    }) if !strict => (dp.state(best)?, residual, tol, iterations, true),
                    Err(e) => return Err(e),
                };
                let x_next = dp.recover_primal(&state.y)?;
                let lambda_next = recover_multiplier(&state.omega_gradient, sigma, &state.y);
                let direct = update_multipliers(&lambda, sigma, &models, &x_next);
                let primal_value = dp.primal_objective(&x_next);
                let dual_value = state.omega_value + dp.f_value();
                let info = DualRound {
                    identity_gap: dist(&direct, &lambda_next),
                    duality_gap: primal_value - dual_value,
                    primal_value,
                    dual_value,
                    y: state.y,
                    omega_gradient: state.omega_gradient,
                };
                (x_next, lambda_next, residual, tol, iterations, failed, Some(info))
            }
        };
        if failed {
            self.failed_rounds.push(t);
        }

        let w = recover_w(&models, &lambda_next, alpha, &x_t, &x_next);
        let g = models.constraints.iter().map(|q| q.constant).collect::<Vec<_>>();
        let g_next = cons.values(&x_next);
        let f_value = models.objective.constant;
        self.ledger.open(PendingRound {
            t,
            x: x_t.clone(),
            x_next: x_next.clone(),
            lambda_next: lambda_next.clone(),
            w: w.clone(),
            f_value,
            g: g.clone(),
            g_next: g_next.clone(),
            jac_next: cons.jacobian(&x_next),
            sigma,
        })?;

        // x^{t+1} is committed; reveal f_{t+1}
        let next_loss = self.problem.stream.next_loss();
        if t <= self.params.horizon {
            if let Some(agg) = self.aggregate.as_mut() {
                agg.add(self.loss.as_ref())?;
            }
        }
        let row = self.ledger.close(next_loss.gradient(&x_next))?.clone();
        self.loss = next_loss;

        let step = multiplier_step(&lambda, &lambda_next);
        let step_ok = step <= self.bounds.step_bound + STEP_BOUND_SLACK;
        let lambda_norm = norm(&lambda_next);
        let psi_ok = lambda_norm <= self.bounds.psi_min;
        self.step_bound_ok &= step_ok;
        self.psi_ok &= psi_ok;
        self.max_multiplier_step = self.max_multiplier_step.max(step);
        self.lambda_norms.push(lambda_norm);

        let trace = RoundTrace {
            t,
            x: x_t,
            x_next: x_next.clone(),
            lambda,
            lambda_next: lambda_next.clone(),
            complementarity: complementarity_residual(&lambda_next, sigma, &g_next),
            w: w.clone(),
            f_value,
            g,
            g_next,
            residual,
            inner_tol,
            iterations,
            solver_failed: failed,
            multiplier_step: step,
            step_bound_ok: step_ok,
            lagrangian_avg_norm: row.lagrangian_avg_norm,
            violation_avg_max: row.violation_avg_max,
            psi_bound: self.bounds.psi_min,
            psi_ok,
            dual,
        };
        self.state = IterateState {
            t: t + 1,
            x: x_next,
            lambda: lambda_next,
            last_models: Some(models),
            w_cert: Some(w),
        };
        Ok(trace)
    }

    pub fn finish(self) -> Result<RunSummary> {
        Ok(RunSummary {
            rounds: self.ledger.len(),
            route: self.route,
            params: self.params,
            x1: self.problem.x1.clone(),
            regrets: self.ledger.regrets()?,
            final_state: self.state,
            ledger: self.ledger,
            constants: self.constants,
            bounds: self.bounds,
            lambda_norms: self.lambda_norms,
            step_bound_ok: self.step_bound_ok,
            psi_ok: self.psi_ok,
            max_multiplier_step: self.max_multiplier_step,
            failed_rounds: self.failed_rounds,
            aggregate: self.aggregate,
        })
    }
}

/// Runs `T` rounds, handing every round to `sink`.
pub fn opmm_run(
    problem: Problem,
    params: AlgoParams,
    route: Route,
    sink: &mut dyn FnMut(&RoundTrace) -> Result<()>,
) -> Result<RunSummary> {
    let mut runner = Runner::new(problem, params, route)?;
    while !runner.is_done() {
        let trace = runner.step()?;
        sink(&trace)?;
    }
    runner.finish()
}
