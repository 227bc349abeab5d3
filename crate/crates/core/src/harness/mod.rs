//! Synthetic problems, run configuration and the drivers behind the CLI.

pub mod config;
pub mod problems;
mod seed;

pub use config::{ParamSpec, RunConfig, SCHEMA_VERSION};
pub use problems::{ConstraintSpec, LossKind, StreamSpec};

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::metrics::{fit_loglog_slope, objective_regret, offline_oracle, ObjectiveRegret, OfflineMode};
use crate::opmm::{opmm_run, RoundTrace, Route, RunSummary, Runner};
use crate::oracle::{assumption_audit, Assumption, AuditCheck, AuditInput, AuditReport, ThetaStrategy};

pub const AUDIT_SAMPLES: usize = 256;
const REPLAY_CAP: usize = 4096;

/// Note carried in every summary about the extra loss.
pub const LAST_LOSS_NOTE: &str = "the residual of round T uses f_(T+1), drawn from the same stream";

/// Header of the per-round CSV.
pub fn csv_header(p: usize) -> String {
    let mut h = String::from("t,f_t_xt");
    for i in 1..=p {
        let _ = write!(h, ",g_{i}");
    }
    h.push_str(",lambda_norm,comp_residual,lag_residual_avg_norm,viol_avg_max,psi_bound,step_bound_ok\n");
    h
}

/// One CSV line for a round. Floats carry 17 significant digits; `-0` is written as `0`.
pub fn csv_row(r: &RoundTrace) -> String {
    // adding +0.0 maps -0.0 to +0.0 and leaves every other value unchanged
    let f = |v: f64| v + 0.0;
    let mut s = format!("{},{:.16e}", r.t, f(r.f_value));
    for g in &r.g {
        let _ = write!(s, ",{:.16e}", f(*g));
    }
    let _ = writeln!(
        s,
        ",{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
        f(norm(&r.lambda_next)),
        f(r.complementarity),
        f(r.lagrangian_avg_norm),
        f(r.violation_avg_max),
        f(r.psi_bound),
        r.step_bound_ok
    );
    s
}

/// Regrets recomputed from a per-round CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRegrets {
    pub rounds: usize,
    pub lagrangian: f64,
    pub max_violation: f64,
    pub complementarity: f64,
    pub objective: f64,
}

pub fn regrets_from_csv(text: &str) -> Result<CsvRegrets> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or(Error::EmptyLedger)?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Config(format!("missing column {name}")))
    };
    let g_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("g_"))
        .map(|(i, _)| i)
        .collect();
    let (f_col, comp_col, lag_col) = (col("f_t_xt")?, col("comp_residual")?, col("lag_residual_avg_norm")?);
    let mut sum_g = vec![0.0; g_cols.len()];
    let (mut sum_f, mut sum_comp, mut lag, mut rows) = (0.0, 0.0, 0.0, 0usize);
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let num = |i: usize| -> Result<f64> {
            cells
                .get(i)
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::Config(format!("bad cell {i} in {line:?}")))
        };
        sum_f += num(f_col)?;
        sum_comp += num(comp_col)?;
        lag = num(lag_col)?;
        for (k, &c) in g_cols.iter().enumerate() {
            sum_g[k] += num(c)?;
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyLedger);
    }
    let t = rows as f64;
    Ok(CsvRegrets {
        rounds: rows,
        lagrangian: lag,
        max_violation: sum_g.iter().map(|g| g / t).fold(f64::NEG_INFINITY, f64::max),
        complementarity: sum_comp / t,
        objective: sum_f / t,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RegretBlock {
    pub lagrangian: f64,
    pub violation: Vec<f64>,
    pub max_violation: f64,
    pub complementarity: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObjectiveBlock {
    pub regret: f64,
    pub bound: f64,
    pub offline_value: f64,
    pub offline_point: Vec<f64>,
    pub dist_x1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryBlock {
    pub beta0: f64,
    pub step_bound: f64,
    pub psi_min: f64,
    pub psi_argmin: u64,
    pub psi_at_quarter: f64,
    pub rho0: f64,
    pub violation_coef: f64,
    pub complementarity_coef: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlagBlock {
    pub step_bound_ok: bool,
    pub psi_ok: bool,
    pub max_multiplier_step: f64,
    pub max_lambda_norm: f64,
    pub failed_rounds: Vec<usize>,
}

/// Summary written next to the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub rounds: usize,
    pub route: Route,
    pub sigma: f64,
    pub alpha: f64,
    pub note: String,
    pub regrets: RegretBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_regret: Option<ObjectiveBlock>,
    pub theory: TheoryBlock,
    pub flags: FlagBlock,
}

impl RunReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub struct RunOutput {
    pub csv: String,
    pub report: RunReport,
    pub summary: RunSummary,
    pub traces: Vec<RoundTrace>,
    pub objective: Option<ObjectiveRegret>,
}

/// Executes one configured run in memory.
pub fn run(cfg: &RunConfig, route: Option<Route>) -> Result<RunOutput> {
    let route = route.unwrap_or(cfg.route);
    let problem = cfg.build_problem()?;
    let p = problem.constraints.count();
    let set = problem.set.clone();
    let cons = cfg.constraints.build(&set)?;
    let mut csv = csv_header(p);
    let mut traces = Vec::with_capacity(cfg.horizon);
    let summary = opmm_run(problem, cfg.algo_params(), route, &mut |r: &RoundTrace| {
        csv.push_str(&csv_row(r));
        traces.push(r.clone());
        Ok(())
    })?;

    let mut objective = None;
    let mut objective_block = None;
    if let Some(agg) = &summary.aggregate {
        if let Ok(off) = offline_oracle(agg, &set, cons.as_ref(), OfflineMode::Auto) {
            let c = &summary.constants;
            let o = objective_regret(&summary.ledger, &off, &summary.x1, c.kappa_f, c.nu_g)?;
            objective_block = Some(ObjectiveBlock {
                regret: o.regret,
                bound: o.bound,
                offline_value: off.value,
                offline_point: off.point.clone(),
                dist_x1: o.dist_x1,
            });
            objective = Some(o);
        }
    }
    let r = &summary.regrets;
    let b = &summary.bounds;
    let report = RunReport {
        rounds: summary.rounds,
        route,
        sigma: summary.params.sigma,
        alpha: summary.params.alpha,
        note: LAST_LOSS_NOTE.into(),
        regrets: RegretBlock {
            lagrangian: r.lagrangian,
            violation: r.violation.clone(),
            max_violation: r.max_violation,
            complementarity: r.complementarity,
            objective: r.objective,
        },
        objective_regret: objective_block,
        theory: TheoryBlock {
            beta0: summary.constants.beta0(),
            step_bound: b.step_bound,
            psi_min: b.psi_min,
            psi_argmin: b.psi_argmin,
            psi_at_quarter: b.psi_at_quarter,
            rho0: b.rho0,
            violation_coef: b.violation_coef,
            complementarity_coef: b.complementarity_coef,
        },
        flags: FlagBlock {
            step_bound_ok: summary.step_bound_ok,
            psi_ok: summary.psi_ok,
            max_multiplier_step: summary.max_multiplier_step,
            max_lambda_norm: summary.lambda_norms.iter().copied().fold(0.0, f64::max),
            failed_rounds: summary.failed_rounds.clone(),
        },
    };
    Ok(RunOutput {
        csv,
        report,
        summary,
        traces,
        objective,
    })
}

/// `run.csv` → `run.summary.toml`
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.toml")
}

/// Writes the CSV and its summary; returns the summary path.
pub fn write_run(out: &Path, output: &RunOutput) -> Result<PathBuf> {
    std::fs::write(out, &output.csv)?;
    let path = summary_path(out);
    std::fs::write(&path, output.report.to_toml()?)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub horizon: usize,
    pub lagrangian: f64,
    pub max_violation: f64,
    pub complementarity: f64,
    pub objective: f64,
    pub objective_regret: Option<f64>,
    pub objective_bound: Option<f64>,
    pub step_bound_ok: bool,
    pub psi_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slopes {
    pub lagrangian: Option<f64>,
    /// Fitted over the horizons where the violation regret is positive.
    pub violation: Option<f64>,
    pub complementarity: Option<f64>,
    /// Fitted only when every objective regret is positive.
    pub objective_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub slopes: Slopes,
    pub lagrangian_nonincreasing: bool,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let mut s = String::from(
            "T,lagrangian,max_violation,complementarity,objective,objective_regret,objective_bound,step_bound_ok,psi_ok\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{}",
                r.horizon,
                r.lagrangian,
                r.max_violation,
                r.complementarity,
                r.objective,
                opt(r.objective_regret),
                opt(r.objective_bound),
                r.step_bound_ok,
                r.psi_ok
            );
        }
        s
    }
}

impl fmt::Display for Slopes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
        writeln!(f, "slope lagrangian       {}", show(self.lagrangian))?;
        writeln!(f, "slope max_violation    {}", show(self.violation))?;
        writeln!(f, "slope complementarity  {}", show(self.complementarity))?;
        writeln!(f, "slope objective_regret {}", show(self.objective_regret))
    }
}

/// Runs every horizon (concurrently) with the configured preset.
pub fn sweep(cfg: &RunConfig, horizons: &[usize], route: Option<Route>) -> Result<SweepResult> {
    if horizons.len() < 4 {
        return Err(Error::Config(format!(
            "a sweep needs at least 4 horizons, got {}",
            horizons.len()
        )));
    }
    let mut sorted = horizons.to_vec();
    sorted.sort_unstable();
    let results: Vec<Result<SweepRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = sorted
            .iter()
            .map(|&t| {
                let c = cfg.with_horizon(t);
                s.spawn(move || {
                    let out = run(&c, route)?;
                    let r = &out.summary.regrets;
                    Ok(SweepRow {
                        horizon: t,
                        lagrangian: r.lagrangian,
                        max_violation: r.max_violation,
                        complementarity: r.complementarity,
                        objective: r.objective,
                        objective_regret: out.objective.map(|o| o.regret),
                        objective_bound: out.objective.map(|o| o.bound),
                        step_bound_ok: out.summary.step_bound_ok,
                        psi_ok: out.summary.psi_ok,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let ts: Vec<f64> = rows.iter().map(|r| r.horizon as f64).collect();
    let fit = |ys: Vec<f64>| fit_loglog_slope(&ts, &ys);
    let positive: (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.max_violation > 0.0)
        .map(|r| (r.horizon as f64, r.max_violation))
        .unzip();
    let objective_regret = rows
        .iter()
        .map(|r| r.objective_regret)
        .collect::<Option<Vec<f64>>>()
        .and_then(fit);
    let slopes = Slopes {
        lagrangian: fit(rows.iter().map(|r| r.lagrangian).collect()),
        violation: fit_loglog_slope(&positive.0, &positive.1),
        complementarity: fit(rows.iter().map(|r| r.complementarity).collect()),
        objective_regret,
    };
    let lagrangian_nonincreasing = rows.windows(2).all(|w| w[1].lagrangian <= w[0].lagrangian);
    Ok(SweepResult {
        rows,
        slopes,
        lagrangian_nonincreasing,
    })
}

/// Assumption audit for a configuration and route.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub route: Route,
    pub audit: AuditReport,
    /// Failures that do not block the route.
    pub warnings: Vec<AuditCheck>,
    /// Route-level problems, such as the dual route on non-convex constraints.
    pub errors: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.audit.all_passed()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "route: {:?}", self.route)?;
        write!(f, "{}", self.audit)?;
        for w in &self.warnings {
            writeln!(
                f,
                "WARN {:<4} {:<28} worst={:.6e} limit={:.6e} witness={:?}",
                w.assumption, w.name, w.worst, w.limit, w.witness
            )?;
        }
        for e in &self.errors {
            writeln!(f, "ERROR {e}")?;
        }
        writeln!(f, "{}", if self.passed() { "OK" } else { "FAILED" })
    }
}

/// Audits the assumptions at `x¹` with `λ = 0`, then for curvature strategies
/// on non-convex constraints replays the run and probes convexity of the
/// augmented Lagrangian at the largest multiplier reached.
pub fn check(cfg: &RunConfig, route: Option<Route>, samples: usize, seed: u64) -> Result<CheckReport> {
    let route = route.unwrap_or(cfg.route);
    let params = cfg.algo_params();
    let mut problem = cfg.build_problem()?;
    let cons = problem.constraints.as_ref();
    let lc = problem.stream.constants();
    let strategy = params.theta_strategy;
    let kappa_q = strategy.kappa_q(cons, lc.l_f);
    let loss = problem.stream.next_loss();
    let lambda0 = vec![0.0; cons.count()];
    let mut audit = assumption_audit(
        &AuditInput {
            set: &problem.set,
            loss: loss.as_ref(),
            loss_constants: lc,
            constraints: cons,
            strategy,
            kappa_q,
            anchor: &problem.x1,
            lambda: &lambda0,
            sigma: params.sigma,
        },
        samples,
        seed,
    );
    let mut errors = Vec::new();
    if route == Route::Dual {
        if !cons.all_convex() {
            errors.push("dual route needs convex constraints".to_string());
        }
        if !matches!(strategy, ThetaStrategy::Zero | ThetaStrategy::Scalar { .. }) {
            errors.push(format!(
                "dual route needs a scalar objective curvature, got {strategy:?}"
            ));
        }
    }

    // With curved minorants convexity of the augmented Lagrangian is not
    // guaranteed; report it without blocking the run.
    let advisory_b4 = !cons.all_convex()
        && matches!(
            strategy,
            ThetaStrategy::ConcaveMinorant { .. } | ThetaStrategy::LossHessian
        );
    let mut warnings = Vec::new();
    if advisory_b4 {
        let (b4, rest): (Vec<_>, Vec<_>) = audit.checks.into_iter().partition(|c| c.assumption == Assumption::B4);
        audit.checks = rest;
        warnings.extend(b4.into_iter().filter(|c| !c.passed));
        warnings.extend(replay_b4(cfg, samples, seed)?);
    }
    Ok(CheckReport {
        route,
        audit,
        warnings,
        errors,
    })
}

/// Failing B4 checks at the round with the largest `‖λ^t‖`.
fn replay_b4(cfg: &RunConfig, samples: usize, seed: u64) -> Result<Vec<AuditCheck>> {
    let mut cfg = cfg.with_horizon(cfg.horizon.min(REPLAY_CAP));
    cfg.strict = false;
    let params = cfg.algo_params();
    let mut runner = Runner::new(cfg.build_problem()?, params, Route::Primal)?;
    let mut best = (0.0, 0usize);
    while !runner.is_done() {
        let r = runner.step()?;
        let l = norm(&r.lambda_next);
        if l > best.0 {
            best = (l, r.t + 1);
        }
    }
    if best.1 == 0 {
        return Ok(Vec::new());
    }
    let mut runner = Runner::new(cfg.build_problem()?, params, Route::Primal)?;
    while runner.state().t < best.1 {
        runner.step()?;
    }
    let problem = runner.problem();
    let cons = problem.constraints.as_ref();
    let lc = problem.stream.constants();
    let state = runner.state();
    let report = assumption_audit(
        &AuditInput {
            set: &problem.set,
            loss: runner.current_loss(),
            loss_constants: lc,
            constraints: cons,
            strategy: params.theta_strategy,
            kappa_q: params.theta_strategy.kappa_q(cons, lc.l_f),
            anchor: &state.x,
            lambda: &state.lambda,
            sigma: params.sigma,
        },
        samples,
        seed,
    );
    Ok(report
        .checks
        .into_iter()
        .filter(|c| c.assumption == Assumption::B4 && !c.passed)
        .map(|mut c| {
            c.name = format!("{} (replay t={})", c.name, best.1);
            c
        })
        .collect())
}

#[cfg(test)]
mod tests;
