//! Regret bookkeeping for the KKT residuals and the objective, plus
//! evaluators for the theoretical bounds.

mod drift;
mod offline;
mod theory;

pub use drift::{drift_check, DriftHypothesis, DriftReport};
pub use offline::{
    objective_regret, offline_oracle, AggregateQuadratic, ObjectiveRegret, OfflineMode, OfflineSolution,
};
pub use theory::{complementarity_round_bound, fit_loglog_slope, theory_bounds, TheoryBounds};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, norm, Mat};
use crate::opmm::complementarity_residual;

/// Everything needed to account for round `t` once `f_{t+1}` is known.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub x_next: Vec<f64>,
    pub lambda_next: Vec<f64>,
    pub w: Vec<f64>,
    /// `f_t(x^t)`
    pub f_value: f64,
    /// `∇f_{t+1}(x^{t+1})`
    pub grad_f_next: Vec<f64>,
    /// `g(x^t)`
    pub g: Vec<f64>,
    /// `g(x^{t+1})`
    pub g_next: Vec<f64>,
    /// `Jg(x^{t+1})`
    pub jac_next: Mat,
    pub sigma: f64,
}

/// A round whose record still waits for `∇f_{t+1}(x^{t+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingRound {
    pub t: usize,
    pub x: Vec<f64>,
    pub x_next: Vec<f64>,
    pub lambda_next: Vec<f64>,
    pub w: Vec<f64>,
    pub f_value: f64,
    pub g: Vec<f64>,
    pub g_next: Vec<f64>,
    pub jac_next: Mat,
    pub sigma: f64,
}

impl PendingRound {
    fn close(self, grad_f_next: Vec<f64>) -> RoundRecord {
        RoundRecord {
            t: self.t,
            x: self.x,
            x_next: self.x_next,
            lambda_next: self.lambda_next,
            w: self.w,
            f_value: self.f_value,
            grad_f_next,
            g: self.g,
            g_next: self.g_next,
            jac_next: self.jac_next,
            sigma: self.sigma,
        }
    }
}

/// Per-round values kept by the ledger, with running averages after the round.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub t: usize,
    pub f_value: f64,
    pub g: Vec<f64>,
    pub complementarity: f64,
    /// `‖Σ_{τ≤t} H_τ‖ / t`
    pub lagrangian_avg_norm: f64,
    /// `max_i Σ_{τ≤t} g_i(x^τ) / t`
    pub violation_avg_max: f64,
    pub step_sq: f64,
}

/// Running sums behind the three KKT regrets and the objective regret.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    sum_h: Vec<f64>,
    sum_g: Vec<f64>,
    sum_comp: f64,
    sum_f: f64,
    rows: Vec<LedgerRow>,
    pending: Option<PendingRound>,
}

/// Horizon-averaged regrets.
#[derive(Debug, Clone, PartialEq)]
pub struct Regrets {
    pub rounds: usize,
    /// Norm of the averaged Lagrangian residual vector.
    pub lagrangian: f64,
    pub lagrangian_vector: Vec<f64>,
    pub violation: Vec<f64>,
    pub max_violation: f64,
    pub complementarity: f64,
    /// `(1/T) Σ f_t(x^t)`
    pub objective: f64,
}

impl RegretLedger {
    pub fn new(n: usize, p: usize) -> Self {
        RegretLedger {
            sum_h: vec![0.0; n],
            sum_g: vec![0.0; p],
            sum_comp: 0.0,
            sum_f: 0.0,
            rows: Vec::new(),
            pending: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn pending(&self) -> Option<&PendingRound> {
        self.pending.as_ref()
    }

    pub fn sum_h(&self) -> &[f64] {
        &self.sum_h
    }

    pub fn sum_g(&self) -> &[f64] {
        &self.sum_g
    }

    pub fn sum_comp(&self) -> f64 {
        self.sum_comp
    }

    pub fn sum_f(&self) -> f64 {
        self.sum_f
    }

    /// Parks a round until the next loss arrives.
    pub fn open(&mut self, round: PendingRound) -> Result<()> {
        let expected = self.rows.len() + 1;
        if self.pending.is_some() || round.t != expected {
            return Err(Error::OutOfOrder { expected, got: round.t });
        }
        self.pending = Some(round);
        Ok(())
    }

    /// Closes the pending round with `∇f_{t+1}(x^{t+1})`.
    pub fn close(&mut self, grad_f_next: Vec<f64>) -> Result<&LedgerRow> {
        let pending = self.pending.take().ok_or(Error::OutOfOrder {
            expected: self.rows.len() + 1,
            got: 0,
        })?;
        self.accumulate(&pending.close(grad_f_next))
    }

    /// Adds a completed round.
    pub fn accumulate(&mut self, r: &RoundRecord) -> Result<&LedgerRow> {
        let expected = self.rows.len() + 1;
        if r.t != expected {
            return Err(Error::OutOfOrder { expected, got: r.t });
        }
        let n = self.sum_h.len();
        let p = self.sum_g.len();
        check_dim(n, r.grad_f_next.len())?;
        check_dim(n, r.w.len())?;
        check_dim(n, r.x.len())?;
        check_dim(n, r.x_next.len())?;
        check_dim(p, r.lambda_next.len())?;
        check_dim(p, r.g.len())?;
        check_dim(p, r.g_next.len())?;
        check_dim(p, r.jac_next.rows())?;

        // H_t = ∇f_{t+1}(x^{t+1}) + Σ λ^{t+1}_i ∇g_i(x^{t+1}) + w^{t+1}
        axpy(&mut self.sum_h, 1.0, &r.grad_f_next);
        if p > 0 {
            axpy(&mut self.sum_h, 1.0, &r.jac_next.tr_mul_vec(&r.lambda_next));
        }
        axpy(&mut self.sum_h, 1.0, &r.w);
        axpy(&mut self.sum_g, 1.0, &r.g);
        let comp = complementarity_residual(&r.lambda_next, r.sigma, &r.g_next);
        self.sum_comp += comp;
        self.sum_f += r.f_value;

        let t = r.t as f64;
        let step_sq = crate::linalg::norm_sq(&crate::linalg::sub(&r.x_next, &r.x));
        self.rows.push(LedgerRow {
            t: r.t,
            f_value: r.f_value,
            g: r.g.clone(),
            complementarity: comp,
            lagrangian_avg_norm: norm(&self.sum_h) / t,
            violation_avg_max: self.sum_g.iter().fold(f64::NEG_INFINITY, |a, g| a.max(g / t)),
            step_sq,
        });
        Ok(self.rows.last().expect("just pushed"))
    }

    /// Averages over the rounds accumulated so far.
    pub fn regrets(&self) -> Result<Regrets> {
        if self.rows.is_empty() {
            return Err(Error::EmptyLedger);
        }
        let t = self.rows.len() as f64;
        let lagrangian_vector: Vec<f64> = self.sum_h.iter().map(|h| h / t).collect();
        let violation: Vec<f64> = self.sum_g.iter().map(|g| g / t).collect();
        Ok(Regrets {
            rounds: self.rows.len(),
            lagrangian: norm(&lagrangian_vector),
            lagrangian_vector,
            max_violation: violation.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            violation,
            complementarity: self.sum_comp / t,
            objective: self.sum_f / t,
        })
    }

    /// Appends another ledger's rounds, renumbering them after this one's.
    pub fn concat(&self, other: &RegretLedger) -> Result<RegretLedger> {
        check_dim(self.sum_h.len(), other.sum_h.len())?;
        check_dim(self.sum_g.len(), other.sum_g.len())?;
        let mut out = self.clone();
        out.pending = None;
        for (a, b) in out.sum_h.iter_mut().zip(&other.sum_h) {
            *a += b;
        }
        for (a, b) in out.sum_g.iter_mut().zip(&other.sum_g) {
            *a += b;
        }
        out.sum_comp += other.sum_comp;
        out.sum_f += other.sum_f;
        let offset = self.rows.len();
        // running averages of the appended rows are not recomputable from
        // the other ledger alone; keep its per-round values only
        out.rows.extend(other.rows.iter().map(|r| LedgerRow {
            t: r.t + offset,
            ..r.clone()
        }));
        Ok(out)
    }
}
