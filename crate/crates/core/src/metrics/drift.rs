use crate::error::{Error, Result};

const DRIFT_TOL: f64 = 1e-9;

/// Hypotheses of the drift lemma for a nonnegative sequence `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftHypothesis {
    pub t0: usize,
    pub theta: f64,
    pub delta_max: f64,
    pub zeta: f64,
}

impl DriftHypothesis {
    pub fn validate(&self) -> Result<()> {
        if self.t0 == 0 {
            return Err(Error::InvalidConstant { name: "t0", value: 0.0 });
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::InvalidConstant {
                name: "theta",
                value: self.theta,
            });
        }
        if !(self.delta_max.is_finite() && self.delta_max > 0.0) {
            return Err(Error::InvalidConstant {
                name: "delta_max",
                value: self.delta_max,
            });
        }
        if !(self.zeta > 0.0 && self.zeta <= self.delta_max) {
            return Err(Error::InvalidConstant {
                name: "zeta",
                value: self.zeta,
            });
        }
        Ok(())
    }

    /// `θ + t₀δ + t₀(4δ²/ζ) ln(8δ²/ζ²)`
    pub fn bound(&self) -> f64 {
        let t0 = self.t0 as f64;
        let d2 = self.delta_max * self.delta_max;
        self.theta + t0 * self.delta_max + t0 * (4.0 * d2 / self.zeta) * (8.0 * d2 / (self.zeta * self.zeta)).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub hypothesis_holds: bool,
    /// First `t` with `|Z_{t+1} − Z_t| > δ`.
    pub step_witness: Option<usize>,
    /// First `t` with `Z_t ≥ θ` but `Z_{t+t₀} − Z_t > −t₀ζ`.
    pub drift_witness: Option<usize>,
    pub bound: f64,
    /// `Z_t ≤ B` for every `t`. Only a consequence of the lemma when the hypothesis holds.
    pub bound_holds: bool,
    pub bound_witness: Option<usize>,
    pub max_value: f64,
}

/// Checks the drift-lemma hypotheses on `z = (Z_0, Z_1, …)` and the resulting bound.
pub fn drift_check(z: &[f64], hyp: &DriftHypothesis) -> Result<DriftReport> {
    hyp.validate()?;
    match z.first() {
        Some(&z0) if z0 != 0.0 => return Err(Error::NonZeroStart(z0)),
        _ => {}
    }
    let step_witness = z
        .windows(2)
        .position(|w| (w[1] - w[0]).abs() > hyp.delta_max + DRIFT_TOL);
    let t0 = hyp.t0;
    let drift_witness = (0..z.len().saturating_sub(t0))
        .find(|&t| z[t] >= hyp.theta && z[t + t0] - z[t] > -(t0 as f64) * hyp.zeta + DRIFT_TOL);
    let bound = hyp.bound();
    let bound_witness = z.iter().position(|v| *v > bound + DRIFT_TOL);
    Ok(DriftReport {
        hypothesis_holds: step_witness.is_none() && drift_witness.is_none(),
        step_witness,
        drift_witness,
        bound,
        bound_holds: bound_witness.is_none(),
        bound_witness,
        max_value: z.iter().copied().fold(0.0, f64::max),
    })
}
