use crate::error::Result;
use crate::oracle::StructuralConstants;

/// Leading-order constants of the regret bounds at one `(σ, α, T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryBounds {
    /// Per-round bound `σβ₀` on `|‖λ^{t+1}‖ − ‖λ^t‖|`.
    pub step_bound: f64,
    /// `min_{s ∈ [1, T]} ψ(σ, α, s)` and its minimizer.
    pub psi_min: f64,
    pub psi_argmin: u64,
    /// `ψ(σ, α, ⌈T^{1/4}⌉)`.
    pub psi_at_quarter: f64,
    /// Lagrangian-residual coefficient `ϱ₀`.
    pub rho0: f64,
    /// Violation coefficient `ν_g(κ₀ + κ₁ + κ₃) + κ_g²`.
    pub violation_coef: f64,
    /// Complementarity coefficient `β₀`.
    pub complementarity_coef: f64,
}

/// `⌈T^{1/4}⌉`, at least 1.
pub(crate) fn quarter_power(horizon: usize) -> u64 {
    let t = horizon as f64;
    let mut s = t.powf(0.25).ceil() as u64;
    // guard against powf landing a hair above an exact fourth power
    while s > 1 && ((s - 1) as f64).powi(4) >= t {
        s -= 1;
    }
    s.max(1)
}

pub fn theory_bounds(c: &StructuralConstants, sigma: f64, alpha: f64, horizon: usize) -> Result<TheoryBounds> {
    let t_max = horizon.max(1) as u64;
    let (psi_argmin, psi_min) = c.min_psi(sigma, alpha, t_max)?;
    let psi_at_quarter = c.psi(sigma, alpha, quarter_power(horizon))?;
    let k = c.kappa0() + c.kappa1() + c.kappa3();
    let lq = c.l_g + c.kappa_q;
    let rho0 = 0.5 * c.kappa_q * c.kappa_q + 2.0 * (1.0 + c.p as f64) * c.nu_g * k + 0.5 * lq * lq * k * k;
    Ok(TheoryBounds {
        step_bound: sigma * c.beta0(),
        psi_min,
        psi_argmin,
        psi_at_quarter,
        rho0,
        violation_coef: c.nu_g * k + c.kappa_g * c.kappa_g,
        complementarity_coef: c.beta0(),
    })
}

/// Per-round complementarity bound `σβ₀ + (√p (L_g + κ_q) σ / 2)‖x^{t+1} − x^t‖²`.
pub fn complementarity_round_bound(c: &StructuralConstants, sigma: f64, step_sq: f64) -> f64 {
    sigma * c.beta0() + 0.5 * (c.p as f64).sqrt() * (c.l_g + c.kappa_q) * sigma * step_sq
}

/// Least-squares slope of `ln y` against `ln x`. Needs two or more positive pairs.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || !xs.iter().chain(ys).all(|v| *v > 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy() -> StructuralConstants {
        StructuralConstants::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 2.0, 1).unwrap()
    }

    #[test]
    fn toy_coefficients() {
        let c = toy();
        let b = theory_bounds(&c, 1.0, 1.0, 16).unwrap();
        let k = c.kappa0() + c.kappa1() + c.kappa3();
        assert_relative_eq!(c.kappa0(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(c.kappa1(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(b.complementarity_coef, 3.0, epsilon = 1e-12);
        assert_relative_eq!(b.violation_coef, 8.0 + 6.5 + 72.0 * 288f64.ln() + 1.0, epsilon = 1e-9);
        assert_relative_eq!(b.violation_coef, 423.24, epsilon = 0.01);
        // κ_q = 0, p = 1
        assert_relative_eq!(b.rho0, 4.0 * k + 0.5 * k * k, epsilon = 1e-9);
        assert_relative_eq!(b.step_bound, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn quarter_power_is_exact_on_fourth_powers() {
        assert_eq!(quarter_power(1), 1);
        assert_eq!(quarter_power(16), 2);
        assert_eq!(quarter_power(17), 3);
        assert_eq!(quarter_power(256), 4);
        assert_eq!(quarter_power(4096), 8);
        assert_eq!(quarter_power(10000), 10);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [256.0, 1024.0, 4096.0, 16384.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.25)).collect();
        assert_relative_eq!(fit_loglog_slope(&xs, &ys).unwrap(), -0.25, epsilon = 1e-12);
        assert!(fit_loglog_slope(&xs[..1], &ys[..1]).is_none());
        assert!(fit_loglog_slope(&xs, &[1.0, 0.0, 1.0, 1.0]).is_none());
    }
}
