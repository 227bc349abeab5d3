use super::{slater_margin, ConstraintFamily, LossConstants};
use crate::error::{Error, Result};
use crate::geometry::SimpleSet;

/// Problem constants entering the multiplier and regret bounds.
///
/// Logarithms are natural.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralConstants {
    pub kappa_f: f64,
    pub kappa_g: f64,
    pub nu_g: f64,
    pub l_f: f64,
    pub l_g: f64,
    pub kappa_q: f64,
    pub eps0: f64,
    pub d0: f64,
    pub p: usize,
}

/// All derived constants evaluated at one `(σ, α, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsSnapshot {
    pub beta0: f64,
    pub vartheta: f64,
    pub psi: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

fn nonneg(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConstant { name, value })
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConstant { name, value })
    }
}

impl StructuralConstants {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kappa_f: f64,
        kappa_g: f64,
        nu_g: f64,
        l_f: f64,
        l_g: f64,
        kappa_q: f64,
        eps0: f64,
        d0: f64,
        p: usize,
    ) -> Result<Self> {
        positive("eps0", eps0)?;
        positive("nu_g", nu_g)?;
        nonneg("kappa_f", kappa_f)?;
        nonneg("kappa_g", kappa_g)?;
        nonneg("l_f", l_f)?;
        nonneg("l_g", l_g)?;
        nonneg("kappa_q", kappa_q)?;
        nonneg("d0", d0)?;
        if p == 0 {
            return Err(Error::InvalidConstant { name: "p", value: 0.0 });
        }
        if nu_g < eps0 {
            return Err(Error::InvalidConstant {
                name: "nu_g",
                value: nu_g,
            });
        }
        Ok(StructuralConstants {
            kappa_f,
            kappa_g,
            nu_g,
            l_f,
            l_g,
            kappa_q,
            eps0,
            d0,
            p,
        })
    }

    /// Gathers the declared constants of a problem; `ε₀` is the Slater margin.
    pub fn from_problem(
        constraints: &dyn ConstraintFamily,
        set: &SimpleSet,
        loss: LossConstants,
        kappa_q: f64,
    ) -> Result<Self> {
        let c = constraints.constants();
        Self::new(
            loss.kappa_f,
            c.kappa_g,
            c.nu_g,
            loss.l_f,
            c.l_g,
            kappa_q,
            slater_margin(constraints),
            set.diameter(),
            constraints.count(),
        )
    }

    /// `β₀ = ν_g + √p (κ_g D₀ + ½ κ_q D₀²)`
    pub fn beta0(&self) -> f64 {
        let d = self.d0;
        self.nu_g + (self.p as f64).sqrt() * (self.kappa_g * d + 0.5 * self.kappa_q * d * d)
    }

    fn check_params(sigma: f64, alpha: f64, s: u64) -> Result<()> {
        positive("sigma", sigma)?;
        positive("alpha", alpha)?;
        if s == 0 {
            return Err(Error::InvalidConstant { name: "s", value: 0.0 });
        }
        Ok(())
    }

    /// Threshold above which `‖λ^t‖` must drift down over `s` rounds.
    pub fn vartheta(&self, sigma: f64, alpha: f64, s: u64) -> Result<f64> {
        Self::check_params(sigma, alpha, s)?;
        let s = s as f64;
        let (e, d) = (self.eps0, self.d0);
        Ok(e * sigma * s / 2.0
            + self.beta0() * sigma * (s - 1.0)
            + alpha * d * d / (e * s)
            + (2.0 * self.kappa_f * d + self.kappa_q * d * d) / e
            + sigma * self.nu_g * self.nu_g / e)
    }

    /// `8β₀²/ε₀ · ln(32β₀²/ε₀²)`
    fn log_term(&self) -> f64 {
        let b = self.beta0();
        let e = self.eps0;
        8.0 * b * b / e * (32.0 * b * b / (e * e)).ln()
    }

    /// Uniform bound on `‖λ^t‖` for a given block length `s`.
    pub fn psi(&self, sigma: f64, alpha: f64, s: u64) -> Result<f64> {
        let vt = self.vartheta(sigma, alpha, s)?;
        Ok(vt + (self.beta0() + self.log_term()) * sigma * s as f64)
    }

    pub fn kappa0(&self) -> f64 {
        (2.0 * self.kappa_f * self.d0 + self.kappa_q * self.d0 * self.d0) / self.eps0
    }

    pub fn kappa1(&self) -> f64 {
        self.d0 * self.d0 / self.eps0
    }

    /// May be negative.
    pub fn kappa2(&self) -> f64 {
        self.nu_g * self.nu_g / self.eps0 - self.beta0()
    }

    pub fn kappa3(&self) -> f64 {
        2.0 * self.beta0() + self.eps0 / 2.0 + self.log_term()
    }

    /// `κ₀ + κ₁ α/s + κ₂ σ + κ₃ σ s`, an equivalent expansion of [`Self::psi`].
    pub fn psi_expanded(&self, sigma: f64, alpha: f64, s: u64) -> Result<f64> {
        Self::check_params(sigma, alpha, s)?;
        let s = s as f64;
        Ok(self.kappa0() + self.kappa1() * alpha / s + self.kappa2() * sigma + self.kappa3() * sigma * s)
    }

    /// Integer `s ∈ [1, s_max]` minimizing `ψ(σ, α, s)`, and the minimum.
    ///
    /// `ψ` is convex in `s`, so the minimizer is a neighbour of the
    /// continuous stationary point `√(κ₁α / (κ₃σ))`.
    pub fn min_psi(&self, sigma: f64, alpha: f64, s_max: u64) -> Result<(u64, f64)> {
        Self::check_params(sigma, alpha, s_max)?;
        let s_star = (self.kappa1() * alpha / (self.kappa3() * sigma)).sqrt();
        let lo = (s_star.floor() as u64).clamp(1, s_max);
        let hi = (s_star.ceil() as u64).clamp(1, s_max);
        let mut best = (lo, self.psi(sigma, alpha, lo)?);
        for s in [hi, 1, s_max] {
            let v = self.psi(sigma, alpha, s)?;
            if v < best.1 {
                best = (s, v);
            }
        }
        Ok(best)
    }

    pub fn snapshot(&self, sigma: f64, alpha: f64, s: u64) -> Result<ConstantsSnapshot> {
        Ok(ConstantsSnapshot {
            beta0: self.beta0(),
            vartheta: self.vartheta(sigma, alpha, s)?,
            psi: self.psi(sigma, alpha, s)?,
            kappa0: self.kappa0(),
            kappa1: self.kappa1(),
            kappa2: self.kappa2(),
            kappa3: self.kappa3(),
        })
    }
}
