//! Sampling audit of the structural assumptions.
//!
//! Every check is evaluated on deterministic samples of the feasible set.
//! A passing check certifies the assumption only on the sample; a failing
//! check carries the worst witness found.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{build_models_unchecked, slater_margin, ConstraintFamily, LossConstants, RoundOracle, ThetaStrategy};
use crate::geometry::{SimpleSet, FEASIBILITY_TOL};
use crate::linalg::{dist, norm, sub};
use crate::opmm::aug_lagrangian;

const RATIO_RTOL: f64 = 1e-9;
const MINORANT_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-12;
const CONVEXITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Lipschitz losses and constraints, bounded `‖g‖`.
    A1,
    /// Lipschitz gradients.
    A2,
    /// Slater point.
    A3,
    /// `Θ₀` positive semidefinite.
    B1,
    /// `q_i ≤ g_i` on the set.
    B2,
    /// `‖Θ_i‖ ≤ κ_q`.
    B3,
    /// Convex augmented Lagrangian.
    B4,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditCheck {
    pub assumption: Assumption,
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the audited quantity.
    pub worst: f64,
    /// Declared limit the quantity is compared against.
    pub limit: f64,
    /// Points realizing `worst`.
    pub witness: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self, assumption: Assumption) -> bool {
        self.checks
            .iter()
            .filter(|c| c.assumption == assumption)
            .all(|c| c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn merge(&mut self, other: AuditReport) {
        self.checks.extend(other.checks);
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "{} {:<4} {:<28} worst={:.6e} limit={:.6e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.assumption,
                c.name,
                c.worst,
                c.limit
            )?;
            if !c.passed {
                write!(f, " witness={:?}", c.witness)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Everything the audit looks at for one round.
pub struct AuditInput<'a> {
    pub set: &'a SimpleSet,
    pub loss: &'a dyn RoundOracle,
    pub loss_constants: LossConstants,
    pub constraints: &'a dyn ConstraintFamily,
    pub strategy: ThetaStrategy,
    pub kappa_q: f64,
    /// Where the quadratic models are anchored.
    pub anchor: &'a [f64],
    /// Multiplier at which convexity of the augmented Lagrangian is probed.
    pub lambda: &'a [f64],
    pub sigma: f64,
}

struct Tracker {
    worst: f64,
    witness: Vec<Vec<f64>>,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            worst: f64::NEG_INFINITY,
            witness: Vec::new(),
        }
    }

    fn observe(&mut self, value: f64, witness: &[&[f64]]) {
        if value > self.worst {
            self.worst = value;
            self.witness = witness.iter().map(|w| w.to_vec()).collect();
        }
    }

    fn finish(self, assumption: Assumption, name: impl Into<String>, limit: f64, passed: bool) -> AuditCheck {
        AuditCheck {
            assumption,
            name: name.into(),
            passed,
            worst: self.worst,
            limit,
            witness: self.witness,
        }
    }

    fn at_most(self, assumption: Assumption, name: impl Into<String>, limit: f64) -> AuditCheck {
        let passed = self.worst <= limit * (1.0 + RATIO_RTOL) + 1e-12;
        self.finish(assumption, name, limit, passed)
    }
}

/// Audits assumptions A1–A3 and B1–B4 on `samples` seeded points of the set.
pub fn assumption_audit(input: &AuditInput<'_>, samples: usize, seed: u64) -> AuditReport {
    let set = input.set;
    let cons = input.constraints;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec<f64>> = set.vertices().unwrap_or_default();
    points.truncate(samples.max(1));
    while points.len() < samples.max(2) {
        points.push(set.sample(&mut rng));
    }
    // nearby pairs probe local Lipschitz ratios
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = points
        .iter()
        .zip(points.iter().skip(1))
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    for a in points.iter().take(samples / 2 + 1) {
        let b = set.sample(&mut rng);
        let near: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + 1e-3 * (y - x)).collect();
        pairs.push((a.clone(), near));
    }
    pairs.retain(|(a, b)| dist(a, b) > 1e-12);

    let lc = input.loss_constants;
    let cc = cons.constants();
    let p = cons.count();
    let mut report = AuditReport::default();

    // A1
    let mut f_lip = Tracker::new();
    let mut g_lip = Tracker::new();
    for (a, b) in &pairs {
        let d = dist(a, b);
        f_lip.observe((input.loss.value(a) - input.loss.value(b)).abs() / d, &[a, b]);
        let ga = cons.values(a);
        let gb = cons.values(b);
        for i in 0..p {
            g_lip.observe((ga[i] - gb[i]).abs() / d, &[a, b]);
        }
    }
    let mut f_grad = Tracker::new();
    let mut g_grad = Tracker::new();
    let mut g_bound = Tracker::new();
    for x in &points {
        f_grad.observe(norm(&input.loss.gradient(x)), &[x]);
        let jac = cons.jacobian(x);
        for i in 0..p {
            g_grad.observe(norm(jac.row(i)), &[x]);
        }
        g_bound.observe(norm(&cons.values(x)), &[x]);
    }
    report
        .checks
        .push(f_lip.at_most(Assumption::A1, "f lipschitz ratio", lc.kappa_f));
    report
        .checks
        .push(f_grad.at_most(Assumption::A1, "f gradient norm", lc.kappa_f));
    report
        .checks
        .push(g_lip.at_most(Assumption::A1, "g lipschitz ratio", cc.kappa_g));
    report
        .checks
        .push(g_grad.at_most(Assumption::A1, "g gradient norm", cc.kappa_g));
    report
        .checks
        .push(g_bound.at_most(Assumption::A1, "g norm bound", cc.nu_g));

    // A2
    let mut f_smooth = Tracker::new();
    let mut g_smooth = Tracker::new();
    for (a, b) in &pairs {
        let d = dist(a, b);
        f_smooth.observe(dist(&input.loss.gradient(a), &input.loss.gradient(b)) / d, &[a, b]);
        let ja = cons.jacobian(a);
        let jb = cons.jacobian(b);
        for i in 0..p {
            g_smooth.observe(dist(ja.row(i), jb.row(i)) / d, &[a, b]);
        }
    }
    report
        .checks
        .push(f_smooth.at_most(Assumption::A2, "f gradient lipschitz", lc.l_f));
    report
        .checks
        .push(g_smooth.at_most(Assumption::A2, "g gradient lipschitz", cc.l_g));

    // A3
    let slater = cons.slater_point();
    let eps0 = slater_margin(cons);
    let mut slater_check = Tracker::new();
    slater_check.observe(set.infeasibility(&slater), &[&slater]);
    report
        .checks
        .push(slater_check.at_most(Assumption::A3, "slater point in set", FEASIBILITY_TOL));
    let mut margin = Tracker::new();
    margin.observe(-eps0, &[&slater]);
    let passed = eps0 > 0.0;
    report
        .checks
        .push(margin.finish(Assumption::A3, "slater margin -eps0", 0.0, passed));
    let mut nu_vs_eps = Tracker::new();
    nu_vs_eps.observe(eps0, &[&slater]);
    report
        .checks
        .push(nu_vs_eps.at_most(Assumption::A3, "eps0 <= nu_g", cc.nu_g));

    // B1–B4 on the models anchored at `input.anchor`
    let models = match build_models_unchecked(input.loss, cons, input.anchor, input.strategy) {
        Ok(m) => m,
        Err(e) => {
            let mut t = Tracker::new();
            t.observe(f64::INFINITY, &[input.anchor]);
            report
                .checks
                .push(t.finish(Assumption::B1, format!("models unavailable: {e}"), 0.0, false));
            return report;
        }
    };
    let mut psd = Tracker::new();
    psd.observe(-models.objective.theta.min_eigenvalue(), &[input.anchor]);
    report
        .checks
        .push(psd.at_most(Assumption::B1, "theta0 -min eigenvalue", PSD_TOL));

    let mut minorant = Tracker::new();
    for x in &points {
        let g = cons.values(x);
        for (i, q) in models.constraints.iter().enumerate() {
            minorant.observe(q.eval(x) - g[i], &[x]);
        }
    }
    report
        .checks
        .push(minorant.at_most(Assumption::B2, "q_i - g_i", MINORANT_TOL));

    let mut theta_norm = Tracker::new();
    theta_norm.observe(models.theta_bound(), &[input.anchor]);
    report
        .checks
        .push(theta_norm.at_most(Assumption::B3, "max theta norm", input.kappa_q));

    // Convexity along segments: F(mid) ≤ ½(F(a) + F(b)) at several scales.
    let lagrangian = |x: &[f64]| aug_lagrangian(&models, input.lambda, input.sigma, x).0;
    let mut convexity = Tracker::new();
    for (a, b) in &pairs {
        for frac in [1.0, 0.25, 0.01] {
            let end: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + frac * (y - x)).collect();
            let mid: Vec<f64> = a.iter().zip(&end).map(|(x, y)| 0.5 * (x + y)).collect();
            let fa = lagrangian(a);
            let fb = lagrangian(&end);
            let fm = lagrangian(&mid);
            let scale = 1.0 + fa.abs().max(fb.abs());
            // Second difference normalized by the squared segment length.
            let len_sq = crate::linalg::norm_sq(&sub(&end, a)).max(1e-300);
            let excess = (fm - 0.5 * (fa + fb)) - CONVEXITY_TOL * scale;
            convexity.observe(excess / len_sq, &[a, &end]);
        }
    }
    report
        .checks
        .push(convexity.at_most(Assumption::B4, "segment midpoint excess", 0.0));
    report
}
