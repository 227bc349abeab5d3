use super::RegretLedger;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{SetKind, SimpleSet};
use crate::linalg::{axpy, dist, dot, norm, positive_part, Mat};
use crate::oracle::{slater_margin, ConstraintFamily, RoundOracle};
use crate::pgd::{self, PgdSettings, DEFAULT_SHRINK, DEFAULT_SUFFICIENT_DECREASE};

/// Grid pitch is the set diameter divided by this.
pub const GRID_DIVISIONS: f64 = 2000.0;
const GRID_BUDGET: f64 = 4.0e6;
const REFINE_CANDIDATES: usize = 8;
const ALM_PENALTY: f64 = 10.0;
const ALM_OUTER: usize = 500;
const ALM_TOL: f64 = 1e-13;
const INNER_TOL: f64 = 1e-12;

/// `Σ_t f_t` for convex quadratic losses, stored as `½xᵀHx + ⟨c, x⟩ + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateQuadratic {
    hessian: Mat,
    linear: Vec<f64>,
    constant: f64,
    count: usize,
}

impl AggregateQuadratic {
    pub fn new(n: usize) -> Self {
        AggregateQuadratic {
            hessian: Mat::zeros(n, n),
            linear: vec![0.0; n],
            constant: 0.0,
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    /// Number of losses summed.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, loss: &dyn RoundOracle) -> Result<()> {
        let n = self.dim();
        check_dim(n, loss.dim())?;
        let h = loss
            .quadratic_hessian()
            .ok_or_else(|| Error::Offline("loss is not a convex quadratic".into()))?;
        let origin = vec![0.0; n];
        self.hessian.add_assign(&h);
        axpy(&mut self.linear, 1.0, &loss.gradient(&origin));
        self.constant += loss.value(&origin);
        self.count += 1;
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.hessian.mul_vec(x)) + dot(&self.linear, x) + self.constant
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.hessian.mul_vec(x);
        axpy(&mut g, 1.0, &self.linear);
        g
    }

    /// `(1/count) Σ f_t`, value and gradient.
    fn mean(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let s = 1.0 / self.count.max(1) as f64;
        let g = self.gradient(x).into_iter().map(|v| v * s).collect();
        (self.value(x) * s, g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfflineMode {
    /// Convex solver when every constraint is convex, otherwise the grid.
    Auto,
    /// Exhaustive grid with pitch `D₀/2000`, then a local polish. Needs `n ≤ 3`.
    Grid,
    /// Augmented-Lagrangian solve. Needs convex constraints.
    Convex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSolution {
    /// Minimizer of `Σ_t f_t` over `{x ∈ C : g(x) ≤ 0}`.
    pub point: Vec<f64>,
    /// `Σ_t f_t(point)`.
    pub value: f64,
    pub mode: OfflineMode,
    /// Grid mode: bound on how far the grid minimum can sit above the true
    /// minimum. Zero for the convex solver.
    pub certificate: f64,
}

/// Minimizes the aggregate loss over the feasible set.
pub fn offline_oracle(
    agg: &AggregateQuadratic,
    set: &SimpleSet,
    cons: &dyn ConstraintFamily,
    mode: OfflineMode,
) -> Result<OfflineSolution> {
    check_dim(set.dim(), agg.dim())?;
    check_dim(set.dim(), cons.dim())?;
    if agg.count == 0 {
        return Err(Error::Offline("no losses aggregated".into()));
    }
    let mode = match mode {
        OfflineMode::Auto if cons.all_convex() => OfflineMode::Convex,
        OfflineMode::Auto => OfflineMode::Grid,
        m => m,
    };
    match mode {
        OfflineMode::Convex => {
            if !cons.all_convex() {
                return Err(Error::Offline("convex mode needs convex constraints".into()));
            }
            let x0 = set.project(&cons.slater_point())?;
            let x = alm(agg, set, cons, &x0)?;
            let x = restore_feasibility(set, cons, x)?;
            Ok(OfflineSolution {
                value: agg.value(&x),
                point: x,
                mode,
                certificate: 0.0,
            })
        }
        OfflineMode::Grid => grid(agg, set, cons),
        OfflineMode::Auto => unreachable!(),
    }
}

/// Classical augmented-Lagrangian method on the averaged aggregate.
fn alm(agg: &AggregateQuadratic, set: &SimpleSet, cons: &dyn ConstraintFamily, x0: &[f64]) -> Result<Vec<f64>> {
    let c = ALM_PENALTY;
    let p = cons.count();
    let kg = cons.constants().kappa_g;
    let curvature = agg.hessian.sym_spectral_norm() / agg.count as f64 + c * p as f64 * kg * kg + 1e-12;
    let mut mu = vec![0.0; p];
    let mut x = x0.to_vec();
    for _ in 0..ALM_OUTER {
        let objective = |z: &[f64]| {
            let (mut v, mut g) = agg.mean(z);
            let gv = cons.values(z);
            let jac = cons.jacobian(z);
            for i in 0..p {
                let s = positive_part(mu[i] + c * gv[i]);
                v += (s * s - mu[i] * mu[i]) / (2.0 * c);
                if s > 0.0 {
                    axpy(&mut g, s, jac.row(i));
                }
            }
            (v, g)
        };
        let g0 = objective(&x).1;
        let out = pgd::minimize(
            set,
            objective,
            &x,
            PgdSettings {
                tol: INNER_TOL * (1.0 + norm(&g0)),
                max_iters: 200_000,
                initial_step: 1.0 / curvature,
                shrink: DEFAULT_SHRINK,
                sufficient_decrease: DEFAULT_SUFFICIENT_DECREASE,
            },
        );
        x = out.x;
        let gv = cons.values(&x);
        let next: Vec<f64> = mu.iter().zip(&gv).map(|(m, g)| positive_part(m + c * g)).collect();
        let change = dist(&next, &mu) / c;
        mu = next;
        if change <= ALM_TOL * (1.0 + norm(&mu)) {
            break;
        }
    }
    Ok(x)
}

/// Pulls a slightly infeasible point toward the Slater point until every
/// constraint holds. Valid for convex constraints.
fn restore_feasibility(set: &SimpleSet, cons: &dyn ConstraintFamily, x: Vec<f64>) -> Result<Vec<f64>> {
    let worst = |z: &[f64]| cons.values(z).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let excess = worst(&x);
    if excess <= 0.0 {
        return Ok(x);
    }
    let slater = cons.slater_point();
    let eps0 = slater_margin(cons);
    let mut theta = excess / (excess + eps0);
    loop {
        let z: Vec<f64> = x.iter().zip(&slater).map(|(a, b)| a + theta * (b - a)).collect();
        if worst(&z) <= 0.0 && set.contains(&z, 0.0) {
            return Ok(z);
        }
        if theta >= 1.0 {
            return Err(Error::Offline("could not restore feasibility".into()));
        }
        theta = (theta * 2.0).min(1.0);
    }
}

fn grid(agg: &AggregateQuadratic, set: &SimpleSet, cons: &dyn ConstraintFamily) -> Result<OfflineSolution> {
    let n = set.dim();
    if n > 3 {
        return Err(Error::Offline(format!("grid mode needs n ≤ 3, got {n}")));
    }
    if matches!(set.kind(), SetKind::Simplex { .. }) && n > 1 {
        return Err(Error::Offline("grid mode does not cover the simplex".into()));
    }
    let h = set.diameter() / GRID_DIVISIONS;
    let (lo, hi) = set.bounding_box();
    let m: Vec<usize> = (0..n).map(|j| (((hi[j] - lo[j]) / h).ceil() as usize).max(1)).collect();
    let coord = |k: &[usize]| -> Vec<f64> {
        (0..n)
            .map(|j| lo[j] + (hi[j] - lo[j]) * k[j] as f64 / m[j] as f64)
            .collect()
    };
    let feasible = |x: &[f64]| set.contains(x, 0.0) && cons.values(x).iter().all(|g| *g <= 0.0);

    let total: f64 = m.iter().map(|v| (v + 1) as f64).product();
    let r = if total <= GRID_BUDGET {
        1
    } else {
        (total / GRID_BUDGET).powf(1.0 / n as f64).ceil() as usize
    };
    // coarse pass over indices that are multiples of r (plus the far edge)
    let axes: Vec<Vec<usize>> = m
        .iter()
        .map(|&mj| {
            let mut v: Vec<usize> = (0..=mj).step_by(r).collect();
            if *v.last().expect("nonempty") != mj {
                v.push(mj);
            }
            v
        })
        .collect();
    let mut best: Vec<(f64, Vec<usize>)> = Vec::new();
    let keep = if r == 1 { 1 } else { REFINE_CANDIDATES };
    for_each_index(&axes, |k| {
        let x = coord(k);
        if feasible(&x) {
            let v = agg.value(&x);
            if best.len() < keep || v < best.last().expect("nonempty").0 {
                best.push((v, k.to_vec()));
                best.sort_by(|a, b| a.0.total_cmp(&b.0));
                best.truncate(keep);
            }
        }
    });
    if r > 1 {
        let mut refined: Option<(f64, Vec<usize>)> = None;
        for (_, k) in &best {
            let local: Vec<Vec<usize>> = (0..n)
                .map(|j| (k[j].saturating_sub(r)..=(k[j] + r).min(m[j])).collect())
                .collect();
            for_each_index(&local, |kk| {
                let x = coord(kk);
                if feasible(&x) {
                    let v = agg.value(&x);
                    if refined.as_ref().is_none_or(|b| v < b.0) {
                        refined = Some((v, kk.to_vec()));
                    }
                }
            });
        }
        best = refined.into_iter().collect();
    }
    let (grid_value, k) = best
        .into_iter()
        .next()
        .ok_or_else(|| Error::Offline("no feasible grid point".into()))?;
    let grid_point = coord(&k);

    // local polish from the grid point
    let mut point = grid_point.clone();
    let mut value = grid_value;
    if let Ok(x) = alm(agg, set, cons, &grid_point) {
        let x = if cons.all_convex() {
            restore_feasibility(set, cons, x).ok()
        } else {
            Some(x)
        };
        if let Some(x) = x.filter(|x| feasible(x)) {
            let v = agg.value(&x);
            if v <= value {
                point = x;
                value = v;
            }
        }
    }
    let half_diag = 0.5 * h * (n as f64).sqrt();
    let certificate =
        norm(&agg.gradient(&point)) * half_diag + 0.5 * agg.hessian.sym_spectral_norm() * half_diag * half_diag;
    Ok(OfflineSolution {
        point,
        value,
        mode: OfflineMode::Grid,
        certificate,
    })
}

fn for_each_index(axes: &[Vec<usize>], mut f: impl FnMut(&[usize])) {
    let n = axes.len();
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut pos = vec![0usize; n];
    let mut k: Vec<usize> = axes.iter().map(|a| a[0]).collect();
    loop {
        f(&k);
        let mut j = 0;
        loop {
            if j == n {
                return;
            }
            pos[j] += 1;
            if pos[j] < axes[j].len() {
                k[j] = axes[j][pos[j]];
                break;
            }
            pos[j] = 0;
            k[j] = axes[j][0];
            j += 1;
        }
    }
}

/// Average objective regret against the best fixed feasible decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveRegret {
    /// `(1/T) Σ f_t(x^t) − (1/T) Σ f_t(x*)`; may be negative.
    pub regret: f64,
    /// `(κ_f² + ½ν_g² + ½‖x¹ − x*‖²) T^{-1/2}`
    pub bound: f64,
    pub dist_x1: f64,
}

pub fn objective_regret(
    ledger: &RegretLedger,
    offline: &OfflineSolution,
    x1: &[f64],
    kappa_f: f64,
    nu_g: f64,
) -> Result<ObjectiveRegret> {
    let t = ledger.len();
    if t == 0 {
        return Err(Error::EmptyLedger);
    }
    check_dim(offline.point.len(), x1.len())?;
    let tf = t as f64;
    let d = dist(x1, &offline.point);
    Ok(ObjectiveRegret {
        regret: (ledger.sum_f() - offline.value) / tf,
        bound: (kappa_f * kappa_f + 0.5 * nu_g * nu_g + 0.5 * d * d) / tf.sqrt(),
        dist_x1: d,
    })
}
