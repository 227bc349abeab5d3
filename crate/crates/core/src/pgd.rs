//! Projected gradient descent with Armijo backtracking.

use crate::geometry::SimpleSet;
use crate::linalg::{dist, dot, norm_sq};

pub const DEFAULT_SHRINK: f64 = 0.5;
pub const DEFAULT_SUFFICIENT_DECREASE: f64 = 1e-4;

const MIN_STEP: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOutcome {
    /// Iterate with the smallest residual seen.
    pub x: Vec<f64>,
    pub value: f64,
    /// `‖x − Π(x − η∇F(x))‖ / η` at the last accepted step `η`.
    pub residual: f64,
    pub step: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct PgdSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

/// Minimizes a C¹ function over `set` starting from the feasible `x0`.
pub fn minimize<F>(set: &SimpleSet, mut f: F, x0: &[f64], settings: PgdSettings) -> PgdOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    let (mut fx, mut gx) = f(&x);
    let mut step = settings.initial_step;
    let mut best = PgdOutcome {
        x: x.clone(),
        value: fx,
        residual: f64::INFINITY,
        step,
        iterations: 0,
        converged: false,
    };

    for k in 0..=settings.max_iters {
        let trial = projected_step(set, &x, &gx, step);
        let residual = dist(&trial, &x) / step;
        if residual < best.residual {
            best = PgdOutcome {
                x: x.clone(),
                value: fx,
                residual,
                step,
                iterations: k,
                converged: false,
            };
        }
        if residual <= settings.tol {
            best.converged = true;
            best.iterations = k;
            return best;
        }
        if k == settings.max_iters {
            break;
        }

        // backtrack from a doubled step
        let mut eta = step * 2.0;
        let (x_new, f_new, g_new) = loop {
            let cand = projected_step(set, &x, &gx, eta);
            let d: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
            let (fc, gc) = f(&cand);
            let slope = dot(&gx, &d);
            let noise = 1e-13 * (1.0 + fx.abs());
            let accepted = if (fc - fx).abs() > noise {
                // Armijo plus the descent-lemma upper model; the latter keeps
                // η near 1/L instead of oscillating at steps close to 2/L.
                fc <= fx + settings.sufficient_decrease * slope && fc <= fx + slope + norm_sq(&d) / (2.0 * eta)
            } else {
                // Values agree to roundoff; use the local curvature test, which
                // implies sufficient decrease through the descent lemma.
                let curvature: f64 = gc.iter().zip(&gx).zip(&d).map(|((a, b), di)| (a - b) * di).sum();
                curvature <= norm_sq(&d) / eta
            };
            if accepted || eta < MIN_STEP {
                break (cand, fc, gc);
            }
            eta *= settings.shrink;
        };
        step = eta;
        x = x_new;
        fx = f_new;
        gx = g_new;
    }
    best.iterations = settings.max_iters;
    best
}

fn projected_step(set: &SimpleSet, x: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    let y: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - eta * gi).collect();
    set.project(&y).expect("dimension checked by caller")
}
