//! Synthetic loss streams and constraint families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::seed;
use crate::error::{check_dim, Error, Result};
use crate::geometry::SimpleSet;
use crate::linalg::{dot, norm, sub, Mat};
use crate::oracle::{ConstraintConstants, ConstraintFamily, LossConstants, LossStream, RoundOracle};

/// Which loss stream to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StreamSpec {
    /// `f_t(x) = ⟨c_t, x⟩` with `‖c_t‖ ≤ scale`.
    LinearDrift {
        #[serde(with = "seed")]
        seed: u64,
        scale: f64,
        /// Period of the slow oscillation of `c_t`, in rounds.
        period: f64,
        #[serde(default)]
        stationary: bool,
    },
    /// `f_t(x) = ½(x − b_t)ᵀA_t(x − b_t)`, `A_t = μI + curvature·MMᵀ/n`, `b_t ∈ C`.
    QuadConvex {
        #[serde(with = "seed")]
        seed: u64,
        curvature: f64,
        mu: f64,
        #[serde(default)]
        stationary: bool,
    },
    /// `f_t(x) = ⟨c_t, x⟩ + a_t Σ_j sin x_j` with `|a_t| ≤ amplitude`.
    NonconvexSmooth {
        #[serde(with = "seed")]
        seed: u64,
        scale: f64,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        stationary: bool,
    },
}

impl StreamSpec {
    pub fn seed(&self) -> u64 {
        match self {
            StreamSpec::LinearDrift { seed, .. }
            | StreamSpec::QuadConvex { seed, .. }
            | StreamSpec::NonconvexSmooth { seed, .. } => *seed,
        }
    }

    pub fn with_seed(&self, new_seed: u64) -> StreamSpec {
        let mut s = self.clone();
        match &mut s {
            StreamSpec::LinearDrift { seed, .. }
            | StreamSpec::QuadConvex { seed, .. }
            | StreamSpec::NonconvexSmooth { seed, .. } => *seed = new_seed,
        }
        s
    }

    pub fn build(&self, set: &SimpleSet) -> Result<Box<dyn LossStream>> {
        let n = set.dim();
        let nonneg = |name: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConstant { name, value: v })
            }
        };
        match *self {
            StreamSpec::LinearDrift {
                seed,
                scale,
                period,
                stationary,
            } => {
                nonneg("scale", scale)?;
                nonneg("period", period)?;
                Ok(Box::new(Stream::new(
                    seed,
                    stationary,
                    LossConstants {
                        kappa_f: scale,
                        l_f: 0.0,
                    },
                    Generator::Linear(Drift::new(n, scale, period, seed)),
                )))
            }
            StreamSpec::QuadConvex {
                seed,
                curvature,
                mu,
                stationary,
            } => {
                nonneg("curvature", curvature)?;
                nonneg("mu", mu)?;
                // ‖MMᵀ‖ ≤ ‖M‖_F² ≤ n² for entries in [−1, 1]
                let a_max = mu + curvature * n as f64;
                Ok(Box::new(Stream::new(
                    seed,
                    stationary,
                    LossConstants {
                        kappa_f: a_max * set.diameter(),
                        l_f: a_max,
                    },
                    Generator::Quadratic {
                        set: set.clone(),
                        curvature,
                        mu,
                    },
                )))
            }
            StreamSpec::NonconvexSmooth {
                seed,
                scale,
                amplitude,
                period,
                stationary,
            } => {
                nonneg("scale", scale)?;
                nonneg("amplitude", amplitude)?;
                nonneg("period", period)?;
                Ok(Box::new(Stream::new(
                    seed,
                    stationary,
                    LossConstants {
                        kappa_f: scale + amplitude * (n as f64).sqrt(),
                        l_f: amplitude,
                    },
                    Generator::Sine {
                        drift: Drift::new(n, scale, period, seed),
                        amplitude,
                    },
                )))
            }
        }
    }
}

/// Bounded slowly rotating vectors `c_t` with `‖c_t‖ ≤ scale`.
#[derive(Debug, Clone)]
struct Drift {
    phases: Vec<f64>,
    scale: f64,
    period: f64,
}

impl Drift {
    fn new(n: usize, scale: f64, period: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let phases = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        Drift { phases, scale, period }
    }

    fn draw(&self, t: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let per = self.scale / (self.phases.len() as f64).sqrt();
        let omega = if self.period > 0.0 {
            std::f64::consts::TAU / self.period
        } else {
            0.0
        };
        self.phases
            .iter()
            .map(|ph| {
                let noise = rng.random_range(-1.0..=1.0);
                per * (0.5 * (omega * t as f64 + ph).sin() + 0.5 * noise)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Generator {
    Linear(Drift),
    Quadratic { set: SimpleSet, curvature: f64, mu: f64 },
    Sine { drift: Drift, amplitude: f64 },
}

struct Stream {
    rng: ChaCha8Rng,
    t: u64,
    stationary: bool,
    first: Option<LossKind>,
    constants: LossConstants,
    generator: Generator,
    dim: usize,
}

impl Stream {
    fn new(seed: u64, stationary: bool, constants: LossConstants, generator: Generator) -> Self {
        let dim = match &generator {
            Generator::Linear(d) | Generator::Sine { drift: d, .. } => d.phases.len(),
            Generator::Quadratic { set, .. } => set.dim(),
        };
        Stream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
            stationary,
            first: None,
            constants,
            generator,
            dim,
        }
    }

    fn draw(&mut self) -> LossKind {
        self.t += 1;
        let rng = &mut self.rng;
        match &self.generator {
            Generator::Linear(d) => LossKind::Linear(d.draw(self.t, rng)),
            Generator::Sine { drift, amplitude } => LossKind::Sine {
                c: drift.draw(self.t, rng),
                a: amplitude * rng.random_range(-1.0..=1.0),
            },
            Generator::Quadratic { set, curvature, mu } => {
                let n = set.dim();
                let m: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let mut a = Mat::identity(n).scaled(*mu);
                for i in 0..n {
                    for j in 0..n {
                        let s: f64 = (0..n).map(|k| m[i * n + k] * m[j * n + k]).sum();
                        a.set(i, j, a.get(i, j) + curvature * s / n as f64);
                    }
                }
                LossKind::Quadratic { a, b: set.sample(rng) }
            }
        }
    }
}

impl LossStream for Stream {
    fn dim(&self) -> usize {
        self.dim
    }

    fn constants(&self) -> LossConstants {
        self.constants
    }

    fn next_loss(&mut self) -> Box<dyn RoundOracle> {
        let loss = if self.stationary {
            if self.first.is_none() {
                self.first = Some(self.draw());
            }
            self.first.clone().expect("drawn")
        } else {
            self.draw()
        };
        Box::new(loss)
    }
}

/// A single round's loss.
#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    Linear(Vec<f64>),
    Quadratic { a: Mat, b: Vec<f64> },
    Sine { c: Vec<f64>, a: f64 },
}

impl RoundOracle for LossKind {
    fn dim(&self) -> usize {
        match self {
            LossKind::Linear(c) | LossKind::Sine { c, .. } => c.len(),
            LossKind::Quadratic { b, .. } => b.len(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            LossKind::Linear(c) => dot(c, x),
            LossKind::Quadratic { a, b } => {
                let d = sub(x, b);
                0.5 * dot(&d, &a.mul_vec(&d))
            }
            LossKind::Sine { c, a } => dot(c, x) + a * x.iter().map(|v| v.sin()).sum::<f64>(),
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LossKind::Linear(c) => c.clone(),
            LossKind::Quadratic { a, b } => a.mul_vec(&sub(x, b)),
            LossKind::Sine { c, a } => c.iter().zip(x).map(|(ci, xi)| ci + a * xi.cos()).collect(),
        }
    }

    fn quadratic_hessian(&self) -> Option<Mat> {
        match self {
            LossKind::Quadratic { a, .. } => Some(a.clone()),
            _ => None,
        }
    }
}

/// Which constraint family to build. Every family carries its Slater point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintSpec {
    /// `g_i(x) = ⟨a_i, x⟩ − b_i`
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        slater: Vec<f64>,
    },
    /// `g_i(x) = ½(‖x − c_i‖² − r_i²)`
    QuadraticBall {
        centers: Vec<Vec<f64>>,
        radii: Vec<f64>,
        slater: Vec<f64>,
    },
    /// `g_i(x) = Σ_j a_ij sin x_j − b_i`, not convex.
    Sine {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        slater: Vec<f64>,
    },
}

impl ConstraintSpec {
    pub fn build(&self, set: &SimpleSet) -> Result<Box<dyn ConstraintFamily>> {
        let n = set.dim();
        let rows_ok = |rows: &[Vec<f64>], k: usize, slater: &[f64]| -> Result<()> {
            check_dim(n, slater.len())?;
            check_dim(rows.len(), k)?;
            if rows.is_empty() {
                return Err(Error::Config("constraint family needs at least one constraint".into()));
            }
            rows.iter().try_for_each(|r| check_dim(n, r.len()))
        };
        match self {
            ConstraintSpec::Linear { a, b, slater } => {
                rows_ok(a, b.len(), slater)?;
                let kappa_g = a.iter().map(|r| norm(r)).fold(0.0, f64::max);
                let nu_sq: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(r, bi)| {
                        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
                        let hi = dot(r, &set.support_point(r)) - bi;
                        let lo = dot(r, &set.support_point(&neg)) - bi;
                        hi.abs().max(lo.abs()).powi(2)
                    })
                    .sum();
                Ok(Box::new(Family {
                    kind: FamilyKind::Linear {
                        a: Mat::from_rows(a),
                        b: b.clone(),
                    },
                    constants: ConstraintConstants {
                        kappa_g,
                        nu_g: nu_sq.sqrt(),
                        l_g: 0.0,
                    },
                    slater: slater.clone(),
                }))
            }
            ConstraintSpec::QuadraticBall { centers, radii, slater } => {
                rows_ok(centers, radii.len(), slater)?;
                let mut kappa_g: f64 = 0.0;
                let mut nu_sq = 0.0;
                for (c, r) in centers.iter().zip(radii) {
                    let far = set.max_distance_from(c);
                    kappa_g = kappa_g.max(far);
                    let bound = 0.5 * (far * far - r * r).max(r * r);
                    nu_sq += bound * bound;
                }
                Ok(Box::new(Family {
                    kind: FamilyKind::Ball {
                        centers: centers.clone(),
                        radii: radii.clone(),
                    },
                    constants: ConstraintConstants {
                        kappa_g,
                        nu_g: nu_sq.sqrt(),
                        l_g: 1.0,
                    },
                    slater: slater.clone(),
                }))
            }
            ConstraintSpec::Sine { a, b, slater } => {
                rows_ok(a, b.len(), slater)?;
                let kappa_g = a.iter().map(|r| norm(r)).fold(0.0, f64::max);
                let l_g = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
                let nu_sq: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(r, bi)| (r.iter().map(|v| v.abs()).sum::<f64>() + bi.abs()).powi(2))
                    .sum();
                Ok(Box::new(Family {
                    kind: FamilyKind::Sine {
                        a: Mat::from_rows(a),
                        b: b.clone(),
                    },
                    constants: ConstraintConstants {
                        kappa_g,
                        nu_g: nu_sq.sqrt(),
                        l_g,
                    },
                    slater: slater.clone(),
                }))
            }
        }
    }
}

#[derive(Debug, Clone)]
enum FamilyKind {
    Linear { a: Mat, b: Vec<f64> },
    Ball { centers: Vec<Vec<f64>>, radii: Vec<f64> },
    Sine { a: Mat, b: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Family {
    kind: FamilyKind,
    constants: ConstraintConstants,
    slater: Vec<f64>,
}

impl ConstraintFamily for Family {
    fn dim(&self) -> usize {
        self.slater.len()
    }

    fn count(&self) -> usize {
        match &self.kind {
            FamilyKind::Linear { b, .. } | FamilyKind::Sine { b, .. } => b.len(),
            FamilyKind::Ball { radii, .. } => radii.len(),
        }
    }

    fn values(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            FamilyKind::Linear { a, b } => a.mul_vec(x).iter().zip(b).map(|(v, bi)| v - bi).collect(),
            FamilyKind::Ball { centers, radii } => centers
                .iter()
                .zip(radii)
                .map(|(c, r)| 0.5 * (crate::linalg::norm_sq(&sub(x, c)) - r * r))
                .collect(),
            FamilyKind::Sine { a, b } => {
                let s: Vec<f64> = x.iter().map(|v| v.sin()).collect();
                a.mul_vec(&s).iter().zip(b).map(|(v, bi)| v - bi).collect()
            }
        }
    }

    fn jacobian(&self, x: &[f64]) -> Mat {
        match &self.kind {
            FamilyKind::Linear { a, .. } => a.clone(),
            FamilyKind::Ball { centers, .. } => {
                let rows: Vec<Vec<f64>> = centers.iter().map(|c| sub(x, c)).collect();
                Mat::from_rows(&rows)
            }
            FamilyKind::Sine { a, .. } => {
                let mut j = a.clone();
                for i in 0..a.rows() {
                    for (k, xk) in x.iter().enumerate() {
                        j.set(i, k, a.get(i, k) * xk.cos());
                    }
                }
                j
            }
        }
    }

    fn convex_flags(&self) -> Vec<bool> {
        vec![!matches!(self.kind, FamilyKind::Sine { .. }); self.count()]
    }

    fn constants(&self) -> ConstraintConstants {
        self.constants
    }

    fn slater_point(&self) -> Vec<f64> {
        self.slater.clone()
    }
}
