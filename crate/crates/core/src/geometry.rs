//! Compact convex sets with exact projections.
//!
//! Three set families are supported: boxes, Euclidean balls and the
//! probability simplex. All projections are closed forms. Weighted
//! projections are available for scalar metrics on every set and for
//! diagonal metrics on boxes, where the problem separates per coordinate.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, dot, norm};

/// Absolute tolerance for membership tests.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Default number of random samples drawn by [`SimpleSet::normal_cone_violation`].
pub const DEFAULT_NORMAL_CONE_SAMPLES: usize = 64;

const NORMAL_CONE_SEED: u64 = 0x6e6f_726d_616c_636e;

/// Boxes with more vertices than this are not enumerated.
const MAX_ENUMERATED_BOX_DIM: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetKind {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex { dimension: usize },
}

/// A nonempty compact convex set with an exact Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleSet {
    kind: SetKind,
    dim: usize,
}

/// A positive definite metric `G` defining `‖v‖²_G = vᵀ G v`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightedMetric {
    ScalarIdentity(f64),
    Diagonal(Vec<f64>),
}

impl WeightedMetric {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            WeightedMetric::ScalarIdentity(c) => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::InvalidMetric(format!("scalar weight {c} is not positive")));
                }
            }
            WeightedMetric::Diagonal(d) => {
                check_dim(n, d.len())?;
                if let Some(bad) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::InvalidMetric(format!("diagonal weight {bad} is not positive")));
                }
            }
        }
        Ok(())
    }

    /// `G v`
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            WeightedMetric::ScalarIdentity(c) => v.iter().map(|x| c * x).collect(),
            WeightedMetric::Diagonal(d) => v.iter().zip(d).map(|(x, w)| x * w).collect(),
        }
    }
}

impl SimpleSet {
    pub fn new(kind: SetKind) -> Result<Self> {
        let dim = match &kind {
            SetKind::Box { lower, upper } => {
                check_dim(lower.len(), upper.len())?;
                if lower.is_empty() {
                    return Err(Error::InvalidSet("box of dimension zero".into()));
                }
                for (l, u) in lower.iter().zip(upper) {
                    if !(l.is_finite() && u.is_finite()) || l > u {
                        return Err(Error::InvalidSet(format!("bad box bounds [{l}, {u}]")));
                    }
                }
                lower.len()
            }
            SetKind::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::InvalidSet("ball of dimension zero".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSet(format!("bad ball radius {radius}")));
                }
                center.len()
            }
            SetKind::Simplex { dimension } => {
                if *dimension == 0 {
                    return Err(Error::InvalidSet("simplex of dimension zero".into()));
                }
                *dimension
            }
        };
        Ok(SimpleSet { kind, dim })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(SetKind::Box { lower, upper })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(SetKind::Ball { center, radius })
    }

    pub fn simplex(dimension: usize) -> Result<Self> {
        Self::new(SetKind::Simplex { dimension })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Diameter `sup ‖x − x'‖` over the set.
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            SetKind::Box { lower, upper } => dist(lower, upper),
            SetKind::Ball { radius, .. } => 2.0 * radius,
            SetKind::Simplex { dimension } => {
                if *dimension >= 2 {
                    std::f64::consts::SQRT_2
                } else {
                    0.0
                }
            }
        }
    }

    /// Distance-like measure of how far `x` is outside the set (zero inside).
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        match &self.kind {
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| (l - v).max(v - u).max(0.0))
                .fold(0.0, f64::max),
            SetKind::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
            SetKind::Simplex { .. } => {
                let neg = x.iter().fold(0.0_f64, |acc, v| acc.max(-v));
                let sum: f64 = x.iter().sum();
                neg.max((sum - 1.0).abs())
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim && self.infeasibility(x) <= tol
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(match &self.kind {
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            SetKind::Ball { center, radius } => {
                let d = dist(x, center);
                if d <= *radius {
                    x.to_vec()
                } else {
                    let s = radius / d;
                    x.iter().zip(center).map(|(v, c)| c + s * (v - c)).collect()
                }
            }
            SetKind::Simplex { .. } => project_simplex(x),
        })
    }

    /// Projection in the `G`-weighted norm.
    pub fn weighted_project(&self, metric: &WeightedMetric, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        metric.validate(self.dim)?;
        match (metric, &self.kind) {
            (WeightedMetric::ScalarIdentity(_), _) => self.project(x),
            // The box problem separates, so the weights do not move the minimizer.
            (WeightedMetric::Diagonal(_), SetKind::Box { .. }) => self.project(x),
            (WeightedMetric::Diagonal(_), _) => Err(Error::UnsupportedMetricSetPair),
        }
    }

    /// `½ dist_G(x)²` and its gradient `G (x − Π^G(x))`.
    pub fn weighted_dist_sq(&self, metric: &WeightedMetric, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.weighted_project(metric, x)?;
        let d: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
        let gd = metric.apply(&d);
        Ok((0.5 * dot(&d, &gd), gd))
    }

    /// A maximizer of `⟨w, z⟩` over the set.
    pub fn support_point(&self, w: &[f64]) -> Vec<f64> {
        match &self.kind {
            SetKind::Box { lower, upper } => w
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(wj, (l, u))| if *wj > 0.0 { *u } else { *l })
                .collect(),
            SetKind::Ball { center, radius } => {
                let nw = norm(w);
                if nw == 0.0 {
                    center.clone()
                } else {
                    center.iter().zip(w).map(|(c, wj)| c + radius * wj / nw).collect()
                }
            }
            SetKind::Simplex { dimension } => {
                let mut best = 0;
                for j in 1..*dimension {
                    if w[j] > w[best] {
                        best = j;
                    }
                }
                let mut z = vec![0.0; *dimension];
                z[best] = 1.0;
                z
            }
        }
    }

    /// Vertices of boxes (up to a size cap) and simplices. `None` for balls.
    pub fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        match &self.kind {
            SetKind::Box { lower, upper } if self.dim <= MAX_ENUMERATED_BOX_DIM => Some(
                (0..1usize << self.dim)
                    .map(|mask| {
                        (0..self.dim)
                            .map(|j| if mask >> j & 1 == 1 { upper[j] } else { lower[j] })
                            .collect()
                    })
                    .collect(),
            ),
            SetKind::Simplex { dimension } => Some(
                (0..*dimension)
                    .map(|j| {
                        let mut e = vec![0.0; *dimension];
                        e[j] = 1.0;
                        e
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Draws a point of the set (uniform for boxes and balls, flat Dirichlet on the simplex).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SetKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect(),
            SetKind::Ball { center, radius } => {
                let g: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                let ng = norm(&g).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / self.dim as f64);
                center.iter().zip(&g).map(|(c, gi)| c + r * gi / ng).collect()
            }
            SetKind::Simplex { dimension } => {
                let e: Vec<f64> = (0..*dimension).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| v / s).collect()
            }
        }
    }

    /// Sample-based certificate that `w` lies in the normal cone at `x`.
    ///
    /// Returns the largest `⟨w, z − x⟩` over candidate points `z` of the set:
    /// the exact linear maximizer, the enumerable vertices and `samples`
    /// seeded random points. A value at or below a small tolerance certifies
    /// membership on the sample.
    pub fn normal_cone_violation(&self, x: &[f64], w: &[f64], samples: usize) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, w.len())?;
        let violation = self.infeasibility(x);
        if violation > FEASIBILITY_TOL {
            return Err(Error::Infeasible { violation });
        }
        let gap = |z: &[f64]| -> f64 { w.iter().zip(z.iter().zip(x)).map(|(wi, (zi, xi))| wi * (zi - xi)).sum() };

        let mut worst = gap(&self.support_point(w));
        if let Some(vs) = self.vertices() {
            for v in &vs {
                worst = worst.max(gap(v));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(NORMAL_CONE_SEED);
        for _ in 0..samples {
            worst = worst.max(gap(&self.sample(&mut rng)));
        }
        Ok(worst)
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            SetKind::Box { lower, upper } => (lower.clone(), upper.clone()),
            SetKind::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            SetKind::Simplex { dimension } => (vec![0.0; *dimension], vec![1.0; *dimension]),
        }
    }

    /// Upper bound on `sup_{z∈C} ‖z − y‖`.
    pub fn max_distance_from(&self, y: &[f64]) -> f64 {
        match &self.kind {
            SetKind::Ball { center, radius } => dist(center, y) + radius,
            _ => match self.vertices() {
                Some(vs) => vs.iter().map(|v| dist(v, y)).fold(0.0, f64::max),
                None => {
                    let (l, u) = self.bounding_box();
                    l.iter()
                        .zip(&u)
                        .zip(y)
                        .map(|((li, ui), yi)| {
                            let m = (li - yi).abs().max((ui - yi).abs());
                            m * m
                        })
                        .sum::<f64>()
                        .sqrt()
                }
            },
        }
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}` by sorting and thresholding.
fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            tau = candidate;
        }
    }
    x.iter().map(|v| (v - tau).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box(n: usize) -> SimpleSet {
        SimpleSet::boxed(vec![0.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn box_projection_clamps() {
        let c = SimpleSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(c.project(&[2.0, -0.5]).unwrap(), vec![1.0, -0.5]);
    }

    #[test]
    fn ball_interior_fixed() {
        let c = SimpleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(c.project(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    /// Brute force over a fine grid of the 2-simplex (a segment) gives (1, 0).
    #[test]
    fn simplex_projection_matches_grid_oracle() {
        let x = [2.0, 0.0];
        let steps = 100_000;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=steps {
            let a = k as f64 / steps as f64;
            let d = (x[0] - a).powi(2) + (x[1] - (1.0 - a)).powi(2);
            if d < best.0 {
                best = (d, a);
            }
        }
        assert_eq!(best.1, 1.0);
        let p = SimpleSet::simplex(2).unwrap().project(&x).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let c = unit_box(2);
        assert!(matches!(
            c.project(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn diameters() {
        assert!((SimpleSet::boxed(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap().diameter() - 5.0).abs() < 1e-15);
        assert_eq!(SimpleSet::ball(vec![1.0], 2.5).unwrap().diameter(), 5.0);
        assert_eq!(SimpleSet::simplex(4).unwrap().diameter(), std::f64::consts::SQRT_2);
    }

    #[test]
    fn invalid_sets() {
        assert!(SimpleSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(SimpleSet::ball(vec![0.0], 0.0).is_err());
        assert!(SimpleSet::simplex(0).is_err());
    }

    #[test]
    fn weighted_projection_examples() {
        let c = unit_box(1);
        let m = WeightedMetric::ScalarIdentity(3.0);
        assert_eq!(c.weighted_project(&m, &[2.0]).unwrap(), vec![1.0]);

        let b = SimpleSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let d = WeightedMetric::Diagonal(vec![1.0, 4.0]);
        assert_eq!(b.weighted_project(&d, &[2.0, 2.0]).unwrap(), vec![1.0, 1.0]);

        let s = SimpleSet::simplex(2).unwrap();
        let one = WeightedMetric::ScalarIdentity(1.0);
        assert_eq!(s.weighted_project(&one, &[0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn diagonal_metric_needs_box() {
        let s = SimpleSet::simplex(2).unwrap();
        let d = WeightedMetric::Diagonal(vec![1.0, 2.0]);
        assert_eq!(
            s.weighted_project(&d, &[0.0, 0.0]),
            Err(Error::UnsupportedMetricSetPair)
        );
        let ball = SimpleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(
            ball.weighted_dist_sq(&d, &[3.0, 0.0]),
            Err(Error::UnsupportedMetricSetPair)
        );
        assert!(unit_box(2)
            .weighted_project(&WeightedMetric::Diagonal(vec![1.0, 0.0]), &[0.0, 0.0])
            .is_err());
    }

    #[test]
    fn weighted_dist_examples() {
        let c = unit_box(1);
        let (v, g) = c
            .weighted_dist_sq(&WeightedMetric::ScalarIdentity(1.0), &[2.0])
            .unwrap();
        assert_eq!((v, g), (0.5, vec![1.0]));
        // ½·2·1² and 2·(2−1)
        let (v, g) = c
            .weighted_dist_sq(&WeightedMetric::ScalarIdentity(2.0), &[2.0])
            .unwrap();
        assert_eq!((v, g), (1.0, vec![2.0]));
        let (v, g) = c
            .weighted_dist_sq(&WeightedMetric::ScalarIdentity(2.0), &[0.3])
            .unwrap();
        assert_eq!((v, g), (0.0, vec![0.0]));
    }

    #[test]
    fn normal_cone_examples() {
        let c = unit_box(1);
        assert_eq!(c.normal_cone_violation(&[0.3], &[0.0], 64).unwrap(), 0.0);
        assert!(c.normal_cone_violation(&[1.0], &[1.0], 64).unwrap() <= 0.0);
        // maximize ⟨w, z − x⟩ over the vertices {0, 1}: attained at z = 1
        let best_vertex = [0.0_f64, 1.0]
            .iter()
            .map(|z| 1.0 * (z - 0.5))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(c.normal_cone_violation(&[0.5], &[1.0], 64).unwrap(), best_vertex);
        assert!(matches!(
            c.normal_cone_violation(&[1.5], &[1.0], 64),
            Err(Error::Infeasible { .. })
        ));
    }

    fn any_set() -> impl Strategy<Value = SimpleSet> {
        prop_oneof![
            (1usize..4).prop_flat_map(|n| {
                (
                    proptest::collection::vec(-3.0..0.0f64, n),
                    proptest::collection::vec(0.0..3.0f64, n),
                )
                    .prop_map(|(l, u)| SimpleSet::boxed(l, u).unwrap())
            }),
            (1usize..4).prop_flat_map(|n| {
                (proptest::collection::vec(-2.0..2.0f64, n), 0.1..3.0f64)
                    .prop_map(|(c, r)| SimpleSet::ball(c, r).unwrap())
            }),
            (1usize..5).prop_map(|n| SimpleSet::simplex(n).unwrap()),
        ]
    }

    fn set_and_points() -> impl Strategy<Value = (SimpleSet, Vec<f64>, Vec<f64>, u64)> {
        any_set().prop_flat_map(|s| {
            let n = s.dim();
            (
                Just(s),
                proptest::collection::vec(-6.0..6.0f64, n),
                proptest::collection::vec(-6.0..6.0f64, n),
                any::<u64>(),
            )
        })
    }

    proptest! {
        #[test]
        fn projection_properties((set, x, y, seed) in set_and_points()) {
            let px = set.project(&x).unwrap();
            let py = set.project(&y).unwrap();
            prop_assert!(set.contains(&px, 1e-10));
            // idempotence
            let ppx = set.project(&px).unwrap();
            prop_assert!(dist(&ppx, &px) <= 1e-12);
            // nonexpansive
            prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-12);
            // variational inequality on sampled z
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..16 {
                let z = set.sample(&mut rng);
                let vi: f64 = x.iter().zip(&px).zip(&z).map(|((xi, pi), zi)| (xi - pi) * (zi - pi)).sum();
                prop_assert!(vi <= 1e-9);
            }
            // a scalar metric never changes the projection
            let wp = set.weighted_project(&WeightedMetric::ScalarIdentity(0.37), &x).unwrap();
            prop_assert_eq!(wp, px);
        }

        #[test]
        fn weighted_dist_gradient_matches_central_differences(
            (set, x, _, _) in set_and_points(), c in 0.2..5.0f64
        ) {
            let metric = match set.kind() {
                SetKind::Box { .. } => WeightedMetric::Diagonal((0..set.dim()).map(|j| c + j as f64).collect()),
                _ => WeightedMetric::ScalarIdentity(c),
            };
            let (value, grad) = set.weighted_dist_sq(&metric, &x).unwrap();
            prop_assume!(value > 1e-3);
            let h = 1e-6;
            let mut fd = vec![0.0; x.len()];
            for j in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let vp = set.weighted_dist_sq(&metric, &xp).unwrap().0;
                let vm = set.weighted_dist_sq(&metric, &xm).unwrap().0;
                fd[j] = (vp - vm) / (2.0 * h);
            }
            let err = dist(&fd, &grad) / norm(&grad).max(1e-12);
            prop_assert!(err <= 1e-6, "rel err {err}");
        }
    }
}
