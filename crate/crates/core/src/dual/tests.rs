use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::opmm::{prox_objective, solve_subproblem, update_multipliers};
use crate::oracle::QuadModel;

fn unit_box(n: usize) -> SimpleSet {
    SimpleSet::boxed(vec![-1.0; n], vec![1.0; n]).unwrap()
}

struct Instance {
    set: SimpleSet,
    models: RoundModels,
    lambda: Vec<f64>,
    sigma: f64,
    alpha: f64,
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize, ball: bool) -> Instance {
    let set = if ball {
        SimpleSet::ball(vec![0.0; n], 1.0).unwrap()
    } else {
        unit_box(n)
    };
    let x_t = set.sample(rng);
    let mut v = |k: usize, s: f64| (0..k).map(|_| rng.random_range(-s..s)).collect::<Vec<f64>>();
    let objective = QuadModel {
        anchor: x_t.clone(),
        constant: v(1, 1.0)[0],
        grad: v(n, 2.0),
        theta: Theta::ScalarIdentity(v(1, 1.0)[0].abs()),
    };
    let constraints = (0..p)
        .map(|_| QuadModel {
            anchor: x_t.clone(),
            constant: v(1, 1.0)[0],
            grad: v(n, 1.5),
            theta: Theta::Zero,
        })
        .collect();
    let lambda = v(p, 1.0).into_iter().map(f64::abs).collect();
    let sigma = rng.random_range(0.2..2.0);
    let alpha = rng.random_range(0.5..3.0);
    Instance {
        set,
        models: RoundModels { objective, constraints },
        lambda,
        sigma,
        alpha,
    }
}

impl Instance {
    fn dual(&self) -> DualProblem<'_> {
        let flags = vec![true; self.lambda.len()];
        DualProblem::from_models(&self.set, &self.models, &flags, &self.lambda, self.sigma, self.alpha).unwrap()
    }
}

fn tight() -> InnerSolverParams {
    InnerSolverParams {
        tol: 1e-12,
        max_iters: 200_000,
        ..InnerSolverParams::default()
    }
}

#[test]
fn zero_instance_is_trivial() {
    let set = unit_box(2);
    let dp = DualProblem::from_parts(
        &set,
        vec![0.0, 0.0],
        0.0,
        vec![0.0, 0.0],
        vec![0.0],
        Mat::from_rows(&[vec![1.0, 0.0]]),
        vec![0.0],
        1.0,
        1.0,
        0.0,
    )
    .unwrap();
    let (v, g) = dp.objective(&[0.0]).unwrap();
    assert_eq!((v, g), (0.0, vec![0.0]));
    assert_eq!(dp.recover_primal(&[0.0]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn recover_primal_examples() {
    let set = SimpleSet::boxed(vec![-10.0], vec![10.0]).unwrap();
    let dp = DualProblem::from_parts(
        &set,
        vec![0.0],
        0.0,
        vec![1.0],
        vec![-5.0],
        Mat::from_rows(&[vec![1.0]]),
        vec![0.0],
        1.0,
        1.0,
        0.0,
    )
    .unwrap();
    assert_eq!(dp.recover_primal(&[0.0]).unwrap(), vec![-1.0]);
    // large step lands on the boundary
    assert_eq!(dp.recover_primal(&[100.0]).unwrap(), vec![-10.0]);
    // the dual route reproduces the primal subproblem on this instance
    let sol = dp.solve(&InnerSolverParams::default()).unwrap();
    assert_eq!(sol.state.y, vec![0.0]);
    assert_eq!(dp.recover_primal(&sol.state.y).unwrap(), vec![-1.0]);
}

#[test]
fn recover_multiplier_examples() {
    assert_eq!(recover_multiplier(&[0.0, 0.0], 0.5, &[2.0, 4.0]), vec![1.0, 2.0]);
    assert_eq!(recover_multiplier(&[-0.3], 0.5, &[0.0]), vec![0.0]);
}

#[test]
fn strictly_feasible_anchor_gives_zero_dual() {
    let set = unit_box(2);
    let dp = DualProblem::from_parts(
        &set,
        vec![0.0, 0.0],
        0.0,
        vec![0.1, -0.1],
        vec![-0.5, -0.8],
        Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
        vec![0.0, 0.0],
        0.1,
        1.0,
        0.0,
    )
    .unwrap();
    let (_, g0) = dp.objective(&[0.0, 0.0]).unwrap();
    assert!(g0.iter().all(|v| *v <= 0.0));
    let sol = dp.solve(&InnerSolverParams::default()).unwrap();
    assert_eq!(sol.state.y, vec![0.0, 0.0]);
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k in 0..200 {
        let inst = random_instance(&mut rng, 3, 2, k % 2 == 0);
        let dp = inst.dual();
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(0.05..2.0)).collect();
        let (_, g) = dp.objective(&y).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            let fd = (dp.objective(&yp).unwrap().0 - dp.objective(&ym).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "{fd} vs {}", g[i]);
        }
    }
}

#[test]
fn concavity_probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for k in 0..50 {
        let inst = random_instance(&mut rng, 2, 3, k % 2 == 1);
        let dp = inst.dual();
        for _ in 0..10 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..3.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..3.0)).collect();
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let (fa, fb, fm) = (
                dp.objective(&a).unwrap().0,
                dp.objective(&b).unwrap().0,
                dp.objective(&m).unwrap().0,
            );
            assert!(fm >= 0.5 * (fa + fb) - 1e-9);
        }
    }
}

#[test]
fn solution_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for k in 0..40 {
        let inst = random_instance(&mut rng, 2, 2, k % 2 == 0);
        let dp = inst.dual();
        let inner = tight();
        let sol = dp.solve(&inner).unwrap();
        let y = &sol.state.y;
        // ascent from the warm start
        assert!(sol.state.omega_value >= dp.objective(&inst.lambda).unwrap().0 - 1e-12);
        let x_dual = dp.recover_primal(y).unwrap();

        // primal route on the same subproblem
        let x_t = inst.models.anchor().to_vec();
        let primal = solve_subproblem(
            &inst.set,
            &inst.models,
            &inst.lambda,
            inst.sigma,
            inst.alpha,
            &x_t,
            &inner,
        )
        .unwrap();
        assert!(dist(&x_dual, &primal.x) <= 1e-6, "{x_dual:?} vs {:?}", primal.x);

        // multiplier identity
        let direct = update_multipliers(&inst.lambda, inst.sigma, &inst.models, &x_dual);
        let recovered = recover_multiplier(&sol.state.omega_gradient, inst.sigma, y);
        assert!(dist(&direct, &recovered) <= 10.0 * sol.tol.max(1e-12));

        // zero duality gap
        let pv = dp.primal_objective(&x_dual);
        let dv = sol.state.omega_value + dp.f_value();
        assert!((pv - dv).abs() <= 1e-6 * (1.0 + pv.abs() + dv.abs()), "{pv} vs {dv}");
        // the primal objective differs from F only by the constant −‖λ‖²/2σ
        let f = prox_objective(&inst.models, &inst.lambda, inst.sigma, inst.alpha, &x_t, &x_dual).0;
        assert_relative_eq!(
            f,
            pv - norm_sq(&inst.lambda) / (2.0 * inst.sigma),
            epsilon = 1e-9 * (1.0 + f.abs())
        );
    }
}

#[test]
fn tolerance_sweep_stabilizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 3, 2, false);
        let dp = inst.dual();
        let ys: Vec<Vec<f64>> = [1e-6, 1e-8, 1e-10]
            .iter()
            .map(|&tol| {
                dp.solve(&InnerSolverParams {
                    tol,
                    max_iters: 200_000,
                    ..InnerSolverParams::default()
                })
                .unwrap()
                .state
                .y
            })
            .collect();
        assert!(dist(&ys[0], &ys[2]) <= 1e-5);
        assert!(dist(&ys[1], &ys[2]) <= 1e-5);
    }
}

#[test]
fn rejects_nonconvex_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let inst = random_instance(&mut rng, 2, 1, false);
    let r = DualProblem::from_models(&inst.set, &inst.models, &[false], &inst.lambda, 1.0, 1.0);
    assert!(matches!(r, Err(Error::ConvexityRequired(_))));
    let mut curved = inst.models.clone();
    curved.constraints[0].theta = Theta::ScalarIdentity(1.0);
    let r = DualProblem::from_models(&inst.set, &curved, &[true], &inst.lambda, 1.0, 1.0);
    assert!(matches!(r, Err(Error::ConvexityRequired(_))));
}
