use super::*;
use crate::linalg::{dist, norm};

pub(crate) const CONVEX_2D: &str = r#"
schema_version = 1
horizon = 16

[params]
preset = "theorem1"

[set]
kind = "box"
lower = [-1.0, -1.0]
upper = [1.0, 1.0]

[constraints]
family = "linear"
a = [[1.0, 1.0], [1.0, -1.0]]
b = [0.5, 0.5]
slater = [0.0, 0.0]

[stream]
kind = "linear-drift"
seed = 7
scale = 1.0
period = 40.0
"#;

fn cfg(text: &str) -> RunConfig {
    RunConfig::from_toml(text).unwrap()
}

#[test]
fn one_round_run() {
    let c = cfg(&CONVEX_2D
        .replace("horizon = 16", "horizon = 1")
        .replace("scale = 1.0", "scale = 0.0"));
    let out = run(&c, None).unwrap();
    assert_eq!(out.csv.lines().count(), 2);
    assert_eq!(
        out.csv.lines().next().unwrap(),
        "t,f_t_xt,g_1,g_2,lambda_norm,comp_residual,lag_residual_avg_norm,viol_avg_max,psi_bound,step_bound_ok"
    );
    // zero losses keep x at the strictly feasible origin
    assert_eq!(out.summary.final_state.lambda, vec![0.0, 0.0]);
    let r = &out.report.regrets;
    assert_eq!((r.lagrangian, r.complementarity, r.objective), (0.0, 0.0, 0.0));
}

#[test]
fn runs_are_deterministic_and_csv_matches_ledger() {
    let c = cfg(CONVEX_2D);
    let a = run(&c, None).unwrap();
    let b = run(&c, None).unwrap();
    assert_eq!(a.csv, b.csv);
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.csv.lines().count(), 17);
    let from_csv = regrets_from_csv(&a.csv).unwrap();
    let r = &a.summary.regrets;
    assert_eq!(from_csv.rounds, 16);
    assert!((from_csv.lagrangian - r.lagrangian).abs() <= 1e-12);
    assert!((from_csv.max_violation - r.max_violation).abs() <= 1e-12);
    assert!((from_csv.complementarity - r.complementarity).abs() <= 1e-12);
    assert!((from_csv.objective - r.objective).abs() <= 1e-12);
    let other = run(&c.with_seed(8), None).unwrap();
    assert_ne!(a.csv, other.csv);
}

#[test]
fn trace_reaccumulation_matches_ledger() {
    // independent re-accumulation from the raw trace of a 1-D run
    let text = r#"
schema_version = 1
horizon = 16

[params]
preset = "custom"
sigma = 0.7
alpha = 1.5

[set]
kind = "box"
lower = [-2.0]
upper = [2.0]

[constraints]
family = "linear"
a = [[1.0]]
b = [-0.5]
slater = [-1.0]

[stream]
kind = "linear-drift"
seed = 3
scale = 2.0
period = 5.0
"#;
    let out = run(&cfg(text), None).unwrap();
    let tr = &out.traces;
    let (mut h, mut g, mut comp, mut f) = (0.0, 0.0, 0.0, 0.0);
    let c = cfg(text);
    let set = c.build_set().unwrap();
    let mut stream = c.stream.build(&set).unwrap();
    let losses: Vec<_> = (0..=16).map(|_| stream.next_loss()).collect();
    for r in tr {
        let t = r.t;
        // ∇f_{t+1} + λ⁺ g' + w with g(x) = x + 0.5
        h += losses[t].gradient(&r.x_next)[0] + r.lambda_next[0] + r.w[0];
        g += r.x[0] + 0.5;
        let l = r.lambda_next[0];
        comp += (l - (l + 0.7 * (r.x_next[0] + 0.5)).max(0.0)).abs();
        f += losses[t - 1].value(&r.x);
    }
    let reg = &out.summary.regrets;
    assert!((reg.lagrangian - h.abs() / 16.0).abs() <= 1e-12);
    assert!((reg.violation[0] - g / 16.0).abs() <= 1e-12);
    assert!((reg.complementarity - comp / 16.0).abs() <= 1e-12);
    assert!((reg.objective - f / 16.0).abs() <= 1e-12);
    // the constraint binds: x^t is pushed to x ≤ −0.5 on average
    assert!(tr.iter().any(|r| r.lambda_next[0] > 0.0));
}

#[test]
fn primal_and_dual_routes_agree() {
    let c = cfg(&CONVEX_2D.replace("horizon = 16", "horizon = 40"));
    let p = run(&c, Some(Route::Primal)).unwrap();
    let d = run(&c, Some(Route::Dual)).unwrap();
    for (a, b) in p.traces.iter().zip(&d.traces) {
        assert!(dist(&a.x_next, &b.x_next) <= 1e-6);
        assert!((norm(&a.lambda_next) - norm(&b.lambda_next)).abs() <= 1e-6);
        let info = b.dual.as_ref().unwrap();
        assert!(info.identity_gap <= 1e-9);
        assert!(info.duality_gap.abs() <= 1e-6 * (1.0 + info.primal_value.abs() + info.dual_value.abs()));
    }
}

#[test]
fn dual_route_rejects_nonconvex() {
    let text = CONVEX_2D.replace(
        "family = \"linear\"\na = [[1.0, 1.0], [1.0, -1.0]]\nb = [0.5, 0.5]",
        "family = \"sine\"\na = [[1.0, 0.5]]\nb = [0.3]",
    );
    let c = cfg(&text);
    assert!(matches!(run(&c, Some(Route::Dual)), Err(Error::ConvexityRequired(_))));
    let report = check(&c, Some(Route::Dual), 64, 0).unwrap();
    assert!(!report.passed());
}

#[test]
fn check_reports() {
    let c = cfg(CONVEX_2D);
    let r = check(&c, Some(Route::Dual), 64, 0).unwrap();
    assert!(r.passed(), "{r}");

    // zero curvature on a non-convex family violates the minorant condition
    let text = CONVEX_2D
        .replace(
            "family = \"linear\"\na = [[1.0, 1.0], [1.0, -1.0]]\nb = [0.5, 0.5]",
            "family = \"sine\"\na = [[1.0, 0.5]]\nb = [0.3]",
        )
        .replace("slater = [0.0, 0.0]", "slater = [-0.5, 0.0]");
    let r = check(&cfg(&text), None, 64, 0).unwrap();
    assert!(!r.audit.passed(Assumption::B2), "{r}");
    assert!(!r.passed());
}

#[test]
fn concave_minorant_replay_warns_on_convexity() {
    // strong curvature and a tight constraint drive λ up; the augmented
    // Lagrangian then loses convexity along some segments
    let text = r#"
schema_version = 1
horizon = 200

[params]
preset = "custom"
sigma = 1.0
alpha = 0.05

[theta]
kind = "concave-minorant"
eta0 = 0.0

[set]
kind = "box"
lower = [-3.0, -3.0]
upper = [3.0, 3.0]

[constraints]
family = "sine"
a = [[3.0, 3.0]]
b = [-2.5]
slater = [-1.5707963267948966, -1.5707963267948966]

[stream]
kind = "linear-drift"
seed = 1
scale = 3.0
period = 0.0
stationary = true
"#;
    let r = check(&cfg(text), None, 128, 0).unwrap();
    assert!(r.warnings.iter().any(|w| w.assumption == Assumption::B4), "{r}");
    assert!(r.to_string().contains("WARN"));
}

#[test]
fn sweep_needs_four_horizons() {
    let c = cfg(CONVEX_2D);
    assert!(sweep(&c, &[16, 32, 64], None).is_err());
    let s = sweep(&c, &[16, 32, 64, 128], None).unwrap();
    assert_eq!(s.rows.len(), 4);
    assert!(s.slopes.complementarity.is_some() || s.rows.iter().any(|r| r.complementarity == 0.0));
    assert_eq!(s.to_csv().lines().count(), 5);
}

#[test]
fn summary_toml_has_theory_block() {
    let out = run(&cfg(CONVEX_2D), None).unwrap();
    let text = out.report.to_toml().unwrap();
    assert!(text.contains("[theory]") && text.contains("rho0") && text.contains(LAST_LOSS_NOTE));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let summary = write_run(&path, &out).unwrap();
    assert_eq!(summary, dir.path().join("run.summary.toml"));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), out.csv);
}
