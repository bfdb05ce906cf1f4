mod common;

use common::pendulum_setup;
use grassmpc::control::{
    open_loop_cost, FeedbackGain, InputSequence, LinearSystem, TerminalIngredients,
};
use grassmpc::geometry::Polytope;
use grassmpc::linalg::{min_sym_eigenvalue, random_orthogonal, random_stiefel, standard_normal};
use grassmpc::mpc::{
    admissible_shift, closed_loop_cost, run_closed_loop, run_full_closed_loop, solve_full,
    solve_reduced, ClosedLoopConfig, MpcSetup, SubspacePair,
};
use grassmpc::solvers::SolverConfig;
use grassmpc::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn random_state(rng: &mut ChaCha8Rng, scale: f64) -> DVector<f64> {
    DVector::from_fn(2, |i, _| {
        scale * [1.0, 0.35][i] * (2.0 * rng.random::<f64>() - 1.0)
    })
}

/// Random states with a nonempty admissible set.
fn feasible_states(setup: &MpcSetup, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let x = random_state(&mut rng, 0.9);
        if setup.problem.admissible.is_feasible(&x, &cfg()).unwrap() {
            out.push(x);
        }
    }
    out
}

/// Admissible but suboptimal guess: a random perturbation of the optimizer
/// that stays admissible, or the optimizer itself if none is found.
fn perturbed_guess(setup: &MpcSetup, x: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let d = setup.problem.d();
    let opt = solve_full(&setup.problem, x, &cfg()).unwrap().z;
    for _ in 0..50 {
        let cand = &opt + DVector::from_fn(d, |_, _| 0.05 * standard_normal(rng));
        if setup.problem.admissible.contains(x, &cand, 0.0).unwrap() {
            return cand;
        }
    }
    opt
}

fn identity_pair(d: usize) -> SubspacePair {
    SubspacePair::new(
        DMatrix::identity(d, d),
        DMatrix::zeros(d, 2),
        DVector::zeros(d),
    )
    .unwrap()
}

#[test]
fn condensed_cost_matches_rollout() {
    let setup = pendulum_setup(8);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let x = random_state(&mut rng, 1.0);
        let z = DVector::from_fn(8, |_, _| standard_normal(&mut rng));
        let seq = InputSequence::new(z.clone(), 8).unwrap();
        let direct = open_loop_cost(&setup.sys, &setup.gain, &setup.term, &x, &seq).unwrap();
        let condensed = setup.problem.cost(&x, &z).unwrap();
        assert!((direct - condensed).abs() <= 1e-8 * direct.max(1.0));
    }
}

#[test]
fn origin_has_zero_value() {
    let setup = pendulum_setup(6);
    let sol = solve_full(&setup.problem, &DVector::zeros(2), &cfg()).unwrap();
    assert!(sol.z.amax() < 1e-12);
    assert!(sol.value.abs() < 1e-12);
}

#[test]
fn scalar_single_step_by_hand() {
    // x+ = x + u, K = -0.5, Q = R = 1, Pf = 2, |u| <= 1, |x| <= 10, Xf = [-10, 10].
    // u = -0.5x + z, x1 = 0.5x + z; J = x^2 + (z - 0.5x)^2 + 2 (0.5x + z)^2,
    // minimized at z = -x/6 when the input bound is inactive.
    let sys = LinearSystem::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
    )
    .unwrap();
    let gain = FeedbackGain::new(&sys, DMatrix::from_element(1, 1, -0.5)).unwrap();
    let term = TerminalIngredients::new(
        &sys,
        DMatrix::from_element(1, 1, 2.0),
        DMatrix::from_element(1, 1, -0.5),
        Polytope::symmetric_box(&[10.0]).unwrap(),
    )
    .unwrap();
    let setup = MpcSetup::new(
        sys,
        gain,
        term,
        Polytope::symmetric_box(&[10.0]).unwrap(),
        Polytope::symmetric_box(&[1.0]).unwrap(),
        1,
    )
    .unwrap();
    let x = DVector::from_element(1, 1.2);
    let sol = solve_full(&setup.problem, &x, &cfg()).unwrap();
    let z = -1.2 / 6.0;
    let expected = 1.44 + (z - 0.6f64).powi(2) + 2.0 * (0.6 + z).powi(2);
    assert!((sol.z[0] - z).abs() < 1e-10);
    assert!((sol.value - expected).abs() < 1e-10);
    // Large state: u = -0.5x + z is clipped at -1, so z = 0.5x - 1.
    let x = DVector::from_element(1, 6.0);
    let sol = solve_full(&setup.problem, &x, &cfg()).unwrap();
    assert!((sol.z[0] - 2.0).abs() < 1e-10);
}

#[test]
fn terminal_region_value_is_bounded_by_terminal_cost() {
    let setup = pendulum_setup(10);
    let (lo, hi) = setup.term.xf.bounding_box(&cfg()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 30 {
        let x = DVector::from_fn(2, |i, _| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>());
        if !setup.term.xf.contains(&x, 0.0).unwrap() {
            continue;
        }
        checked += 1;
        let sol = solve_full(&setup.problem, &x, &cfg()).unwrap();
        assert!(sol.value <= setup.term.terminal_cost(&x) + 1e-9);
    }
}

#[test]
fn far_state_is_infeasible() {
    let setup = pendulum_setup(10);
    let err = solve_full(&setup.problem, &DVector::from_vec(vec![5.0, 3.0]), &cfg()).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)));
}

#[test]
fn full_solution_is_locally_optimal_and_bounded_below() {
    let setup = pendulum_setup(10);
    let adm = &setup.problem.admissible;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for x in feasible_states(&setup, 10, 13) {
        let sol = solve_full(&setup.problem, &x, &cfg()).unwrap();
        assert!(adm.contains(&x, &sol.z, 1e-8).unwrap());
        let u0 = &setup.gain.k * &x + sol.z.rows(0, 1);
        let first = setup.sys.stage_cost(&x, &u0);
        assert!(sol.value >= first - 1e-12);
        assert!(first >= min_sym_eigenvalue(&setup.sys.q) * x.norm_squared() - 1e-12);
        let mut tried = 0;
        while tried < 50 {
            let dir = DVector::from_fn(10, |_, _| standard_normal(&mut rng));
            let cand = &sol.z + dir * (1e-3 * rng.random::<f64>());
            if !adm.contains(&x, &cand, 0.0).unwrap() {
                tried += 1;
                continue;
            }
            tried += 1;
            assert!(setup.problem.cost(&x, &cand).unwrap() >= sol.value - 1e-8);
        }
    }
}

#[test]
fn reduced_value_never_exceeds_guess() {
    let setup = pendulum_setup(10);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for x in feasible_states(&setup, 20, 15) {
        let ztilde = perturbed_guess(&setup, &x, &mut rng);
        let pair = SubspacePair::new(
            random_stiefel(10, 1, &mut rng),
            DMatrix::zeros(10, 2),
            DVector::zeros(10),
        )
        .unwrap();
        let sol = solve_reduced(&setup.problem, &pair, &x, &ztilde, &cfg()).unwrap();
        assert!(sol.value <= setup.problem.cost(&x, &ztilde).unwrap() + 1e-10);
        assert!(setup.problem.admissible.contains(&x, &sol.z, 1e-8).unwrap());
        let rebuilt = &pair.u * &sol.alpha + pair.offset(&x) * sol.tau + &ztilde * (1.0 - sol.tau);
        assert!((rebuilt - &sol.z).amax() < 1e-9);
    }
}

#[test]
fn reduced_origin_is_exactly_zero() {
    let setup = pendulum_setup(6);
    let pair = identity_pair(6);
    let sol = solve_reduced(
        &setup.problem,
        &pair,
        &DVector::zeros(2),
        &DVector::zeros(6),
        &cfg(),
    )
    .unwrap();
    assert_eq!(sol.z, DVector::zeros(6));
    assert_eq!(sol.value, 0.0);
}

#[test]
fn full_span_recovers_full_optimum() {
    let setup = pendulum_setup(10);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let q = random_orthogonal(10, &mut rng);
    let pair = SubspacePair::new(q, DMatrix::zeros(10, 2), DVector::zeros(10)).unwrap();
    for x in feasible_states(&setup, 20, 17) {
        let full = solve_full(&setup.problem, &x, &cfg()).unwrap();
        let red = solve_reduced(&setup.problem, &pair, &x, &DVector::zeros(10), &cfg()).unwrap();
        assert!((red.value - full.value).abs() <= 1e-7 * (1.0 + full.value));
    }
}

#[test]
fn basis_rotation_leaves_value_unchanged() {
    let setup = pendulum_setup(10);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for x in feasible_states(&setup, 10, 19) {
        let ztilde = perturbed_guess(&setup, &x, &mut rng);
        let u = random_stiefel(10, 2, &mut rng);
        let gamma = DMatrix::from_fn(10, 2, |_, _| 0.1 * standard_normal(&mut rng));
        let xi = DVector::from_fn(10, |_, _| 0.01 * standard_normal(&mut rng));
        let base = SubspacePair::new(u.clone(), gamma.clone(), xi.clone()).unwrap();
        let v0 = solve_reduced(&setup.problem, &base, &x, &ztilde, &cfg())
            .unwrap()
            .value;
        let rot = random_orthogonal(2, &mut rng);
        let turned = SubspacePair::new(u * rot, gamma, xi).unwrap();
        let v1 = solve_reduced(&setup.problem, &turned, &x, &ztilde, &cfg())
            .unwrap()
            .value;
        assert!((v0 - v1).abs() <= 1e-7 * (1.0 + v0.abs()));
    }
}

#[test]
fn shift_of_sequence_hitting_origin_is_zero() {
    let setup = pendulum_setup(5);
    // Choose z_0 so that x_z(1) = 0: (A + BK) x + B z_0 = 0.
    let x = DVector::from_vec(vec![0.01, 0.0]);
    let acl_x = setup.gain.closed_loop(&setup.sys) * &x;
    let b = setup.sys.b.column(0);
    let z0 = -b.dot(&acl_x) / b.norm_squared();
    let residual = &acl_x + b * z0;
    if residual.amax() == 0.0 {
        let mut z = DVector::zeros(5);
        z[0] = z0;
        assert_eq!(
            admissible_shift(&setup, &x, &z, 1e-8).unwrap(),
            DVector::zeros(5)
        );
    }
    // The exact case at the origin.
    assert_eq!(
        admissible_shift(&setup, &DVector::zeros(2), &DVector::zeros(5), 1e-8).unwrap(),
        DVector::zeros(5)
    );
}

#[test]
fn shift_with_matching_gains_appends_zero() {
    let setup = pendulum_setup(5);
    let x = DVector::from_vec(vec![0.05, -0.02]);
    assert!(setup.term.xf.contains(&x, 0.0).unwrap());
    let shifted = admissible_shift(&setup, &x, &DVector::zeros(5), 1e-8).unwrap();
    assert!(shifted.amax() < 1e-15);
}

#[test]
fn shift_stays_admissible() {
    let setup = pendulum_setup(12);
    for x in feasible_states(&setup, 30, 20) {
        let z = solve_full(&setup.problem, &x, &cfg()).unwrap().z;
        let shifted = admissible_shift(&setup, &x, &z, 1e-8).unwrap();
        let next = setup.sys.step(&x, &(&setup.gain.k * &x + z.rows(0, 1)));
        assert!(setup
            .problem
            .admissible
            .contains(&next, &shifted, 1e-8)
            .unwrap());
    }
}

#[test]
fn shift_rejects_inadmissible_input() {
    let setup = pendulum_setup(5);
    let err = admissible_shift(
        &setup,
        &DVector::zeros(2),
        &DVector::from_element(5, 3.0),
        1e-8,
    )
    .unwrap_err();
    assert!(matches!(err, Error::PreconditionViolated(_)));
}

#[test]
fn closed_loop_from_origin_is_trivial() {
    let setup = pendulum_setup(6);
    let trace = run_closed_loop(
        &setup,
        &identity_pair(6),
        &DVector::zeros(2),
        &ClosedLoopConfig::default(),
        &cfg(),
    )
    .unwrap();
    assert_eq!(trace.states.len(), 1);
    assert!(trace.steps.is_empty());
    assert_eq!(closed_loop_cost(&setup, &trace).unwrap().cost, 0.0);
}

#[test]
fn origin_is_absorbing() {
    let setup = pendulum_setup(6);
    let pair = SubspacePair::new(
        random_stiefel(6, 2, &mut ChaCha8Rng::seed_from_u64(21)),
        DMatrix::zeros(6, 2),
        DVector::from_element(6, 0.01),
    )
    .unwrap();
    let (mut x, mut ztilde) = (DVector::zeros(2), DVector::zeros(6));
    for _ in 0..5 {
        let sol = solve_reduced(&setup.problem, &pair, &x, &ztilde, &cfg()).unwrap();
        ztilde = admissible_shift(&setup, &x, &sol.z, 1e-8).unwrap();
        x = setup.sys.step(&x, &(&setup.gain.k * &x + sol.z.rows(0, 1)));
        assert!(x.iter().chain(ztilde.iter()).all(|&v| v == 0.0));
    }
}

#[test]
fn full_span_closed_loop_certificates() {
    let setup = pendulum_setup(10);
    let pair = identity_pair(10);
    let cl = ClosedLoopConfig::default();
    for x_s in feasible_states(&setup, 8, 22) {
        let trace = run_closed_loop(&setup, &pair, &x_s, &cl, &cfg()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.guess_violations(), 0);
        assert!(trace.lyapunov_violations(1e-6).is_empty());
        assert!(trace.dynamics_residual(&setup) <= 1e-10);
        let v0 = trace.steps[0].value;
        let cost = closed_loop_cost(&setup, &trace).unwrap();
        assert!(cost.cost <= v0 + 1e-6 * (1.0 + v0));
        let lower: f64 = trace.states.iter().map(|x| x.norm_squared()).sum();
        assert!(cost.cost >= lower - trace.final_state().norm_squared() - 1e-12);
        let full = run_full_closed_loop(&setup, &x_s, &cl, &cfg()).unwrap();
        let full_cost = closed_loop_cost(&setup, &full).unwrap().cost;
        assert!((full_cost - cost.cost).abs() <= 1e-6 * (1.0 + full_cost));
    }
}

#[test]
fn unconverged_trace_has_no_cost() {
    let setup = pendulum_setup(10);
    let cl = ClosedLoopConfig {
        max_steps: 2,
        ..Default::default()
    };
    let trace =
        run_full_closed_loop(&setup, &DVector::from_vec(vec![0.3, 0.0]), &cl, &cfg()).unwrap();
    assert!(!trace.converged);
    assert!(matches!(
        closed_loop_cost(&setup, &trace),
        Err(Error::NotConverged { .. })
    ));
}

#[test]
fn trace_csv_layout() {
    let setup = pendulum_setup(10);
    let trace = run_full_closed_loop(
        &setup,
        &DVector::from_vec(vec![0.2, 0.0]),
        &ClosedLoopConfig::default(),
        &cfg(),
    )
    .unwrap();
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x0,x1,u0,stage_cost,value");
    assert_eq!(lines.len(), trace.states.len() + 1);
    assert!(lines.last().unwrap().ends_with(",,,"));
}

#[test]
fn terminal_switch_hands_over_inside_terminal_set() {
    let setup = pendulum_setup(10);
    let cl = ClosedLoopConfig {
        terminal_switch: true,
        ..Default::default()
    };
    let x_s = DVector::from_vec(vec![0.5, 0.0]);
    let trace = run_closed_loop(&setup, &identity_pair(10), &x_s, &cl, &cfg()).unwrap();
    assert!(trace.converged);
    let first = trace.steps.iter().position(|s| s.terminal_mode).unwrap();
    assert!(trace.steps[first..].iter().all(|s| s.terminal_mode));
    assert!(setup.term.xf.contains(&trace.steps[first].x, 0.0).unwrap());
}
