//! Quick invariant suite run by `grassmpc selftest`.

use grassmpc::control::riccati_residual;
use grassmpc::design::{
    design_subspace_euclidean, design_subspace_riemannian, objective_f, AlmConfig,
    AlternationConfig, DesignProblem, GrassmannPoint, Scatter,
};
use grassmpc::geometry::Polytope;
use grassmpc::linalg::{random_orthogonal, random_stiefel, spectral_radius, standard_normal};
use grassmpc::mpc::{solve_full, solve_reduced, SubspacePair};
use grassmpc::solvers::{solve_qp, QuadraticProgram, SolveStatus, SolverConfig};
use grassmpc::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::pipeline::Study;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, outcome: Result<(bool, String)>) -> CheckResult {
    match outcome {
        Ok((passed, detail)) => CheckResult {
            name: name.into(),
            passed,
            detail,
        },
        Err(e) => CheckResult {
            name: name.into(),
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Runs the model-free checks and, when the config has a model, the checks on its setup.
pub fn selftest(cfg: &ExperimentConfig) -> Vec<CheckResult> {
    let solver = cfg.tolerances.solver();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = vec![
        check("qp_kkt", qp_kkt(&mut rng, &solver)),
        check("gradient", gradient(&mut rng)),
        check("projector", projector(&mut rng)),
        check("two_boxes", two_boxes(&solver)),
    ];
    if cfg.model.is_some() {
        match Study::build(cfg) {
            Ok(study) => {
                out.push(check("riccati", riccati(&study)));
                out.push(check(
                    "terminal",
                    study
                        .setup
                        .verify_terminal(&solver)
                        .map(|_| (true, "ok".into()))
                        .map_err(Into::into),
                ));
                out.push(check("full_span", full_span(&study, &mut rng, &solver)));
                out.push(check("rotation", rotation(&study, &mut rng, &solver)));
            }
            Err(e) => out.push(CheckResult {
                name: "setup".into(),
                passed: false,
                detail: e.to_string(),
            }),
        }
    }
    out
}

fn qp_kkt(rng: &mut ChaCha8Rng, solver: &SolverConfig) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let q = rng.random_range(1..=6);
        let l = DMatrix::from_fn(n, n, |_, _| standard_normal(rng));
        let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
        let f = DVector::from_fn(n, |_, _| standard_normal(rng));
        let g_mat = DMatrix::from_fn(q, n, |_, _| standard_normal(rng));
        let g = DVector::from_fn(q, |_, _| rng.random::<f64>());
        let res = solve_qp(&QuadraticProgram::new(h, f, g_mat, g)?, None, solver)?;
        if res.status != SolveStatus::Optimal {
            return Ok((
                false,
                format!("status {:?} on a feasible strictly convex QP", res.status),
            ));
        }
        worst = worst.max(res.kkt_residual);
    }
    Ok((
        worst <= solver.kkt_tol,
        format!("worst KKT residual {worst:.3e}"),
    ))
}

fn gradient(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let deltas: Vec<DVector<f64>> = (0..40)
        .map(|_| DVector::from_fn(7, |_, _| standard_normal(rng)))
        .collect();
    let scatter = Scatter::new(&deltas, 7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = GrassmannPoint::new(random_stiefel(7, 2, rng))?;
        let xi = p.horizontal(&DMatrix::from_fn(7, 2, |_, _| standard_normal(rng)));
        let xi = &xi / xi.norm();
        let h = 1e-5;
        let fd = (objective_f(&p.retract(&(&xi * h)), &deltas)
            - objective_f(&p.retract(&(&xi * -h)), &deltas))
            / (2.0 * h);
        let exact = scatter.riemannian_gradient(&p).dot(&xi);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    Ok((worst <= 1e-5, format!("worst relative error {worst:.3e}")))
}

fn projector(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let u = random_stiefel(9, 3, rng);
    let a = GrassmannPoint::new(u.clone())?;
    let b = GrassmannPoint::new(&u * random_orthogonal(3, rng))?;
    let dist = a.distance(&b);
    Ok((dist <= 1e-12, format!("distance under rotation {dist:.3e}")))
}

fn two_boxes(solver: &SolverConfig) -> Result<(bool, String)> {
    let deltas: Vec<_> = (-5..=5)
        .map(|i| DVector::from_vec(vec![i as f64, 0.0]))
        .collect();
    let sets = vec![
        Polytope::from_box(&[2.0, 0.0], &[4.0, 2.0])?,
        Polytope::from_box(&[2.0, 4.0], &[4.0, 6.0])?,
    ];
    let targets = vec![
        DVector::from_vec(vec![3.0, 1.0]),
        DVector::from_vec(vec![3.0, 5.0]),
    ];
    let prob = DesignProblem::new(&deltas, targets, sets, 1, 0.0)?;
    let axis = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let euclid =
        design_subspace_euclidean(&prob, &AlternationConfig::default(), Some(&axis), solver);
    let riem = design_subspace_riemannian(&prob, &AlmConfig::default(), None)?;
    let ok = matches!(euclid, Err(Error::InfeasibleAtIteration(0))) && riem.max_violation <= 1e-6;
    Ok((
        ok,
        format!(
            "Euclidean: {:?}; Riemannian violation {:.3e}",
            euclid.err(),
            riem.max_violation
        ),
    ))
}

fn riccati(study: &Study) -> Result<(bool, String)> {
    let setup = &study.setup;
    let res = riccati_residual(&setup.sys, &setup.term.pf);
    let rho = spectral_radius(&setup.gain.closed_loop(&setup.sys));
    Ok((
        res <= 1e-9 && rho < 1.0,
        format!("residual {res:.3e}, closed-loop spectral radius {rho:.4}"),
    ))
}

fn sample_initial(study: &Study, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v = study.initial.vertices();
    let w: Vec<f64> = (0..v.len()).map(|_| -rng.random::<f64>().ln()).collect();
    let total: f64 = w.iter().sum();
    v.iter()
        .zip(&w)
        .fold(DVector::zeros(v[0].len()), |acc, (x, wi)| {
            acc + x * (wi / total)
        })
}

fn full_span(study: &Study, rng: &mut ChaCha8Rng, solver: &SolverConfig) -> Result<(bool, String)> {
    let cp = &study.setup.problem;
    let (n, d) = (cp.n(), cp.d());
    let pair = SubspacePair::new(
        DMatrix::identity(d, d),
        DMatrix::zeros(d, n),
        DVector::zeros(d),
    )?;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = sample_initial(study, rng);
        let full = solve_full(cp, &x, solver)?;
        let red = solve_reduced(cp, &pair, &x, &DVector::zeros(d), solver)?;
        worst = worst.max((red.value - full.value).abs() / (1.0 + full.value));
    }
    Ok((worst <= 1e-7, format!("worst relative gap {worst:.3e}")))
}

fn rotation(study: &Study, rng: &mut ChaCha8Rng, solver: &SolverConfig) -> Result<(bool, String)> {
    let cp = &study.setup.problem;
    let (n, d) = (cp.n(), cp.d());
    let u = random_stiefel(d, 2, rng);
    let x = sample_initial(study, rng);
    let guess = solve_full(cp, &x, solver)?.z;
    let offset = DMatrix::zeros(d, n);
    let base = solve_reduced(
        cp,
        &SubspacePair::new(u.clone(), offset.clone(), DVector::zeros(d))?,
        &x,
        &guess,
        solver,
    )?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let rotated = SubspacePair::new(
            &u * random_orthogonal(2, rng),
            offset.clone(),
            DVector::zeros(d),
        )?;
        let v = solve_reduced(cp, &rotated, &x, &guess, solver)?.value;
        worst = worst.max((v - base.value).abs() / (1.0 + base.value.abs()));
    }
    Ok((worst <= 1e-7, format!("worst relative change {worst:.3e}")))
}
