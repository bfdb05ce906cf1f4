//! Closed-loop comparison of the reduced controller against a full-order reference.

use std::path::Path;

use grassmpc::mpc::{
    closed_loop_cost, run_closed_loop, run_full_closed_loop, ClosedLoopTrace, SubspacePair,
};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::io::{fmt, vec_of, write_table};
use crate::pipeline::Study;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub x: Vec<f64>,
    /// `Vtilde_N(x_s, 0)`: value of the first reduced problem.
    pub initial_value: f64,
    pub reduced_cost: f64,
    /// `None` when the reference problem is infeasible at `x_s`.
    pub full_cost: Option<f64>,
    /// Relative cost increase; zero at the origin.
    pub epsilon: Option<f64>,
    pub reduced_steps: usize,
    pub full_steps: Option<usize>,
    pub lyapunov_violations: usize,
    pub guess_violations: usize,
    pub cost_bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub name: String,
    pub reference_horizon: usize,
    pub points: Vec<GridPoint>,
    pub evaluated: usize,
    /// Grid points where the reference problem was infeasible.
    pub skipped: usize,
    pub mean_epsilon: f64,
    pub std_epsilon: f64,
    pub max_epsilon: f64,
    pub total_steps: usize,
    pub lyapunov_violations: usize,
    pub guess_violations: usize,
    pub cost_bound_violations: usize,
}

impl BenchmarkReport {
    pub fn invariant_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lyapunov_violations > 0 {
            out.push(format!(
                "{} value decrease violations",
                self.lyapunov_violations
            ));
        }
        if self.guess_violations > 0 {
            out.push(format!(
                "{} inadmissible shifted guesses",
                self.guess_violations
            ));
        }
        if self.cost_bound_violations > 0 {
            out.push(format!(
                "{} closed-loop cost bound violations",
                self.cost_bound_violations
            ));
        }
        out
    }
}

/// Per-step value decrease checks of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseRow {
    pub index: usize,
    pub t: usize,
    pub value: f64,
    pub next_value: f64,
    pub stage_cost: f64,
    pub ok: bool,
}

struct PointRun {
    point: GridPoint,
    decrease: Vec<DecreaseRow>,
}

/// Grid over the bounding box of the initial set, restricted to the set.
pub fn grid(study: &Study, per_axis: usize, cfg: &ExperimentConfig) -> Result<Vec<DVector<f64>>> {
    let (lo, hi) = study.initial.bounding_box();
    if lo.len() != 2 {
        return Err(HarnessError::Config(
            "the benchmark grid needs a planar state space".into(),
        ));
    }
    let solver = cfg.tolerances.solver();
    let mut out = Vec::new();
    for i in 0..per_axis {
        for j in 0..per_axis {
            let s = |k: usize, a: usize| lo[a] + (hi[a] - lo[a]) * k as f64 / (per_axis - 1) as f64;
            let x = DVector::from_vec(vec![s(i, 0), s(j, 1)]);
            if study.initial.contains(&x, 0.0, &solver)? {
                out.push(x);
            }
        }
    }
    Ok(out)
}

fn decrease_rows(index: usize, trace: &ClosedLoopTrace, tol: f64) -> Vec<DecreaseRow> {
    trace
        .steps
        .windows(2)
        .filter(|w| !w[0].terminal_mode && !w[1].terminal_mode)
        .map(|w| DecreaseRow {
            index,
            t: w[0].t,
            value: w[0].value,
            next_value: w[1].value,
            stage_cost: w[0].stage_cost,
            ok: w[1].value <= w[0].value - w[0].stage_cost + tol * (1.0 + w[0].value),
        })
        .collect()
}

fn run_point(
    cfg: &ExperimentConfig,
    study: &Study,
    reference: &grassmpc::mpc::MpcSetup,
    pair: &SubspacePair,
    index: usize,
    x: &DVector<f64>,
) -> Result<PointRun> {
    let solver = cfg.tolerances.solver();
    let cl = &cfg.benchmark.closed_loop;
    let tol = cfg.tolerances.lyapunov_tol;
    let trace = run_closed_loop(&study.setup, pair, x, cl, &solver)?;
    let reduced = closed_loop_cost(&study.setup, &trace)?;
    let initial_value = trace.steps.first().map_or(0.0, |s| s.value);
    let decrease = decrease_rows(index, &trace, tol);
    let full = match run_full_closed_loop(reference, x, cl, &solver) {
        Ok(t) => Some((closed_loop_cost(reference, &t)?.cost, t.steps.len())),
        Err(grassmpc::Error::Infeasible(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let epsilon = full.map(|(jf, _)| {
        if jf == 0.0 && reduced.cost == 0.0 {
            0.0
        } else {
            (reduced.cost - jf) / jf
        }
    });
    Ok(PointRun {
        point: GridPoint {
            index,
            x: vec_of(x),
            initial_value,
            reduced_cost: reduced.cost,
            full_cost: full.map(|f| f.0),
            epsilon,
            reduced_steps: trace.steps.len(),
            full_steps: full.map(|f| f.1),
            lyapunov_violations: decrease.iter().filter(|r| !r.ok).count(),
            guess_violations: trace.guess_violations(),
            cost_bound_ok: reduced.cost <= initial_value + tol * (1.0 + initial_value),
        },
        decrease,
    })
}

/// Runs both controllers from every grid point in parallel; results are kept in grid order.
pub fn benchmark(
    cfg: &ExperimentConfig,
    study: &Study,
    pair: &SubspacePair,
) -> Result<(BenchmarkReport, Vec<DecreaseRow>)> {
    let model = cfg.model()?;
    let horizon = cfg
        .benchmark
        .reference_horizon
        .unwrap_or(model.desired_horizon);
    let reference = study.setup.with_horizon(horizon)?;
    let points = grid(study, cfg.benchmark.grid, cfg)?;
    let runs: Vec<PointRun> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| run_point(cfg, study, &reference, pair, i, x))
        .collect::<Result<_>>()?;
    let eps: Vec<f64> = runs.iter().filter_map(|r| r.point.epsilon).collect();
    let mean = if eps.is_empty() {
        0.0
    } else {
        eps.iter().sum::<f64>() / eps.len() as f64
    };
    let var = if eps.is_empty() {
        0.0
    } else {
        eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / eps.len() as f64
    };
    let report = BenchmarkReport {
        name: cfg.name.clone(),
        reference_horizon: horizon,
        evaluated: eps.len(),
        skipped: runs.len() - eps.len(),
        mean_epsilon: mean,
        std_epsilon: var.sqrt(),
        max_epsilon: eps.iter().copied().fold(0.0, f64::max),
        total_steps: runs.iter().map(|r| r.point.reduced_steps).sum(),
        lyapunov_violations: runs.iter().map(|r| r.point.lyapunov_violations).sum(),
        guess_violations: runs.iter().map(|r| r.point.guess_violations).sum(),
        cost_bound_violations: runs.iter().filter(|r| !r.point.cost_bound_ok).count(),
        points: runs.iter().map(|r| r.point.clone()).collect(),
    };
    let decrease = runs.into_iter().flat_map(|r| r.decrease).collect();
    Ok((report, decrease))
}

pub fn write_benchmark(
    dir: &Path,
    report: &BenchmarkReport,
    decrease: &[DecreaseRow],
) -> Result<()> {
    let header: Vec<String> = [
        "index",
        "x0",
        "x1",
        "initial_value",
        "reduced_cost",
        "full_cost",
        "epsilon",
        "reduced_steps",
        "full_steps",
        "lyapunov_violations",
        "guess_violations",
        "cost_bound_ok",
    ]
    .map(String::from)
    .to_vec();
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    let table: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| {
            vec![
                p.index.to_string(),
                fmt(p.x[0]),
                fmt(p.x[1]),
                fmt(p.initial_value),
                fmt(p.reduced_cost),
                opt(p.full_cost),
                opt(p.epsilon),
                p.reduced_steps.to_string(),
                p.full_steps.map(|s| s.to_string()).unwrap_or_default(),
                p.lyapunov_violations.to_string(),
                p.guess_violations.to_string(),
                (p.cost_bound_ok as u8).to_string(),
            ]
        })
        .collect();
    write_table(&dir.join("benchmark.csv"), &header, &table)?;
    let header: Vec<String> = ["index", "t", "value", "next_value", "stage_cost", "ok"]
        .map(String::from)
        .to_vec();
    let table: Vec<Vec<String>> = decrease
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                r.t.to_string(),
                fmt(r.value),
                fmt(r.next_value),
                fmt(r.stage_cost),
                (r.ok as u8).to_string(),
            ]
        })
        .collect();
    write_table(&dir.join("decrease.csv"), &header, &table)?;
    crate::io::write_json(&dir.join("benchmark.json"), report)
}
