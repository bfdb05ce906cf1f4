use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{admissible_shift, solve_full, solve_reduced, MpcSetup, SubspacePair};
use crate::error::{Error, Result};
use crate::solvers::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClosedLoopConfig {
    pub max_steps: usize,
    /// The run stops once `|x| <= convergence_eps`.
    pub convergence_eps: f64,
    /// Hand over to the terminal controller once the state enters `Xf`.
    pub terminal_switch: bool,
    /// Tolerance of the admissibility checks on guesses and shifts.
    pub admissibility_tol: f64,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            max_steps: 400,
            convergence_eps: 1e-6,
            terminal_switch: false,
            admissibility_tol: 1e-8,
        }
    }
}

/// One closed-loop step at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x: DVector<f64>,
    /// Guess carried into the step (zero in the initial mode).
    pub ztilde: DVector<f64>,
    /// Optimizer of the problem solved at this step.
    pub z: DVector<f64>,
    pub u: DVector<f64>,
    pub stage_cost: f64,
    /// Optimal value of the problem solved at this step.
    pub value: f64,
    /// Whether the carried guess passed the admissibility check (always true at `t = 0`).
    pub guess_admissible: bool,
    /// Whether the terminal controller produced the input.
    pub terminal_mode: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopTrace {
    /// States `x(0), ..., x(T)`.
    pub states: Vec<DVector<f64>>,
    /// Steps `0, ..., T-1`.
    pub steps: Vec<StepRecord>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopCost {
    /// Accumulated stage cost over the trace.
    pub cost: f64,
    /// `V_f(x(T))`, an estimate of the truncated tail.
    pub remainder: f64,
}

impl ClosedLoopTrace {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states
            .last()
            .expect("trace always holds the initial state")
    }

    /// Number of steps whose guess failed the admissibility check.
    pub fn guess_violations(&self) -> usize {
        self.steps.iter().filter(|s| !s.guess_admissible).count()
    }

    /// Steps `t` where `value(t+1) > value(t) - stage_cost(t) + tol * (1 + value(t))`.
    /// Only pairs of steps solved by the reduced controller are compared.
    pub fn lyapunov_violations(&self, tol: f64) -> Vec<usize> {
        self.steps
            .windows(2)
            .filter(|w| !w[0].terminal_mode && !w[1].terminal_mode)
            .filter(|w| w[1].value > w[0].value - w[0].stage_cost + tol * (1.0 + w[0].value))
            .map(|w| w[0].t)
            .collect()
    }

    /// Largest dynamics residual `|x(t+1) - A x(t) - B u(t)|` in max norm.
    pub fn dynamics_residual(&self, setup: &MpcSetup) -> f64 {
        self.steps
            .iter()
            .map(|s| (&self.states[s.t + 1] - setup.sys.step(&s.x, &s.u)).amax())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t, x0.., u0.., stage_cost, value`; the final state has
    /// empty input and cost fields.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.states[0].len();
        let m = self.steps.first().map_or(0, |s| s.u.len());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..m).map(|i| format!("u{i}")));
        header.extend(["stage_cost".to_string(), "value".to_string()]);
        let io = |e: csv::Error| Error::SolverFailure(format!("writing trace: {e}"));
        w.write_record(&header).map_err(io)?;
        for (t, x) in self.states.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            match self.steps.get(t) {
                Some(s) => {
                    row.extend(s.u.iter().map(|v| v.to_string()));
                    row.push(s.stage_cost.to_string());
                    row.push(s.value.to_string());
                }
                None => row.extend(std::iter::repeat_n(String::new(), m + 2)),
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::SolverFailure(format!("writing trace: {e}")))?;
        Ok(())
    }
}

/// Receding-horizon loop shared by the reduced and the full-order controller.
/// `solve` returns the optimizer and value at `(t, x, ztilde)`.
fn simulate<F>(
    setup: &MpcSetup,
    x_s: &DVector<f64>,
    cl: &ClosedLoopConfig,
    mut solve: F,
) -> Result<ClosedLoopTrace>
where
    F: FnMut(usize, &DVector<f64>, &DVector<f64>) -> Result<(DVector<f64>, f64)>,
{
    let (n, m, d) = (setup.sys.n(), setup.sys.m(), setup.problem.d());
    if x_s.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state must lie in R^{n}"
        )));
    }
    let tol = cl.admissibility_tol;
    let mut x = x_s.clone();
    let mut ztilde = DVector::zeros(d);
    let mut states = vec![x.clone()];
    let mut steps = Vec::new();
    let mut terminal_mode = false;
    let mut t = 0;
    loop {
        if x.norm() <= cl.convergence_eps {
            return Ok(ClosedLoopTrace {
                states,
                steps,
                converged: true,
            });
        }
        if t == cl.max_steps {
            return Ok(ClosedLoopTrace {
                states,
                steps,
                converged: false,
            });
        }
        if !setup.state_set.contains(&x, tol)? {
            return Err(Error::DivergenceDetected { step: t });
        }
        terminal_mode = terminal_mode || (cl.terminal_switch && setup.term.xf.contains(&x, 0.0)?);
        let record = if terminal_mode {
            let u = setup.term.control(&x);
            StepRecord {
                t,
                stage_cost: setup.sys.stage_cost(&x, &u),
                value: setup.term.terminal_cost(&x),
                x: x.clone(),
                ztilde: ztilde.clone(),
                z: DVector::zeros(d),
                u,
                guess_admissible: true,
                terminal_mode,
            }
        } else {
            let guess_admissible = t == 0 || setup.problem.admissible.contains(&x, &ztilde, tol)?;
            let (z, value) = solve(t, &x, &ztilde)?;
            let u = setup.gain.apply(&x) + z.rows(0, m);
            let next_guess = admissible_shift(setup, &x, &z, tol)?;
            StepRecord {
                t,
                stage_cost: setup.sys.stage_cost(&x, &u),
                value,
                x: x.clone(),
                ztilde: std::mem::replace(&mut ztilde, next_guess),
                z,
                u,
                guess_admissible,
                terminal_mode,
            }
        };
        x = setup.sys.step(&x, &record.u);
        states.push(x.clone());
        steps.push(record);
        t += 1;
    }
}

/// Closed loop of the reduced-order scheme started in the initial mode `(x_s, 0)`.
pub fn run_closed_loop(
    setup: &MpcSetup,
    pair: &SubspacePair,
    x_s: &DVector<f64>,
    cl: &ClosedLoopConfig,
    cfg: &SolverConfig,
) -> Result<ClosedLoopTrace> {
    simulate(setup, x_s, cl, |_, x, ztilde| {
        let sol = solve_reduced(&setup.problem, pair, x, ztilde, cfg)?;
        Ok((sol.z, sol.value))
    })
}

/// Closed loop of the full-order controller; the guess column records the shifted optimizer.
pub fn run_full_closed_loop(
    setup: &MpcSetup,
    x_s: &DVector<f64>,
    cl: &ClosedLoopConfig,
    cfg: &SolverConfig,
) -> Result<ClosedLoopTrace> {
    simulate(setup, x_s, cl, |_, x, _| {
        let sol = solve_full(&setup.problem, x, cfg)?;
        Ok((sol.z, sol.value))
    })
}

/// Accumulated stage cost of a converged trace plus the terminal-cost remainder.
pub fn closed_loop_cost(setup: &MpcSetup, trace: &ClosedLoopTrace) -> Result<ClosedLoopCost> {
    if !trace.converged {
        return Err(Error::NotConverged {
            final_norm: trace.final_state().norm(),
        });
    }
    Ok(ClosedLoopCost {
        cost: trace.steps.iter().map(|s| s.stage_cost).sum(),
        remainder: setup.term.terminal_cost(trace.final_state()),
    })
}
