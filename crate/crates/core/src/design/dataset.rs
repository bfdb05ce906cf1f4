use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::InitialSet;
use crate::mpc::{solve_full, MpcSetup};
use crate::solvers::SolverConfig;

/// Draw budget after which a low acceptance rate aborts sampling.
pub const REJECTION_DRAWS: usize = 1_000_000;
/// Smallest tolerated acceptance rate.
pub const REJECTION_MIN_RATE: f64 = 1e-3;

/// Sampled states and their optimal input sequences `z_i = mu_N(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub seed: u64,
    pub horizon: usize,
}

impl DataSet {
    pub fn new(
        states: Vec<DVector<f64>>,
        inputs: Vec<DVector<f64>>,
        seed: u64,
        horizon: usize,
    ) -> Result<Self> {
        if states.len() != inputs.len() || states.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} states but {} input sequences",
                states.len(),
                inputs.len()
            )));
        }
        let (n, d) = (states[0].len(), inputs[0].len());
        if states.iter().any(|x| x.len() != n) || inputs.iter().any(|z| z.len() != d) {
            return Err(Error::DimensionMismatch("ragged data set".into()));
        }
        Ok(Self {
            states,
            inputs,
            seed,
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    pub fn d(&self) -> usize {
        self.inputs[0].len()
    }

    /// `[x_1, ..., x_L]`.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.states)
    }

    /// `[z_1, ..., z_L]`.
    pub fn input_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.inputs)
    }

    /// `delta_i = z_i - (Gamma x_i + xi)`.
    pub fn shifted(&self, gamma: &DMatrix<f64>, xi: &DVector<f64>) -> Vec<DVector<f64>> {
        self.states
            .iter()
            .zip(&self.inputs)
            .map(|(x, z)| z - gamma * x - xi)
            .collect()
    }

    /// Index and violation of the worst pair that fails the admissibility check.
    pub fn verify(&self, setup: &MpcSetup, tol: f64) -> Result<Option<(usize, f64)>> {
        let mut worst: Option<(usize, f64)> = None;
        for (i, (x, z)) in self.states.iter().zip(&self.inputs).enumerate() {
            let v = setup.problem.admissible.max_violation(x, z)?;
            if v > tol && worst.is_none_or(|(_, w)| v > w) {
                worst = Some((i, v));
            }
        }
        Ok(worst)
    }
}

/// Samples `count` states uniformly from the initial set minus the terminal
/// set by rejection from the bounding box and solves the full problem at each.
///
/// Sampling is sequential and seeded, so the states are reproducible; the QPs
/// run in parallel.
pub fn generate_dataset(
    setup: &MpcSetup,
    initial: &InitialSet,
    count: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<DataSet> {
    if count == 0 {
        return Err(Error::InvalidModel("data set size must be positive".into()));
    }
    if initial.dim() != setup.sys.n() {
        return Err(Error::DimensionMismatch(
            "initial set does not match the state dimension".into(),
        ));
    }
    let (lo, hi) = initial.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(count);
    let mut draws = 0usize;
    while states.len() < count {
        let x = DVector::from_fn(lo.len(), |i, _| {
            lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()
        });
        draws += 1;
        if initial.contains(&x, 0.0, cfg)? && !setup.term.xf.contains(&x, 0.0)? {
            states.push(x);
        }
        if draws >= REJECTION_DRAWS && (states.len() as f64) < REJECTION_MIN_RATE * draws as f64 {
            return Err(Error::RejectionStall {
                accepted: states.len(),
                draws,
            });
        }
    }
    let inputs = states
        .par_iter()
        .map(|x| solve_full(&setup.problem, x, cfg).map(|s| s.z))
        .collect::<Result<Vec<_>>>()?;
    DataSet::new(states, inputs, seed, setup.horizon())
}
