//! Experiment configuration, read from TOML or JSON.

use std::path::Path;

use grassmpc::control::{discretize_zoh, LinearSystem};
use grassmpc::design::{AlmConfig, AlternationConfig, CenterMethod};
use grassmpc::geometry::Polytope;
use grassmpc::mpc::{ClosedLoopConfig, MpcSetup};
use grassmpc::solvers::SolverConfig;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Deltas, target sets and target points.
pub type GeometrySets = (Vec<DVector<f64>>, Vec<Polytope>, Vec<DVector<f64>>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Plant and MPC problem; required by `generate` and `benchmark`.
    pub model: Option<ModelConfig>,
    /// Explicit design problem in the shifted input space, used instead of a model.
    pub geometry: Option<GeometryConfig>,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub benchmark: BenchmarkConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dynamics {
    /// `x' = A x + B u`, sampled with zero-order hold.
    Continuous {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        ts: f64,
    },
    Discrete {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dynamics: Dynamics,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// Symmetric box `|x_i| <= state_bounds[i]`.
    pub state_bounds: Vec<f64>,
    pub input_bounds: Vec<f64>,
    /// Horizon of the reduced controller.
    pub horizon: usize,
    /// Horizon of the full-order reference; the initial set approximates its feasible set.
    pub desired_horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub deltas: Vec<Vec<f64>>,
    pub boxes: Vec<BoxConfig>,
    /// One target per box; the box centers are used when absent.
    pub targets: Option<Vec<Vec<f64>>>,
    /// Starting basis given by rows; the principal subspace is used when absent.
    pub initial_basis: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMethod {
    #[default]
    Riemannian,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub subspace_dim: usize,
    pub samples: usize,
    /// Rays used for the inner approximation of the feasible set.
    pub directions: usize,
    pub center: CenterMethod,
    /// Distance by which the designed points must clear every facet.
    pub margin: f64,
    pub method: DesignMethod,
    pub alm: AlmConfig,
    pub alternation: AlternationConfig,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            subspace_dim: 2,
            samples: 450,
            directions: 64,
            center: CenterMethod::Chebyshev,
            margin: 1e-5,
            method: DesignMethod::Riemannian,
            alm: AlmConfig::default(),
            alternation: AlternationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Points per axis of the grid over the bounding box of the initial set.
    pub grid: usize,
    /// Horizon of the full-order reference controller; `desired_horizon` when absent.
    pub reference_horizon: Option<usize>,
    pub closed_loop: ClosedLoopConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            grid: 21,
            reference_horizon: None,
            closed_loop: ClosedLoopConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub kkt_tol: f64,
    /// Membership tolerance of data, witnesses and certificates.
    pub admissibility_tol: f64,
    /// Relative slack of the value decrease and cost bound checks.
    pub lyapunov_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-10,
            kkt_tol: 1e-8,
            admissibility_tol: 1e-8,
            lyapunov_tol: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            feas_tol: self.feas_tol,
            opt_tol: self.opt_tol,
            kkt_tol: self.kkt_tol,
            ..SolverConfig::default()
        }
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(HarnessError::Config(format!(
            "{what} must be a nonempty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        cols,
        rows.iter().flatten().copied(),
    ))
}

fn config_err(e: grassmpc::Error) -> HarnessError {
    HarnessError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?
            }
            Some("toml") => {
                toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?
            }
            _ => {
                return Err(HarnessError::Config(format!(
                    "{}: expected a .toml or .json file",
                    path.display()
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.into()));
        match (&self.model, &self.geometry) {
            (Some(_), Some(_)) => return bad("give either [model] or [geometry], not both"),
            (None, None) => return bad("missing [model] or [geometry] section"),
            _ => {}
        }
        if self.design.subspace_dim == 0 {
            return bad("design.subspace_dim must be positive");
        }
        if !(self.design.margin >= 0.0) {
            return bad("design.margin must be nonnegative");
        }
        if let Some(m) = &self.model {
            if self.design.samples == 0 {
                return bad("design.samples must be positive");
            }
            if m.horizon == 0 || m.desired_horizon == 0 {
                return bad("horizons must be positive");
            }
            if self.design.directions < 3 {
                return bad("design.directions must be at least 3");
            }
            if self.benchmark.grid < 2 {
                return bad("benchmark.grid must be at least 2");
            }
            if m.state_bounds
                .iter()
                .chain(&m.input_bounds)
                .any(|&b| !(b > 0.0))
            {
                return bad("bounds must be positive");
            }
            self.system()?;
        }
        if let Some(g) = &self.geometry {
            let d = g.deltas.first().map_or(0, Vec::len);
            if d == 0 || g.deltas.iter().any(|v| v.len() != d) {
                return bad("geometry.deltas must be nonempty vectors of equal length");
            }
            if g.boxes.is_empty()
                || g.boxes
                    .iter()
                    .any(|b| b.lower.len() != d || b.upper.len() != d)
            {
                return bad("geometry.boxes must match the dimension of the deltas");
            }
            if self.design.subspace_dim > d {
                return bad("design.subspace_dim exceeds the dimension of the deltas");
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&ModelConfig> {
        self.model
            .as_ref()
            .ok_or_else(|| HarnessError::Config("this command needs a [model] section".into()))
    }

    pub fn system(&self) -> Result<LinearSystem> {
        let m = self.model()?;
        let (a, b) = match &m.dynamics {
            Dynamics::Continuous { a, b, ts } => {
                if !(*ts > 0.0) {
                    return Err(HarnessError::Config(
                        "sampling time must be positive".into(),
                    ));
                }
                discretize_zoh(
                    &matrix(a, "model.dynamics.a")?,
                    &matrix(b, "model.dynamics.b")?,
                    *ts,
                )
                .map_err(config_err)?
            }
            Dynamics::Discrete { a, b } => (
                matrix(a, "model.dynamics.a")?,
                matrix(b, "model.dynamics.b")?,
            ),
        };
        LinearSystem::new(a, b, matrix(&m.q, "model.q")?, matrix(&m.r, "model.r")?)
            .map_err(config_err)
    }

    /// LQR setup at the reduced controller's horizon.
    pub fn setup(&self) -> Result<MpcSetup> {
        let m = self.model()?;
        let sys = self.system()?;
        let state_set = Polytope::symmetric_box(&m.state_bounds).map_err(config_err)?;
        let input_set = Polytope::symmetric_box(&m.input_bounds).map_err(config_err)?;
        if state_set.dim() != sys.n() || input_set.dim() != sys.m() {
            return Err(HarnessError::Config(
                "bounds do not match the system dimensions".into(),
            ));
        }
        Ok(MpcSetup::lqr(
            sys,
            state_set,
            input_set,
            m.horizon,
            &self.tolerances.solver(),
        )?)
    }

    pub fn geometry_sets(&self) -> Result<GeometrySets> {
        let g = self
            .geometry
            .as_ref()
            .ok_or_else(|| HarnessError::Config("missing [geometry] section".into()))?;
        let deltas = g
            .deltas
            .iter()
            .map(|v| DVector::from_vec(v.clone()))
            .collect();
        let sets = g
            .boxes
            .iter()
            .map(|b| Polytope::from_box(&b.lower, &b.upper).map_err(config_err))
            .collect::<Result<Vec<_>>>()?;
        let targets = match &g.targets {
            Some(t) if t.len() != sets.len() => {
                return Err(HarnessError::Config(
                    "geometry.targets needs one entry per box".into(),
                ))
            }
            Some(t) => t.iter().map(|v| DVector::from_vec(v.clone())).collect(),
            None => g
                .boxes
                .iter()
                .map(|b| {
                    DVector::from_iterator(
                        b.lower.len(),
                        b.lower.iter().zip(&b.upper).map(|(l, u)| 0.5 * (l + u)),
                    )
                })
                .collect(),
        };
        Ok((deltas, sets, targets))
    }

    pub fn geometry_initial_basis(&self) -> Result<Option<DMatrix<f64>>> {
        match self
            .geometry
            .as_ref()
            .and_then(|g| g.initial_basis.as_ref())
        {
            Some(rows) => Ok(Some(matrix(rows, "geometry.initial_basis")?)),
            None => Ok(None),
        }
    }
}
