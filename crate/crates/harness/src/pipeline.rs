//! Data generation and subspace design for a configured study.

use std::path::Path;

use grassmpc::design::{
    check_initial_admissibility, design_subspace_euclidean, design_subspace_riemannian, fit_offset,
    generate_dataset, span_witnesses, AdmissibilityReport, DataSet, DesignProblem, GrassmannPoint,
};
use grassmpc::geometry::{feasible_set_inner, InitialSet, Polytope};
use grassmpc::mpc::{MpcSetup, SubspacePair};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{DesignMethod, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::io::{fmt, from_rows, read_json, read_table, rows, vec_of, write_json, write_table};

pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_JSON: &str = "dataset.json";
pub const SUBSPACE_JSON: &str = "subspace.json";

/// Reduced-controller setup together with the initial state set.
#[derive(Debug, Clone)]
pub struct Study {
    pub setup: MpcSetup,
    /// Inner approximation of the feasible set at the desired horizon.
    pub initial: InitialSet,
}

impl Study {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let setup = cfg.setup()?;
        let model = cfg.model()?;
        let solver = cfg.tolerances.solver();
        let desired = setup.with_horizon(model.desired_horizon)?;
        let vertices =
            feasible_set_inner(&desired.problem.admissible, cfg.design.directions, &solver)?;
        let initial = InitialSet::from_vertices(vertices)?;
        Ok(Self { setup, initial })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub seed: u64,
    pub horizon: usize,
    pub samples: usize,
    pub n: usize,
    pub d: usize,
    pub initial_vertices: Vec<Vec<f64>>,
    /// Offset `sigma_0(x) = gamma x + xi` fitted with uniform weights.
    pub gamma: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
}

pub fn generate(cfg: &ExperimentConfig, study: &Study) -> Result<(DataSet, DatasetManifest)> {
    let data = generate_dataset(
        &study.setup,
        &study.initial,
        cfg.design.samples,
        cfg.seed,
        &cfg.tolerances.solver(),
    )?;
    let (gamma, xi) = fit_offset(&data, None)?;
    let manifest = DatasetManifest {
        name: cfg.name.clone(),
        seed: cfg.seed,
        horizon: data.horizon,
        samples: data.len(),
        n: data.n(),
        d: data.d(),
        initial_vertices: study.initial.vertices().iter().map(vec_of).collect(),
        gamma: rows(&gamma),
        xi: vec_of(&xi),
    };
    Ok((data, manifest))
}

pub fn write_dataset(dir: &Path, data: &DataSet, manifest: &DatasetManifest) -> Result<()> {
    let mut header: Vec<String> = (0..data.n()).map(|i| format!("x{i}")).collect();
    header.extend((0..data.d()).map(|i| format!("z{i}")));
    let table: Vec<Vec<String>> = data
        .states
        .iter()
        .zip(&data.inputs)
        .map(|(x, z)| x.iter().chain(z.iter()).map(|&v| fmt(v)).collect())
        .collect();
    write_table(&dir.join(DATASET_CSV), &header, &table)?;
    write_json(&dir.join(DATASET_JSON), manifest)
}

/// Loads a data set and re-checks every pair against the admissible set.
pub fn read_dataset(dir: &Path, study: &Study, tol: f64) -> Result<(DataSet, DatasetManifest)> {
    let manifest: DatasetManifest = read_json(&dir.join(DATASET_JSON))?;
    let (header, table) = read_table(&dir.join(DATASET_CSV))?;
    let (n, d) = (manifest.n, manifest.d);
    if header.len() != n + d || n != study.setup.sys.n() || d != study.setup.problem.d() {
        return Err(HarnessError::Config(
            "stored data set does not match the configured model".into(),
        ));
    }
    let states = table
        .iter()
        .map(|r| DVector::from_column_slice(&r[..n]))
        .collect();
    let inputs = table
        .iter()
        .map(|r| DVector::from_column_slice(&r[n..]))
        .collect();
    let data = DataSet::new(states, inputs, manifest.seed, manifest.horizon)?;
    if let Some((i, v)) = data.verify(&study.setup, tol)? {
        return Err(HarnessError::Invariant(format!(
            "stored sample {i} violates the constraints by {v:.3e}"
        )));
    }
    Ok((data, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub admissible: bool,
    /// Vertices of the initial set; empty for a geometry study.
    pub vertices: Vec<Vec<f64>>,
    /// Per vertex a latent point `alpha_j` with `U alpha_j + sigma(x_j)` admissible.
    pub witnesses: Vec<Option<Vec<f64>>>,
    /// Whether `alpha_j = U' delta_bar_j` itself was verified.
    pub projected: Vec<bool>,
    /// Largest facet clearance reachable on the affine subspace.
    pub margins: Vec<f64>,
    pub violated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFile {
    pub name: String,
    pub method: DesignMethod,
    pub r: usize,
    pub d: usize,
    /// Basis by rows, `d x r`.
    pub u: Vec<Vec<f64>>,
    pub gamma: Option<Vec<Vec<f64>>>,
    pub xi: Option<Vec<f64>>,
    pub objective: f64,
    pub max_violation: f64,
    pub stationarity: Option<f64>,
    pub iterations: usize,
    pub certificate: Certificate,
}

impl SubspaceFile {
    pub fn basis(&self) -> Result<DMatrix<f64>> {
        from_rows(&self.u, self.r)
    }

    pub fn pair(&self) -> Result<SubspacePair> {
        let (Some(gamma), Some(xi)) = (&self.gamma, &self.xi) else {
            return Err(HarnessError::Config(
                "subspace file carries no offset".into(),
            ));
        };
        let n = gamma.first().map_or(0, Vec::len);
        Ok(SubspacePair::new(
            self.basis()?,
            from_rows(gamma, n)?,
            DVector::from_vec(xi.clone()),
        )?)
    }
}

struct Designed {
    point: GrassmannPoint,
    objective: f64,
    max_violation: f64,
    stationarity: Option<f64>,
    iterations: usize,
}

fn run_design(
    cfg: &ExperimentConfig,
    prob: &DesignProblem,
    init: Option<&DMatrix<f64>>,
) -> Result<Designed> {
    Ok(match cfg.design.method {
        DesignMethod::Riemannian => {
            let out = design_subspace_riemannian(prob, &cfg.design.alm, init)?;
            Designed {
                point: out.point,
                objective: out.objective,
                max_violation: out.max_violation,
                stationarity: Some(out.stationarity),
                iterations: out.outer_iterations,
            }
        }
        DesignMethod::Euclidean => {
            let out = design_subspace_euclidean(
                prob,
                &cfg.design.alternation,
                init,
                &cfg.tolerances.solver(),
            )?;
            Designed {
                point: out.point,
                objective: out.objective,
                max_violation: out.max_violation,
                stationarity: None,
                iterations: out.iterations,
            }
        }
    })
}

/// Prefers the projected targets `U' delta_bar_j` as witnesses and falls back
/// to the LP witnesses where those fail.
fn certificate(
    u: &DMatrix<f64>,
    prob: &DesignProblem,
    raw_sets: &[Polytope],
    report: AdmissibilityReport,
    vertices: Vec<Vec<f64>>,
    tol: f64,
) -> Result<Certificate> {
    let mut witnesses = report.witnesses;
    let mut projected = vec![false; witnesses.len()];
    for (j, (set, target)) in raw_sets.iter().zip(&prob.targets).enumerate() {
        let alpha = u.transpose() * target;
        if set.max_violation(&(u * &alpha))? <= tol {
            witnesses[j] = Some(vec_of(&alpha));
            projected[j] = true;
        }
    }
    Ok(Certificate {
        admissible: report.admissible,
        vertices,
        witnesses,
        projected,
        margins: report.margins,
        violated: report.violated,
    })
}

/// Fits the offset, builds the shifted admissible sets at the vertices of the
/// initial set, designs the subspace and certifies initial admissibility.
pub fn design(cfg: &ExperimentConfig, study: &Study, data: &DataSet) -> Result<SubspaceFile> {
    let solver = cfg.tolerances.solver();
    let tol = cfg.tolerances.admissibility_tol;
    let d = study.setup.problem.d();
    let r = cfg.design.subspace_dim;
    if r > d {
        return Err(HarnessError::Config(format!(
            "design.subspace_dim {r} exceeds the sequence dimension {d}"
        )));
    }
    let (gamma, xi) = fit_offset(data, None)?;
    let vertices = study.initial.vertices().to_vec();
    let prob = DesignProblem::from_setup(
        &study.setup,
        data,
        &gamma,
        &xi,
        &vertices,
        r,
        cfg.design.center,
        cfg.design.margin,
        &solver,
    )?;
    let designed = run_design(cfg, &prob, None)?;
    let pair = SubspacePair::new(designed.point.basis().clone(), gamma.clone(), xi.clone())?;
    let report = check_initial_admissibility(&study.setup.problem, &pair, &vertices, tol, &solver)?;
    let raw_sets = vertices
        .iter()
        .map(|v| {
            Ok(study
                .setup
                .problem
                .admissible
                .at(v)?
                .translate(&pair.offset(v))?)
        })
        .collect::<Result<Vec<_>>>()?;
    let cert = certificate(
        &pair.u,
        &prob,
        &raw_sets,
        report,
        vertices.iter().map(vec_of).collect(),
        tol,
    )?;
    Ok(SubspaceFile {
        name: cfg.name.clone(),
        method: cfg.design.method,
        r,
        d,
        u: rows(&pair.u),
        gamma: Some(rows(&gamma)),
        xi: Some(vec_of(&xi)),
        objective: designed.objective,
        max_violation: designed.max_violation,
        stationarity: designed.stationarity,
        iterations: designed.iterations,
        certificate: cert,
    })
}

/// Design on an explicit geometry: the sets already live in the shifted space.
pub fn design_geometry(cfg: &ExperimentConfig) -> Result<SubspaceFile> {
    let solver = cfg.tolerances.solver();
    let tol = cfg.tolerances.admissibility_tol;
    let (deltas, sets, targets) = cfg.geometry_sets()?;
    let r = cfg.design.subspace_dim;
    let prob = DesignProblem::new(&deltas, targets, sets.clone(), r, cfg.design.margin)?;
    let init = cfg.geometry_initial_basis()?;
    let designed = run_design(cfg, &prob, init.as_ref())?;
    let u = designed.point.basis().clone();
    let report = span_witnesses(&u, &sets, tol, &solver)?;
    let cert = certificate(&u, &prob, &sets, report, Vec::new(), tol)?;
    Ok(SubspaceFile {
        name: cfg.name.clone(),
        method: cfg.design.method,
        r,
        d: prob.d(),
        u: rows(&u),
        gamma: None,
        xi: None,
        objective: designed.objective,
        max_violation: designed.max_violation,
        stationarity: designed.stationarity,
        iterations: designed.iterations,
        certificate: cert,
    })
}
