//! The four subcommands. Each reads its inputs from and writes its outputs to `out`.

use std::path::Path;

use crate::benchmark::{benchmark, write_benchmark, BenchmarkReport};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::io::{ensure_dir, read_json, write_json};
use crate::pipeline::{
    design, design_geometry, generate, read_dataset, write_dataset, Study, SubspaceFile,
    SUBSPACE_JSON,
};
use crate::selftest::{selftest, CheckResult};

/// Samples the data set and writes `dataset.csv` and `dataset.json`.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let study = Study::build(cfg)?;
    let (data, manifest) = generate(cfg, &study)?;
    ensure_dir(out)?;
    write_dataset(out, &data, &manifest)?;
    Ok(format!("wrote {} samples to {}", data.len(), out.display()))
}

/// Designs the subspace and writes `subspace.json`. A geometry config needs no data set.
pub fn cmd_design(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let file = if cfg.geometry.is_some() {
        design_geometry(cfg)?
    } else {
        let study = Study::build(cfg)?;
        let (data, _) = read_dataset(out, &study, cfg.tolerances.admissibility_tol)?;
        design(cfg, &study, &data)?
    };
    ensure_dir(out)?;
    write_json(&out.join(SUBSPACE_JSON), &file)?;
    if !file.certificate.admissible {
        return Err(HarnessError::Invariant(format!(
            "initial admissibility fails at vertices {:?}",
            file.certificate.violated
        )));
    }
    Ok(format!(
        "designed Gr({}, {}) subspace: objective {:.6e}, violation {:.3e}; certificate holds",
        file.r, file.d, file.objective, file.max_violation
    ))
}

/// Compares the reduced controller with the full-order reference on a grid and
/// writes `benchmark.csv`, `decrease.csv` and `benchmark.json`.
pub fn cmd_benchmark(cfg: &ExperimentConfig, out: &Path) -> Result<BenchmarkReport> {
    let file: SubspaceFile = read_json(&out.join(SUBSPACE_JSON))?;
    if !file.certificate.admissible {
        return Err(HarnessError::Invariant(
            "stored subspace has no admissibility certificate".into(),
        ));
    }
    let study = Study::build(cfg)?;
    let pair = file.pair()?;
    let (report, decrease) = benchmark(cfg, &study, &pair)?;
    ensure_dir(out)?;
    write_benchmark(out, &report, &decrease)?;
    let failures = report.invariant_failures();
    if !failures.is_empty() {
        return Err(HarnessError::Invariant(failures.join(", ")));
    }
    Ok(report)
}

/// Runs the invariant suite and writes `selftest.json`.
pub fn cmd_selftest(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<CheckResult>> {
    let results = selftest(cfg);
    ensure_dir(out)?;
    write_json(&out.join("selftest.json"), &results)?;
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(HarnessError::Invariant(format!(
            "failed checks: {}",
            failed.join(", ")
        )));
    }
    Ok(results)
}
