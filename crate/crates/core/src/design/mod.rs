//! Data-driven design of the subspace pair `(U, sigma_0)`.

mod admissibility;
mod dataset;
mod euclidean;
mod grassmann;
mod offset;
mod problem;
mod riemannian;

pub use admissibility::{check_initial_admissibility, span_witnesses, AdmissibilityReport};
pub use dataset::{generate_dataset, DataSet, REJECTION_DRAWS, REJECTION_MIN_RATE};
pub use euclidean::{design_subspace_euclidean, AlternationConfig, AlternationOutcome};
pub use grassmann::{objective_f, GrassmannPoint, Scatter};
pub use offset::{fit_offset, PINV_RCOND};
pub use problem::{center, CenterMethod, DesignProblem};
pub use riemannian::{design_subspace_riemannian, AlmConfig, DesignOutcome};
