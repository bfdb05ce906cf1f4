//! Polyhedral sets: H-representation algebra, invariant sets, the stacked
//! admissible input set, and inner approximations of the feasible set.

mod admissible;
mod feasible;
mod hull;
mod invariant;
mod polytope;

pub use admissible::AdmissibleSetRep;
pub use feasible::{feasible_set_inner, RAY_BACKOFF};
pub use hull::{convex_hull_2d, InitialSet};
pub use invariant::{max_invariant_set, INVARIANT_MAX_ITER};
pub use polytope::Polytope;
