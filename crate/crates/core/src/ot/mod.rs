//! The single-step Wasserstein projection and the optimal transport tools it uses.

mod ctransform;
mod project;
mod pushforward;

pub use ctransform::{brute_force_ctransform, ctransform, ctransform_with_argmin, BRUTE_FORCE_LIMIT};
pub use project::{project, project_with, DualPotential, ProjectionOptions, ProjectionResult};
pub use pushforward::pushforward;
