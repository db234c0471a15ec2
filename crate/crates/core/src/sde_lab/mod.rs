//! Stable Lévy paths, Euler schemes for the SDE and its transformed version, derivative flows
//! and common-noise Lipschitz statistics.

mod drift;
mod euler;
mod flow;
mod path;
mod transform;

pub use drift::{ConstantDrift, Drift, FnDrift, GridDrift, TanakaDrift, ZeroDrift};
pub use euler::{euler_integrate, euler_window, sup_separation, Trajectory};
pub use flow::{lipschitz_ratio, mean_se, path_seed, FlowEnsemble, LipschitzEstimate, PathParams, MIN_PATHS};
pub use path::{
    expected_jump_count, sample_levy_path, small_jump_covariance, step_count, Jump, LevyPath, SmallJumpPolicy,
};
pub use transform::{
    build_transform, conjugacy_error, derivative_flow, integrate_transformed, TanakaTransform, TransformedTrajectory,
    INVERSE_TOL, MAX_INVERSE_ITERATIONS,
};

#[cfg(test)]
mod tests;
