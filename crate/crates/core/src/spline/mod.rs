//! Monotone B-spline transformations on `[0, 1]`.

mod basis;
mod fit;
mod model;

pub use basis::BSplineBasis;
pub use fit::{
    blom_scores, default_candidates, evaluate_transforms, initial_coefficients, initialize_transforms,
    pilot_fit, project_feasible, select_num_basis, transform, PilotFit, SplineSettings, TransformedData,
    VariableTransform,
};
pub use model::{
    build_constraints, build_prior, difference_matrix, MonotoneSplineModel, ReducedPrior, SplineConstraints,
    SplinePrior, FEASIBILITY_MARGIN,
};
