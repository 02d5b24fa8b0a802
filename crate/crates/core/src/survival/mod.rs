//! Survival-distribution primitives: scenario laws, transformations, event-time
//! sampling, Kaplan-Meier estimation, restricted-mean functionals and bootstrap
//! variance.

mod distribution;
mod kaplan_meier;

pub use distribution::{
    apply_transform, exponential_with_rmst, parse_curve_csv, parse_curve_csv_str,
    solve_transform_to_rmst, ScenarioDistribution, TailRule, TransformKind,
};
pub use kaplan_meier::{
    bootstrap_rmst_se, kaplan_meier, km_rmst, CensoredObservation, KaplanMeierFit,
};
