//! The sequential de-intensification design: decision boundaries, the design
//! configuration, interim decision logic and the per-trial state machine.

mod boundary;
mod config;
mod engine;
mod interim;
mod state;

pub use boundary::BoundarySpec;
pub use config::{AccrualModel, DesignConfig, EndpointMode, ResolvedDesign, ScaleSet};
pub use engine::{
    censored_snapshot, probe_single_arm, run_trial, run_trial_logged, run_with_policy,
    BayesPolicy, DecisionPolicy, TrialStreams,
};
pub use interim::{bayesian_interim, AssessMode, InterimInputs};
pub use state::{
    ArmOutcome, ArmScenario, ArmVerdict, Decision, InterimAssessment, InterimLog, PatientRecord,
    TrialLog, TrialRecord, TrialScenario,
};

#[cfg(test)]
pub(crate) use config::test_support;
