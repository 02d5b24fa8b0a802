use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::ScenarioDistribution;

/// Interim decision for the active arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Continue,
    Pause,
    DeclareNonInferior,
    StopInferior,
    StopToxicity,
    CloseNotRejected,
}

impl Decision {
    pub fn is_terminal_for_arm(&self) -> bool {
        matches!(
            self,
            Decision::DeclareNonInferior
                | Decision::StopInferior
                | Decision::StopToxicity
                | Decision::CloseNotRejected
        )
    }
}

/// Final verdict for one arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmVerdict {
    NonInferior,
    InferiorStop,
    ToxicityStop,
    NotRejectedAtFollowup,
    NeverTested,
}

/// Per-arm slice of a trial outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub arm: u32,
    pub verdict: ArmVerdict,
    /// Clock of the verdict in months since first enrollment.
    pub decision_time: Option<f64>,
    pub enrolled: u32,
}

/// The realized trajectory of one simulated (or real) trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub arms: Vec<ArmOutcome>,
    /// Months from first enrollment to the final decision.
    pub duration: f64,
    pub total_enrolled: u32,
}

impl TrialRecord {
    /// One CSV row per arm: `arm,verdict,decision_time,enrolled,duration`.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for a in &self.arms {
            let verdict = serde_json::to_value(a.verdict)
                .expect("verdict serializes")
                .as_str()
                .expect("verdict is a string")
                .to_string();
            let time = a
                .decision_time
                .map(|t| t.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                a.arm, verdict, time, a.enrolled, self.duration
            ));
        }
        out
    }

    pub const CSV_HEADER: &'static str = "arm,verdict,decision_time,enrolled,duration";
}

/// One simulated subject with latent outcome times; censoring is applied at
/// each analysis clock, never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatientRecord {
    pub arm: u32,
    pub enroll_time: f64,
    /// Latent efficacy event time since enrollment (may be infinite).
    pub efficacy_time: f64,
    /// Latent toxicity event time since enrollment (may be infinite).
    pub toxicity_time: f64,
}

/// Probabilities, boundaries and the decision computed at one interim look.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterimAssessment {
    pub decision: Decision,
    /// Posterior probability behind the non-inferiority rule (joint event in
    /// co-primary mode). None when the rule was not evaluable.
    pub p_ni: Option<f64>,
    /// Posterior probability of inferiority at the margin in force.
    pub p_inferior: Option<f64>,
    /// Posterior probability of insufficient toxicity reduction.
    pub p_toxicity: Option<f64>,
    /// Futility margin in force at this look.
    pub margin: f64,
    pub boundary_ni: f64,
    pub boundary_inferior: f64,
    pub boundary_toxicity: Option<f64>,
    pub boundary_margin_switch: Option<f64>,
    /// Set when order-constrained sampling fell back to fewer draws.
    #[serde(default)]
    pub constrained_sampling_degraded: bool,
}

/// One row of the trial's interim log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterimLog {
    pub interim_index: u64,
    pub clock: f64,
    pub arm: u32,
    pub n_arm: u32,
    pub n_total: u32,
    pub assessment: InterimAssessment,
}

/// Full per-trial debugging/replay payload.
#[derive(Debug, Clone)]
pub struct TrialLog {
    pub patients: Vec<PatientRecord>,
    pub interims: Vec<InterimLog>,
}

/// Scenario for one arm: the generating laws and optional annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmScenario {
    pub efficacy: ScenarioDistribution,
    #[serde(default)]
    pub toxicity: Option<ScenarioDistribution>,
    /// Annotated efficacy RMST; checked against the law when present.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
}

/// Per-arm generating laws for one simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialScenario {
    pub label: String,
    pub arms: Vec<ArmScenario>,
}

impl TrialScenario {
    /// Validate laws and annotation agreement (1e-6 months) at horizon `t_e`.
    pub fn validate(&self, t_e: f64) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "scenario '{}' has no arms",
                self.label
            )));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            arm.efficacy.validate()?;
            if let Some(tox) = &arm.toxicity {
                tox.validate()?;
            }
            if let Some(theta) = arm.theta {
                let actual = arm.efficacy.rmst(t_e);
                if (actual - theta).abs() > 1e-6 {
                    return Err(Error::InvalidConfig(format!(
                        "scenario '{}' arm {}: annotated theta {} but the law has RMST {}",
                        self.label,
                        i + 1,
                        theta,
                        actual
                    )));
                }
            }
            if let Some(beta) = arm.beta {
                let tox = arm.toxicity.as_ref().ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "scenario '{}' arm {} annotates beta without a toxicity law",
                        self.label,
                        i + 1
                    ))
                })?;
                let actual = tox.rmst(t_e);
                if (actual - beta).abs() > 1e-6 {
                    return Err(Error::InvalidConfig(format!(
                        "scenario '{}' arm {}: annotated beta {} but the law has RMST {}",
                        self.label,
                        i + 1,
                        beta,
                        actual
                    )));
                }
            }
        }
        Ok(())
    }
}
