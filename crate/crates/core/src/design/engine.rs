use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::design::config::{AccrualModel, DesignConfig, ResolvedDesign};
use crate::design::interim::{bayesian_interim, AssessMode, InterimInputs};
use crate::design::state::{
    ArmOutcome, ArmVerdict, Decision, InterimAssessment, InterimLog, PatientRecord, TrialLog,
    TrialRecord, TrialScenario,
};
use crate::rng::StreamKey;
use crate::survival::{CensoredObservation, ScenarioDistribution};

/// Random streams for one simulated trial: patient-level randomness is kept
/// apart from decision-level randomness so different decision policies see
/// identical accrual and outcomes.
#[derive(Debug, Clone)]
pub struct TrialStreams {
    pub data: ChaCha12Rng,
    pub decision_key: StreamKey,
}

impl TrialStreams {
    /// Streams for replicate `replicate` of scenario `scenario` under a master
    /// seed. Adding scenarios or replicates never perturbs existing streams.
    pub fn derive(master_seed: u64, scenario: u64, replicate: u64) -> Self {
        let base = StreamKey::new(master_seed).child(scenario).child(replicate);
        TrialStreams {
            data: base.child(0).rng(),
            decision_key: base.child(1),
        }
    }
}

/// Interim decision maker plugged into the shared trial state machine.
pub trait DecisionPolicy {
    /// Reset any per-arm state when arm `arm` opens.
    fn on_arm_start(&mut self, _arm: u32) {}
    fn assess(&mut self, inputs: &InterimInputs, ia_key: StreamKey) -> InterimAssessment;
}

/// The Bayesian design's policy: the interim assessor in decide mode.
pub struct BayesPolicy<'a> {
    pub design: &'a ResolvedDesign,
}

impl DecisionPolicy for BayesPolicy<'_> {
    fn assess(&mut self, inputs: &InterimInputs, ia_key: StreamKey) -> InterimAssessment {
        bayesian_interim(self.design, inputs, AssessMode::Decide, ia_key)
    }
}

fn accrual_gap(cfg: &DesignConfig, rng: &mut ChaCha12Rng) -> f64 {
    match cfg.accrual {
        AccrualModel::Poisson => {
            let u: f64 = rng.random();
            -(1.0 - u).ln() / cfg.accrual_rate
        }
        AccrualModel::Deterministic => 1.0 / cfg.accrual_rate,
    }
}

fn draw_patient(
    arm: u32,
    enroll_time: f64,
    efficacy: &ScenarioDistribution,
    toxicity: Option<&ScenarioDistribution>,
    rng: &mut ChaCha12Rng,
) -> PatientRecord {
    // both uniforms are always drawn so the stream layout does not depend on
    // the endpoint mode
    let u_y = 1.0 - rng.random::<f64>();
    let u_x = 1.0 - rng.random::<f64>();
    PatientRecord {
        arm,
        enroll_time,
        efficacy_time: efficacy.inverse_survival(u_y),
        toxicity_time: toxicity.map_or(f64::INFINITY, |g| g.inverse_survival(u_x)),
    }
}

/// Observations for arm `arm` censored at the analysis clock.
pub fn censored_snapshot(
    patients: &[PatientRecord],
    arm: u32,
    clock: f64,
    toxicity: bool,
) -> Vec<CensoredObservation> {
    patients
        .iter()
        .filter(|p| p.arm == arm && p.enroll_time <= clock)
        .map(|p| {
            let follow = clock - p.enroll_time;
            let latent = if toxicity {
                p.toxicity_time
            } else {
                p.efficacy_time
            };
            if latent <= follow {
                CensoredObservation::event(latent)
            } else {
                CensoredObservation::censored(follow)
            }
        })
        .collect()
}

const MAX_INTERIMS: u64 = 1_000_000;

/// Simulate one trial under the Bayesian design.
pub fn run_trial(
    design: &ResolvedDesign,
    scenario: &TrialScenario,
    streams: TrialStreams,
) -> TrialRecord {
    run_with_policy(
        &design.config,
        scenario,
        &mut BayesPolicy { design },
        streams,
        false,
    )
    .0
}

/// Simulate one trial and keep the full patient ledger and interim log.
pub fn run_trial_logged(
    design: &ResolvedDesign,
    scenario: &TrialScenario,
    streams: TrialStreams,
) -> (TrialRecord, TrialLog) {
    let (record, log) = run_with_policy(
        &design.config,
        scenario,
        &mut BayesPolicy { design },
        streams,
        true,
    );
    (record, log.expect("log requested"))
}

/// Shared state machine: Poisson accrual, monthly censored snapshots, arm
/// advance on non-inferiority (budget permitting), pause at the enrollment
/// cap and close-out after the follow-up window. Decisions come from the
/// supplied policy.
pub fn run_with_policy(
    cfg: &DesignConfig,
    scenario: &TrialScenario,
    policy: &mut dyn DecisionPolicy,
    mut streams: TrialStreams,
    want_log: bool,
) -> (TrialRecord, Option<TrialLog>) {
    assert_eq!(
        scenario.arms.len(),
        cfg.arms as usize,
        "scenario must cover every arm"
    );
    let k_arms = cfg.arms;
    let coprimary = cfg.is_coprimary();
    let constrained = cfg.monotone_efficacy || cfg.monotone_toxicity;

    let mut patients: Vec<PatientRecord> = Vec::new();
    let mut enrolled = vec![0u32; k_arms as usize];
    let mut last_enroll = vec![0.0_f64; k_arms as usize];
    let mut total = 0u32;
    let mut active: u32 = 1;
    let mut accepting = true;
    let mut next_arrival = 0.0_f64;
    let mut verdicts: Vec<Option<(ArmVerdict, f64)>> = vec![None; k_arms as usize];
    let mut interims: Vec<InterimLog> = Vec::new();
    let mut duration;

    policy.on_arm_start(active);
    let mut ia: u64 = 0;
    loop {
        ia += 1;
        assert!(ia < MAX_INTERIMS, "trial failed to terminate");
        let clock = ia as f64 * cfg.interim_period;
        duration = clock;

        // enroll arrivals up to the clock while the active arm has capacity
        while accepting && next_arrival <= clock {
            let arm_idx = (active - 1) as usize;
            let arm_scenario = &scenario.arms[arm_idx];
            let t = next_arrival;
            patients.push(draw_patient(
                active,
                t,
                &arm_scenario.efficacy,
                arm_scenario.toxicity.as_ref(),
                &mut streams.data,
            ));
            enrolled[arm_idx] += 1;
            total += 1;
            last_enroll[arm_idx] = t;
            next_arrival = t + accrual_gap(cfg, &mut streams.data);
            if enrolled[arm_idx] >= cfg.m_max || total >= cfg.n_total {
                accepting = false;
            }
        }

        let arm_idx = (active - 1) as usize;
        let n_arm = enrolled[arm_idx];
        let efficacy = censored_snapshot(&patients, active, clock, false);
        let toxicity = if coprimary {
            censored_snapshot(&patients, active, clock, true)
        } else {
            Vec::new()
        };
        let (earlier_eff, earlier_tox) = if constrained && active > 1 {
            let eff: Vec<Vec<CensoredObservation>> = (1..active)
                .map(|k| censored_snapshot(&patients, k, clock, false))
                .collect();
            let tox: Vec<Vec<CensoredObservation>> = if coprimary {
                (1..active)
                    .map(|k| censored_snapshot(&patients, k, clock, true))
                    .collect()
            } else {
                Vec::new()
            };
            (eff, tox)
        } else {
            (Vec::new(), Vec::new())
        };
        let enrollment_complete = n_arm >= cfg.m_max || total >= cfg.n_total;
        let months_since_last_enroll = if n_arm > 0 {
            clock - last_enroll[arm_idx]
        } else {
            0.0
        };
        let inputs = InterimInputs {
            arm: active,
            n_arm,
            efficacy: &efficacy,
            toxicity: &toxicity,
            earlier_arms_efficacy: &earlier_eff,
            earlier_arms_toxicity: &earlier_tox,
            enrollment_complete,
            months_since_last_enroll,
        };
        let assessment = policy.assess(&inputs, streams.decision_key.child(ia));
        let decision = assessment.decision;
        if want_log {
            interims.push(InterimLog {
                interim_index: ia,
                clock,
                arm: active,
                n_arm,
                n_total: total,
                assessment,
            });
        }

        match decision {
            Decision::Continue | Decision::Pause => {}
            Decision::DeclareNonInferior => {
                verdicts[arm_idx] = Some((ArmVerdict::NonInferior, clock));
                let budget_allows = total + cfg.m_max <= cfg.n_total;
                if active < k_arms && budget_allows {
                    active += 1;
                    accepting = true;
                    next_arrival = clock + accrual_gap(cfg, &mut streams.data);
                    policy.on_arm_start(active);
                } else {
                    break;
                }
            }
            Decision::StopInferior => {
                verdicts[arm_idx] = Some((ArmVerdict::InferiorStop, clock));
                break;
            }
            Decision::StopToxicity => {
                verdicts[arm_idx] = Some((ArmVerdict::ToxicityStop, clock));
                break;
            }
            Decision::CloseNotRejected => {
                verdicts[arm_idx] = Some((ArmVerdict::NotRejectedAtFollowup, clock));
                break;
            }
        }
    }

    let arms = (0..k_arms)
        .map(|k| {
            let idx = k as usize;
            let (verdict, time) = match verdicts[idx] {
                Some((v, t)) => (v, Some(t)),
                None => (ArmVerdict::NeverTested, None),
            };
            ArmOutcome {
                arm: k + 1,
                verdict,
                decision_time: time,
                enrolled: enrolled[idx],
            }
        })
        .collect();
    let record = TrialRecord {
        arms,
        duration,
        total_enrolled: total,
    };
    let log = want_log.then_some(TrialLog { patients, interims });
    (record, log)
}

/// Single-arm probe for boundary calibration: enroll `m_max` patients from
/// the given laws, run every interim in probe mode (no stopping) and record
/// the posterior probabilities through the close-out look.
pub fn probe_single_arm(
    design: &ResolvedDesign,
    efficacy_law: &ScenarioDistribution,
    toxicity_law: Option<&ScenarioDistribution>,
    mut streams: TrialStreams,
) -> Vec<InterimLog> {
    let cfg = &design.config;
    let coprimary = cfg.is_coprimary();
    let mut patients: Vec<PatientRecord> = Vec::new();
    let mut enrolled = 0u32;
    let mut last_enroll = 0.0_f64;
    let mut next_arrival = 0.0_f64;
    let mut accepting = true;
    let mut logs = Vec::new();

    let mut ia: u64 = 0;
    loop {
        ia += 1;
        assert!(ia < MAX_INTERIMS, "probe failed to terminate");
        let clock = ia as f64 * cfg.interim_period;
        while accepting && next_arrival <= clock {
            let t = next_arrival;
            patients.push(draw_patient(
                1,
                t,
                efficacy_law,
                toxicity_law,
                &mut streams.data,
            ));
            enrolled += 1;
            last_enroll = t;
            next_arrival = t + accrual_gap(cfg, &mut streams.data);
            if enrolled >= cfg.m_max {
                accepting = false;
            }
        }
        let efficacy = censored_snapshot(&patients, 1, clock, false);
        let toxicity = if coprimary {
            censored_snapshot(&patients, 1, clock, true)
        } else {
            Vec::new()
        };
        let enrollment_complete = enrolled >= cfg.m_max;
        let months_since_last_enroll = if enrolled > 0 {
            clock - last_enroll
        } else {
            0.0
        };
        let inputs = InterimInputs {
            arm: 1,
            n_arm: enrolled,
            efficacy: &efficacy,
            toxicity: &toxicity,
            earlier_arms_efficacy: &[],
            earlier_arms_toxicity: &[],
            enrollment_complete,
            months_since_last_enroll,
        };
        let assessment = bayesian_interim(
            design,
            &inputs,
            AssessMode::Probe,
            streams.decision_key.child(ia),
        );
        logs.push(InterimLog {
            interim_index: ia,
            clock,
            arm: 1,
            n_arm: enrolled,
            n_total: enrolled,
            assessment,
        });
        if enrollment_complete && months_since_last_enroll >= cfg.t_fu {
            break;
        }
    }
    logs
}

/// Convenience used by tests: streams from a flat path.
#[cfg(test)]
pub(crate) fn test_streams(master: u64, replicate: u64) -> TrialStreams {
    TrialStreams::derive(master, 0, replicate)
}
