//! Interim decision replay on a fixed patient data set.
//!
//! Given the design, its calibrated boundaries and a patient-level CSV, the
//! replay re-runs the interim decision sequence at clocks 1, 2, ... up to the
//! requested analysis time, censoring outcomes at each clock. With the seed
//! used by a simulated trial it reproduces the engine's decisions exactly;
//! with real accumulating data it is the production decision path.

use crate::design::{
    bayesian_interim, AssessMode, Decision, DesignConfig, InterimInputs, InterimLog,
    ResolvedDesign, TrialLog,
};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::survival::CensoredObservation;

/// One row of a patient data file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatientRow {
    /// Arm assignment, 1-based.
    pub arm: u32,
    pub enroll_month: f64,
    /// Observed efficacy time (event or censoring) since enrollment.
    pub pfs_months: f64,
    pub pfs_event: bool,
    pub ae_months: Option<f64>,
    pub ae_event: Option<bool>,
}

const HEADER_EFFICACY: &str = "arm,enroll_month,pfs_months,pfs_event";
const HEADER_COPRIMARY: &str = "arm,enroll_month,pfs_months,pfs_event,ae_months,ae_event";

/// Parse a patient data CSV. The adverse-event columns are optional; when the
/// design is co-primary their absence is an error at replay time.
pub fn parse_patient_csv(content: &str, label: &str) -> Result<Vec<PatientRow>> {
    let err = |row: usize, message: String| Error::CsvParse {
        path: label.to_string(),
        row,
        message,
    };
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let header = header.trim();
    let has_ae = match header {
        h if h == HEADER_COPRIMARY => true,
        h if h == HEADER_EFFICACY => false,
        other => {
            return Err(err(
                1,
                format!(
                    "expected header '{HEADER_EFFICACY}' or '{HEADER_COPRIMARY}', got '{other}'"
                ),
            ))
        }
    };
    let parse_flag = |row: usize, s: &str, what: &str| -> Result<bool> {
        match s.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(err(row, format!("{what} must be 0 or 1, got '{other}'"))),
        }
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expect = if has_ae { 6 } else { 4 };
        if fields.len() != expect {
            return Err(err(
                row,
                format!("expected {expect} columns, got {}", fields.len()),
            ));
        }
        let arm: u32 = fields[0]
            .trim()
            .parse()
            .map_err(|e| err(row, format!("bad arm: {e}")))?;
        if arm < 1 {
            return Err(err(row, "arm must be >= 1".into()));
        }
        let enroll_month: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| err(row, format!("bad enroll_month: {e}")))?;
        let pfs_months: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| err(row, format!("bad pfs_months: {e}")))?;
        if enroll_month < 0.0 || pfs_months < 0.0 {
            return Err(err(row, "months must be >= 0".into()));
        }
        let pfs_event = parse_flag(row, fields[3], "pfs_event")?;
        let (ae_months, ae_event) = if has_ae {
            let m: f64 = fields[4]
                .trim()
                .parse()
                .map_err(|e| err(row, format!("bad ae_months: {e}")))?;
            if m < 0.0 {
                return Err(err(row, "months must be >= 0".into()));
            }
            (Some(m), Some(parse_flag(row, fields[5], "ae_event")?))
        } else {
            (None, None)
        };
        rows.push(PatientRow {
            arm,
            enroll_month,
            pfs_months,
            pfs_event,
            ae_months,
            ae_event,
        });
    }
    Ok(rows)
}

/// Render a simulated trial's ledger as a patient data file, censoring every
/// outcome at the data-collection clock.
pub fn patient_csv_from_log(log: &TrialLog, collection_clock: f64, coprimary: bool) -> String {
    let mut out = String::new();
    out.push_str(if coprimary {
        HEADER_COPRIMARY
    } else {
        HEADER_EFFICACY
    });
    out.push('\n');
    for p in &log.patients {
        if p.enroll_time > collection_clock {
            continue;
        }
        let follow = collection_clock - p.enroll_time;
        let (pfs, pfs_event) = if p.efficacy_time <= follow {
            (p.efficacy_time, 1)
        } else {
            (follow, 0)
        };
        if coprimary {
            let (ae, ae_event) = if p.toxicity_time <= follow {
                (p.toxicity_time, 1)
            } else {
                (follow, 0)
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.arm, p.enroll_time, pfs, pfs_event, ae, ae_event
            ));
        } else {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.arm, p.enroll_time, pfs, pfs_event
            ));
        }
    }
    out
}

/// Replay outcome: the interim log and the state after the last look.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub interims: Vec<InterimLog>,
    /// Arm under evaluation at the last look.
    pub active_arm: u32,
    /// The trial reached a terminal decision.
    pub terminated: bool,
}

impl ReplayOutcome {
    pub fn final_decision(&self) -> Decision {
        self.interims
            .last()
            .map(|l| l.assessment.decision)
            .unwrap_or(Decision::Continue)
    }
}

fn snapshot_rows(
    rows: &[PatientRow],
    arm: u32,
    clock: f64,
    toxicity: bool,
) -> Result<Vec<CensoredObservation>> {
    rows.iter()
        .filter(|r| r.arm == arm && r.enroll_month <= clock)
        .map(|r| {
            let follow = clock - r.enroll_month;
            let (time, event) = if toxicity {
                let m = r.ae_months.ok_or_else(|| {
                    Error::InvalidConfig(
                        "co-primary replay needs ae_months/ae_event columns".into(),
                    )
                })?;
                let e = r.ae_event.expect("parsed together with ae_months");
                (m, e)
            } else {
                (r.pfs_months, r.pfs_event)
            };
            // re-censor the recorded observation at this clock
            Ok(if event && time <= follow {
                CensoredObservation::event(time)
            } else {
                CensoredObservation::censored(time.min(follow))
            })
        })
        .collect()
}

/// Re-run the decision sequence on the data set through `analysis_clock`.
///
/// `seed` must be the trial's base seed: decision streams derive from it
/// exactly as in the simulation engine.
pub fn replay_decisions(
    design: &ResolvedDesign,
    rows: &[PatientRow],
    analysis_clock: f64,
    seed: u64,
) -> Result<ReplayOutcome> {
    let cfg: &DesignConfig = &design.config;
    if analysis_clock < 0.0 {
        return Err(Error::OutOfRange(format!(
            "analysis clock must be >= 0, got {analysis_clock}"
        )));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.arm > cfg.arms {
            return Err(Error::InvalidConfig(format!(
                "row {} references arm {}, design has {} arms",
                i + 2,
                r.arm,
                cfg.arms
            )));
        }
        if cfg.is_coprimary() && r.ae_months.is_none() {
            return Err(Error::InvalidConfig(
                "co-primary replay needs ae_months/ae_event columns".into(),
            ));
        }
    }
    let decision_key = StreamKey::new(seed).child(1);
    let constrained = cfg.monotone_efficacy || cfg.monotone_toxicity;
    let coprimary = cfg.is_coprimary();
    let n_looks = (analysis_clock / cfg.interim_period + 1e-9).floor() as u64;

    let mut interims = Vec::new();
    let mut active: u32 = 1;
    let mut terminated = false;
    for ia in 1..=n_looks {
        if terminated {
            break;
        }
        let clock = ia as f64 * cfg.interim_period;
        let efficacy = snapshot_rows(rows, active, clock, false)?;
        let toxicity = if coprimary {
            snapshot_rows(rows, active, clock, true)?
        } else {
            Vec::new()
        };
        let (earlier_eff, earlier_tox) = if constrained && active > 1 {
            let mut eff = Vec::new();
            let mut tox = Vec::new();
            for k in 1..active {
                eff.push(snapshot_rows(rows, k, clock, false)?);
                if coprimary {
                    tox.push(snapshot_rows(rows, k, clock, true)?);
                }
            }
            (eff, tox)
        } else {
            (Vec::new(), Vec::new())
        };
        let n_arm = efficacy.len() as u32;
        let n_total = rows.iter().filter(|r| r.enroll_month <= clock).count() as u32;
        let enrollment_complete = n_arm >= cfg.m_max || n_total >= cfg.n_total;
        let months_since_last_enroll = if n_arm > 0 {
            let last = rows
                .iter()
                .filter(|r| r.arm == active && r.enroll_month <= clock)
                .map(|r| r.enroll_month)
                .fold(f64::NEG_INFINITY, f64::max);
            clock - last
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
        let assessment = bayesian_interim(design, &inputs, AssessMode::Decide, decision_key.child(ia));
        let decision = assessment.decision;
        interims.push(InterimLog {
            interim_index: ia,
            clock,
            arm: active,
            n_arm,
            n_total,
            assessment,
        });
        match decision {
            Decision::DeclareNonInferior => {
                if active < cfg.arms && n_total + cfg.m_max <= cfg.n_total {
                    active += 1;
                } else {
                    terminated = true;
                }
            }
            Decision::StopInferior | Decision::StopToxicity | Decision::CloseNotRejected => {
                terminated = true;
            }
            Decision::Continue | Decision::Pause => {}
        }
    }
    Ok(ReplayOutcome {
        interims,
        active_arm: active,
        terminated,
    })
}
