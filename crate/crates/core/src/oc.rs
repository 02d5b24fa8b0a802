//! Parallel Monte-Carlo evaluation of operating characteristics for a
//! configured design (Bayesian or comparator) over named scenario sets.
//!
//! Replicate streams derive from (master seed, scenario index, replicate
//! index), so adding scenarios never perturbs existing replicates, and the
//! output is byte-identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparator::{run_comparator_trial, RciDesignConfig};
use crate::design::{
    run_trial, ArmVerdict, DesignConfig, ResolvedDesign, TrialRecord, TrialScenario, TrialStreams,
};
use crate::error::{Error, Result};
use crate::exec::with_pool;
use crate::rng::derive_seed;
use crate::stats::{binomial_se, mean, sample_sd};

/// Labeled list of per-arm scenarios to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<TrialScenario>,
}

impl ScenarioSet {
    pub fn validate(&self, config: &DesignConfig) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::InvalidConfig("scenario set is empty".into()));
        }
        for s in &self.scenarios {
            s.validate(config.t_e)?;
            if s.arms.len() != config.arms as usize {
                return Err(Error::InvalidConfig(format!(
                    "scenario '{}' has {} arms, design has {}",
                    s.label,
                    s.arms.len(),
                    config.arms
                )));
            }
            if config.is_coprimary() {
                for (i, arm) in s.arms.iter().enumerate() {
                    if arm.toxicity.is_none() {
                        return Err(Error::InvalidConfig(format!(
                            "scenario '{}' arm {} needs a toxicity law in co-primary mode",
                            s.label,
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario set serializes")
    }
}

/// Point estimate with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub mc_se: f64,
}

/// Per-arm operating characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOc {
    pub arm: u32,
    /// Probability of rejecting the arm's null (declared non-inferior).
    pub power: Estimate,
    pub early_futility: Estimate,
    pub early_toxicity: Estimate,
    pub not_rejected_at_followup: Estimate,
    pub not_tested: Estimate,
    pub avg_enrolled: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOc {
    pub label: String,
    pub replicates: u32,
    pub per_arm: Vec<ArmOc>,
    pub avg_duration: Estimate,
    pub avg_total_enrolled: Estimate,
}

/// Full simulation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcReport {
    pub version: String,
    pub seed: u64,
    pub sims: u32,
    pub config_digest: String,
    pub engine: String,
    pub scenarios: Vec<ScenarioOc>,
}

fn proportion(records: &[TrialRecord], f: impl Fn(&TrialRecord) -> bool) -> Estimate {
    let hits = records.iter().filter(|r| f(r)).count();
    let p = hits as f64 / records.len() as f64;
    Estimate {
        value: p,
        mc_se: binomial_se(p, records.len()),
    }
}

fn mean_estimate(values: &[f64]) -> Estimate {
    Estimate {
        value: mean(values),
        mc_se: sample_sd(values) / (values.len() as f64).sqrt(),
    }
}

fn aggregate(label: &str, arms: u32, records: &[TrialRecord]) -> ScenarioOc {
    let per_arm = (1..=arms)
        .map(|k| {
            let verdict = |r: &TrialRecord| r.arms[(k - 1) as usize].verdict;
            ArmOc {
                arm: k,
                power: proportion(records, |r| verdict(r) == ArmVerdict::NonInferior),
                early_futility: proportion(records, |r| verdict(r) == ArmVerdict::InferiorStop),
                early_toxicity: proportion(records, |r| verdict(r) == ArmVerdict::ToxicityStop),
                not_rejected_at_followup: proportion(records, |r| {
                    verdict(r) == ArmVerdict::NotRejectedAtFollowup
                }),
                not_tested: proportion(records, |r| verdict(r) == ArmVerdict::NeverTested),
                avg_enrolled: mean_estimate(
                    &records
                        .iter()
                        .map(|r| r.arms[(k - 1) as usize].enrolled as f64)
                        .collect::<Vec<_>>(),
                ),
            }
        })
        .collect();
    let durations: Vec<f64> = records.iter().map(|r| r.duration).collect();
    let totals: Vec<f64> = records.iter().map(|r| r.total_enrolled as f64).collect();
    ScenarioOc {
        label: label.to_string(),
        replicates: records.len() as u32,
        per_arm,
        avg_duration: mean_estimate(&durations),
        avg_total_enrolled: mean_estimate(&totals),
    }
}

/// Simulate operating characteristics for every scenario in the set.
///
/// `comparator` switches the decision policy to the RCI design; the accrual
/// and outcome streams are identical either way.
pub fn simulate_oc(
    design: &ResolvedDesign,
    comparator: Option<RciDesignConfig>,
    scenarios: &ScenarioSet,
    sims: u32,
    master_seed: u64,
    workers: usize,
) -> Result<OcReport> {
    if sims < 100 {
        return Err(Error::OutOfRange(format!(
            "need at least 100 replicates, got {sims}"
        )));
    }
    scenarios.validate(&design.config)?;
    if let Some(c) = &comparator {
        c.validate()?;
    }
    let arms = design.config.arms;
    let results: Vec<ScenarioOc> = scenarios
        .scenarios
        .iter()
        .enumerate()
        .map(|(s_idx, scenario)| {
            let records = scenario_records(
                design,
                comparator,
                scenario,
                s_idx as u64,
                sims,
                master_seed,
                workers,
            );
            aggregate(&scenario.label, arms, &records)
        })
        .collect();
    Ok(OcReport {
        version: crate::VERSION.to_string(),
        seed: master_seed,
        sims,
        config_digest: design.config.digest(),
        engine: if comparator.is_some() {
            "comparator".to_string()
        } else {
            "bayesian".to_string()
        },
        scenarios: results,
    })
}

/// The raw replicate records for one scenario, in replicate order.
pub fn scenario_records(
    design: &ResolvedDesign,
    comparator: Option<RciDesignConfig>,
    scenario: &TrialScenario,
    scenario_index: u64,
    sims: u32,
    master_seed: u64,
    workers: usize,
) -> Vec<TrialRecord> {
    with_pool(workers, || {
        (0..sims as u64)
            .into_par_iter()
            .map(|rep| {
                let streams = TrialStreams::derive(master_seed, scenario_index, rep);
                match comparator {
                    Some(c) => run_comparator_trial(design, c, scenario, streams),
                    None => run_trial(design, scenario, streams),
                }
            })
            .collect()
    })
}

/// Flat CSV view: `scenario,arm,metric,estimate,mc_se`. Study-level metrics
/// appear with an empty arm column.
pub fn oc_to_csv(report: &OcReport) -> String {
    let mut out = String::from("scenario,arm,metric,estimate,mc_se\n");
    for s in &report.scenarios {
        for a in &s.per_arm {
            for (metric, est) in [
                ("power", a.power),
                ("early_futility", a.early_futility),
                ("early_toxicity", a.early_toxicity),
                ("not_rejected_at_followup", a.not_rejected_at_followup),
                ("not_tested", a.not_tested),
                ("avg_enrolled", a.avg_enrolled),
            ] {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.label, a.arm, metric, est.value, est.mc_se
                ));
            }
        }
        out.push_str(&format!(
            "{},,avg_duration,{},{}\n",
            s.label, s.avg_duration.value, s.avg_duration.mc_se
        ));
        out.push_str(&format!(
            "{},,avg_total_enrolled,{},{}\n",
            s.label, s.avg_total_enrolled.value, s.avg_total_enrolled.mc_se
        ));
    }
    out
}

/// One evaluated point of a sample-size search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub m_max: u32,
    pub power: Estimate,
    pub scale_ni: f64,
    pub avg_duration: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeSearch {
    pub target_power: f64,
    pub curve: Vec<PowerPoint>,
    /// Smallest grid point reaching the target, if any.
    pub recommended: Option<u32>,
}

impl SampleSizeSearch {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m_max,power,power_se,scale_ni,avg_duration\n");
        for p in &self.curve {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.m_max, p.power.value, p.power.mc_se, p.scale_ni, p.avg_duration.value
            ));
        }
        out
    }
}

/// Search an ascending grid of per-arm caps for the smallest one meeting the
/// target power for the scenario's first arm. Every grid point is fully
/// recalibrated (the boundaries depend on the cap).
#[allow(clippy::too_many_arguments)]
pub fn sample_size_search(
    template: &DesignConfig,
    scenario: &TrialScenario,
    target_power: f64,
    grid: &[u32],
    cal_sims: u32,
    oc_sims: u32,
    master_seed: u64,
    workers: usize,
) -> Result<SampleSizeSearch> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "sample-size grid must be nonempty and ascending".into(),
        ));
    }
    let mut curve = Vec::with_capacity(grid.len());
    for (idx, &m_max) in grid.iter().enumerate() {
        let mut cfg = template.clone();
        cfg.arms = 1;
        cfg.m_max = m_max;
        cfg.n_total = m_max;
        cfg.comparator = None;
        cfg.validate()?;
        let cal_seed = derive_seed(master_seed, &[10, idx as u64]);
        let calibration = crate::calibration::calibrate(&cfg, cal_sims, cal_seed, workers, false)?;
        let resolved = ResolvedDesign::from_calibrated(cfg.clone(), calibration.scales())?;
        let single = ScenarioSet {
            scenarios: vec![TrialScenario {
                label: scenario.label.clone(),
                arms: vec![scenario.arms[0].clone()],
            }],
        };
        let sim_seed = derive_seed(master_seed, &[20, idx as u64]);
        let report = simulate_oc(&resolved, None, &single, oc_sims, sim_seed, workers)?;
        let sc = &report.scenarios[0];
        curve.push(PowerPoint {
            m_max,
            power: sc.per_arm[0].power,
            scale_ni: calibration.ni.scale,
            avg_duration: sc.avg_duration,
        });
    }
    let recommended = curve
        .iter()
        .find(|p| p.power.value >= target_power)
        .map(|p| p.m_max);
    Ok(SampleSizeSearch {
        target_power,
        curve,
        recommended,
    })
}
