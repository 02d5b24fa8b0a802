//! Frequentist comparator designs: repeated confidence intervals for the
//! Kaplan-Meier RMST with alpha-spending over the enrollment fraction, plus
//! the three futility rules used alongside them.

use serde::{Deserialize, Serialize};

use crate::design::{
    run_with_policy, DecisionPolicy, DesignConfig, InterimAssessment, InterimInputs, ResolvedDesign,
    TrialLog, TrialRecord, TrialScenario, TrialStreams,
};
use crate::design::Decision;
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::stats::{normal_cdf, normal_quantile};
use crate::survival::{bootstrap_rmst_se, kaplan_meier, km_rmst};

/// Alpha-spending schedule over the information fraction in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpendingKind {
    #[serde(rename = "obrien_fleming")]
    OBrienFleming,
    Pocock,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpendingFunction {
    pub kind: SpendingKind,
    /// Total one-sided alpha spent at information fraction 1.
    pub alpha: f64,
}

/// Cumulative spend at information fraction `s` in (0, 1].
pub fn cumulative_spend(sf: SpendingFunction, s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::OutOfRange(format!(
            "information fraction must be in (0, 1], got {s}"
        )));
    }
    let alpha = sf.alpha;
    Ok(match sf.kind {
        SpendingKind::OBrienFleming => {
            if alpha <= 0.0 {
                0.0
            } else {
                // z_{1 - a/2} computed through the lower tail, which stays
                // well-conditioned for tiny alpha
                let z = -normal_quantile(alpha / 2.0);
                2.0 * crate::stats::normal_sf(z / s.sqrt())
            }
        }
        SpendingKind::Pocock => alpha * (1.0 + (std::f64::consts::E - 1.0) * s).ln(),
        SpendingKind::Linear => alpha * s,
    })
}

/// Futility rule attached to a comparator design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FutilityRule {
    None,
    /// Stop when the one-sided p-value for theta >= theta0 drops to the cut.
    PValue { threshold: f64 },
    /// Stop when the repeated upper confidence bound excludes theta0.
    Rci { total_alpha: f64 },
}

impl FutilityRule {
    /// Preset F1: p-value cut 0.0025.
    pub fn f1() -> Self {
        FutilityRule::PValue { threshold: 0.0025 }
    }
    /// Preset F2: p-value cut 0.05.
    pub fn f2() -> Self {
        FutilityRule::PValue { threshold: 0.05 }
    }
    /// Preset F3: repeated upper bound with total spend 0.025.
    pub fn f3() -> Self {
        FutilityRule::Rci { total_alpha: 0.025 }
    }
}

fn default_m_min() -> u32 {
    50
}

/// Repeated-confidence-interval comparator configuration. Margins, horizon
/// and total alpha come from the enclosing design document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RciDesignConfig {
    pub ni_spending: SpendingKind,
    pub futility: FutilityRule,
    /// First interim analysis requires this many enrollments.
    #[serde(default = "default_m_min")]
    pub m_min: u32,
    /// Minimum observed support (months) before the restricted mean is
    /// tested; the flat tail extension covers the remainder of the horizon.
    /// Defaults to the full horizon, which forbids extrapolation entirely.
    #[serde(default)]
    pub coverage_months: Option<f64>,
}

impl RciDesignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_min < 2 {
            return Err(Error::InvalidConfig(format!(
                "comparator m_min must be >= 2, got {}",
                self.m_min
            )));
        }
        match self.futility {
            FutilityRule::PValue { threshold } => {
                if !(threshold > 0.0 && threshold < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "futility p-value threshold must be in (0, 1), got {threshold}"
                    )));
                }
            }
            FutilityRule::Rci { total_alpha } => {
                if !(total_alpha > 0.0 && total_alpha < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "futility spending total must be in (0, 1), got {total_alpha}"
                    )));
                }
            }
            FutilityRule::None => {}
        }
        Ok(())
    }
}

/// Diagnostics from one comparator interim analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RciInterim {
    pub decision: Decision,
    pub theta_hat: Option<f64>,
    pub se: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub p_value: Option<f64>,
    pub spend_increment: f64,
    pub futility_spend_increment: f64,
    /// Bootstrap SE collapsed to zero; the look was skipped.
    pub degenerate_se: bool,
    /// Observed support did not reach the RMST horizon; the look was skipped.
    /// Testing an extrapolated restricted mean has no variance to speak of
    /// and an enormous upward bias, so it waits for maturity instead.
    pub immature: bool,
}

/// Spend increments below this are treated as zero (the normal quantile is
/// unbounded there).
const SPEND_EPS: f64 = 1e-12;

/// One comparator look: Kaplan-Meier RMST, bootstrap SE, repeated one-sided
/// bounds. Futility is checked before non-inferiority.
#[allow(clippy::too_many_arguments)]
pub fn rci_interim(
    sample: &[crate::survival::CensoredObservation],
    cfg: &DesignConfig,
    comparator: &RciDesignConfig,
    spend_increment: f64,
    futility_spend_increment: f64,
    pause_state: Option<Decision>,
    bootstrap_b: u32,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> RciInterim {
    let mut out = RciInterim {
        decision: pause_state.unwrap_or(Decision::Continue),
        theta_hat: None,
        se: None,
        lower: None,
        upper: None,
        p_value: None,
        spend_increment,
        futility_spend_increment,
        degenerate_se: false,
        immature: false,
    };
    if sample.len() < comparator.m_min as usize || !sample.iter().any(|o| o.event) {
        return out;
    }
    let coverage = sample.iter().map(|o| o.time).fold(0.0_f64, f64::max);
    if coverage < comparator.coverage_months.unwrap_or(cfg.t_e) {
        out.immature = true;
        return out;
    }
    let fit = kaplan_meier(sample).expect("nonempty sample");
    let theta_hat = km_rmst(&fit, cfg.t_e);
    let se = bootstrap_rmst_se(sample, cfg.t_e, bootstrap_b, rng).expect("events present");
    out.theta_hat = Some(theta_hat);
    out.se = Some(se);
    if se == 0.0 {
        out.degenerate_se = true;
        return out;
    }

    // futility first
    match comparator.futility {
        FutilityRule::PValue { threshold } => {
            let p = normal_cdf((theta_hat - cfg.theta0) / se);
            out.p_value = Some(p);
            if p <= threshold {
                out.decision = Decision::StopInferior;
                return out;
            }
        }
        FutilityRule::Rci { .. } => {
            if futility_spend_increment > SPEND_EPS {
                let z = -normal_quantile(futility_spend_increment);
                let upper = theta_hat + z * se;
                out.upper = Some(upper);
                if upper < cfg.theta0 {
                    out.decision = Decision::StopInferior;
                    return out;
                }
            }
        }
        FutilityRule::None => {}
    }

    // non-inferiority via the repeated lower bound
    if spend_increment > SPEND_EPS {
        let z = -normal_quantile(spend_increment);
        let lower = theta_hat - z * se;
        out.lower = Some(lower);
        if lower > cfg.theta0 - cfg.delta {
            out.decision = Decision::DeclareNonInferior;
        }
    }
    out
}

/// Comparator decision policy: stateful cumulative spending per arm, the
/// shared pause / close-out handling, and `rci_interim` for the tests.
pub struct RciPolicy<'a> {
    pub cfg: &'a DesignConfig,
    pub comparator: RciDesignConfig,
    spent: f64,
    futility_spent: f64,
    pub diagnostics: Vec<RciInterim>,
}

impl<'a> RciPolicy<'a> {
    pub fn new(cfg: &'a DesignConfig, comparator: RciDesignConfig) -> Self {
        RciPolicy {
            cfg,
            comparator,
            spent: 0.0,
            futility_spent: 0.0,
            diagnostics: Vec::new(),
        }
    }
}

impl DecisionPolicy for RciPolicy<'_> {
    fn on_arm_start(&mut self, _arm: u32) {
        self.spent = 0.0;
        self.futility_spent = 0.0;
    }

    fn assess(&mut self, inputs: &InterimInputs, ia_key: StreamKey) -> InterimAssessment {
        let pause_state = if inputs.enrollment_complete {
            if inputs.months_since_last_enroll >= self.cfg.t_fu {
                Some(Decision::CloseNotRejected)
            } else {
                Some(Decision::Pause)
            }
        } else {
            None
        };
        let assessment_default = |decision: Decision| InterimAssessment {
            decision,
            p_ni: None,
            p_inferior: None,
            p_toxicity: None,
            margin: self.cfg.delta,
            boundary_ni: 1.0,
            boundary_inferior: 1.0,
            boundary_toxicity: None,
            boundary_margin_switch: None,
            constrained_sampling_degraded: false,
        };
        if inputs.n_arm < self.comparator.m_min {
            return assessment_default(pause_state.unwrap_or(Decision::Continue));
        }
        // information fraction = enrollment fraction
        let frac = (inputs.n_arm as f64 / self.cfg.m_max as f64).min(1.0);
        let ni_sf = SpendingFunction {
            kind: self.comparator.ni_spending,
            alpha: self.cfg.alpha,
        };
        let cum = cumulative_spend(ni_sf, frac).expect("fraction in range");
        let spend_increment = (cum - self.spent).max(0.0);
        let futility_increment = match self.comparator.futility {
            FutilityRule::Rci { total_alpha } => {
                let sf = SpendingFunction {
                    kind: SpendingKind::OBrienFleming,
                    alpha: total_alpha,
                };
                let cum_f = cumulative_spend(sf, frac).expect("fraction in range");
                (cum_f - self.futility_spent).max(0.0)
            }
            _ => 0.0,
        };

        let mut rng = ia_key.child(2).rng();
        let result = rci_interim(
            inputs.efficacy,
            self.cfg,
            &self.comparator,
            spend_increment,
            futility_increment,
            pause_state,
            self.cfg.bootstrap_b,
            &mut rng,
        );
        // spend only what the look actually consumed
        if result.theta_hat.is_some() && !result.degenerate_se {
            self.spent += spend_increment;
            self.futility_spent += futility_increment;
        }
        self.diagnostics.push(result);
        assessment_default(result.decision)
    }
}

/// Simulate one trial under a comparator design, sharing the engine's accrual
/// and censoring machinery.
pub fn run_comparator_trial(
    design: &ResolvedDesign,
    comparator: RciDesignConfig,
    scenario: &TrialScenario,
    streams: TrialStreams,
) -> TrialRecord {
    let mut policy = RciPolicy::new(&design.config, comparator);
    run_with_policy(&design.config, scenario, &mut policy, streams, false).0
}

/// Logged variant for diagnostics and the shared-plumbing checks.
pub fn run_comparator_trial_logged(
    design: &ResolvedDesign,
    comparator: RciDesignConfig,
    scenario: &TrialScenario,
    streams: TrialStreams,
) -> (TrialRecord, TrialLog) {
    let mut policy = RciPolicy::new(&design.config, comparator);
    let (record, log) = run_with_policy(&design.config, scenario, &mut policy, streams, true);
    (record, log.expect("log requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::test_support::small_efficacy_config;
    use crate::design::{ArmScenario, ScaleSet};
    use crate::rng::stream;
    use crate::survival::{exponential_with_rmst, CensoredObservation};

    #[test]
    fn total_spend_is_alpha_for_all_kinds() {
        for kind in [
            SpendingKind::OBrienFleming,
            SpendingKind::Pocock,
            SpendingKind::Linear,
        ] {
            let sf = SpendingFunction { kind, alpha: 0.1 };
            let total = cumulative_spend(sf, 1.0).unwrap();
            assert!(
                (total - 0.1).abs() < 1e-12,
                "{kind:?} spent {total} at s = 1"
            );
        }
    }

    #[test]
    fn linear_spend_is_proportional() {
        let sf = SpendingFunction {
            kind: SpendingKind::Linear,
            alpha: 0.1,
        };
        assert!((cumulative_spend(sf, 0.5).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn obrien_fleming_matches_the_normal_oracle() {
        // 2 * (1 - Phi(z_{0.05} / sqrt(0.5))) with z_{0.05} = 1.6448536269514722
        let sf = SpendingFunction {
            kind: SpendingKind::OBrienFleming,
            alpha: 0.1,
        };
        let z = 1.644_853_626_951_472_2_f64;
        let expect = 2.0 * (1.0 - normal_cdf(z / 0.5_f64.sqrt()));
        assert!((cumulative_spend(sf, 0.5).unwrap() - expect).abs() < 1e-14);
        assert!(cumulative_spend(sf, 1.1).is_err());
        assert!(cumulative_spend(sf, 0.0).is_err());
    }

    #[test]
    fn spend_increments_are_nonnegative_and_sum_to_alpha() {
        for kind in [
            SpendingKind::OBrienFleming,
            SpendingKind::Pocock,
            SpendingKind::Linear,
        ] {
            let sf = SpendingFunction { kind, alpha: 0.1 };
            let mut prev = 0.0;
            let mut total = 0.0;
            for i in 1..=40 {
                let s = i as f64 / 40.0;
                let cum = cumulative_spend(sf, s).unwrap();
                let inc = cum - prev;
                assert!(inc >= -1e-15, "{kind:?} negative increment at {s}");
                total += inc;
                prev = cum;
            }
            assert!((total - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn obrien_fleming_spends_least_early() {
        let alpha = 0.1;
        for i in 1..=89 {
            let s = 0.01 * i as f64; // the whole of (0, 0.9)
            let of = cumulative_spend(
                SpendingFunction {
                    kind: SpendingKind::OBrienFleming,
                    alpha,
                },
                s,
            )
            .unwrap();
            let pocock = cumulative_spend(
                SpendingFunction {
                    kind: SpendingKind::Pocock,
                    alpha,
                },
                s,
            )
            .unwrap();
            let linear = cumulative_spend(
                SpendingFunction {
                    kind: SpendingKind::Linear,
                    alpha,
                },
                s,
            )
            .unwrap();
            assert!(of < pocock, "OF >= Pocock at s = {s}");
            assert!(of < linear, "OF >= linear at s = {s}");
        }
    }

    fn uncensored(dist: &crate::survival::ScenarioDistribution, n: usize, seed: u64) -> Vec<CensoredObservation> {
        let mut rng = stream(seed, &[0]);
        (0..n)
            .map(|_| CensoredObservation::event(dist.sample_event_time(&mut rng)))
            .collect()
    }

    fn comparator_cfg(futility: FutilityRule) -> RciDesignConfig {
        RciDesignConfig {
            ni_spending: SpendingKind::OBrienFleming,
            futility,
            m_min: 50,
            coverage_months: None,
        }
    }

    #[test]
    fn strong_estimate_declares_ni() {
        let cfg = small_efficacy_config();
        // most events near the horizon: theta_hat about 22.3 with a small SE
        let mut sample: Vec<CensoredObservation> =
            (0..90).map(|_| CensoredObservation::event(23.0)).collect();
        sample.extend((0..5).map(|_| CensoredObservation::event(10.0)));
        sample.extend((0..5).map(|_| CensoredObservation::censored(26.0)));
        let r = rci_interim(
            &sample,
            &cfg,
            &comparator_cfg(FutilityRule::None),
            0.05,
            0.0,
            None,
            200,
            &mut stream(3, &[0]),
        );
        assert_eq!(r.decision, Decision::DeclareNonInferior);
        assert!(r.lower.unwrap() > cfg.theta0 - cfg.delta);
    }

    #[test]
    fn estimate_at_theta0_gives_half_p_value() {
        let cfg = small_efficacy_config();
        // a large sample generated at theta0 keeps the estimate near 22
        let dist = exponential_with_rmst(22.0, 24.0).unwrap();
        let sample = uncensored(&dist, 400, 5);
        let r = rci_interim(
            &sample,
            &cfg,
            &comparator_cfg(FutilityRule::f2()),
            0.01,
            0.0,
            None,
            300,
            &mut stream(5, &[1]),
        );
        // theta_hat fluctuates around 22, so p should be moderate, no stop
        assert_ne!(r.decision, Decision::StopInferior);
        let p = r.p_value.unwrap();
        assert!(p > 0.05 && p < 0.95, "p = {p}");
    }

    #[test]
    fn f2_stops_more_readily_than_f1() {
        let cfg = small_efficacy_config();
        let inferior = exponential_with_rmst(19.0, 24.0).unwrap();
        let mut f1_stops = 0;
        let mut f2_stops = 0;
        for seed in 0..40 {
            let sample = uncensored(&inferior, 120, 100 + seed);
            for (rule, stops) in [
                (FutilityRule::f1(), &mut f1_stops),
                (FutilityRule::f2(), &mut f2_stops),
            ] {
                let r = rci_interim(
                    &sample,
                    &cfg,
                    &comparator_cfg(rule),
                    0.001,
                    0.0,
                    None,
                    200,
                    &mut stream(7, &[seed]),
                );
                if r.decision == Decision::StopInferior {
                    *stops += 1;
                }
            }
        }
        assert!(
            f2_stops > f1_stops,
            "F2 stopped {f2_stops} vs F1 {f1_stops}"
        );
        assert!(f2_stops > 20, "inferior arm rarely stopped under F2");
    }

    #[test]
    fn repeated_upper_bound_futility_stops_inferior_arms() {
        let cfg = small_efficacy_config();
        let inferior = exponential_with_rmst(17.0, 24.0).unwrap();
        let sample = uncensored(&inferior, 200, 77);
        // generous futility spend: upper bound excludes theta0 = 22
        let r = rci_interim(
            &sample,
            &cfg,
            &comparator_cfg(FutilityRule::f3()),
            0.0,
            0.02,
            None,
            300,
            &mut stream(8, &[0]),
        );
        assert_eq!(r.decision, Decision::StopInferior);
        assert!(r.upper.unwrap() < cfg.theta0);
        // with no futility spend available the look cannot stop
        let r = rci_interim(
            &sample,
            &cfg,
            &comparator_cfg(FutilityRule::f3()),
            0.0,
            0.0,
            None,
            300,
            &mut stream(8, &[1]),
        );
        assert_eq!(r.decision, Decision::Continue);
    }

    #[test]
    fn degenerate_se_skips_the_look() {
        let cfg = small_efficacy_config();
        // every resample is identical: full survival through the horizon
        let sample: Vec<CensoredObservation> =
            (0..60).map(|_| CensoredObservation::event(30.0)).collect();
        let r = rci_interim(
            &sample,
            &cfg,
            &comparator_cfg(FutilityRule::f2()),
            0.05,
            0.0,
            None,
            100,
            &mut stream(9, &[0]),
        );
        assert!(r.degenerate_se);
        assert_eq!(r.decision, Decision::Continue);
    }

    #[test]
    fn immature_support_skips_the_look() {
        let cfg = small_efficacy_config();
        // events exist but no observation reaches the 24-month horizon, so
        // the restricted mean would be pure extrapolation
        let sample: Vec<CensoredObservation> = (0..60)
            .map(|i| {
                if i % 3 == 0 {
                    CensoredObservation::event(4.0)
                } else {
                    CensoredObservation::censored(6.0)
                }
            })
            .collect();
        let r = rci_interim(
            &sample,
            &cfg,
            &comparator_cfg(FutilityRule::f2()),
            0.05,
            0.0,
            None,
            100,
            &mut stream(9, &[1]),
        );
        assert!(r.immature);
        assert!(r.theta_hat.is_none());
        assert_eq!(r.decision, Decision::Continue);
    }

    #[test]
    fn lower_bound_is_monotone_in_estimate_and_se() {
        // algebraic: L = theta - z * se
        let z = normal_quantile(1.0 - 0.01);
        let l = |theta: f64, se: f64| theta - z * se;
        assert!(l(22.0, 1.0) > l(21.0, 1.0));
        assert!(l(22.0, 1.0) > l(22.0, 2.0));
    }

    #[test]
    fn shared_plumbing_matches_bayesian_run() {
        // with every threshold disabled both designs run to the follow-up
        // close-out with identical accrual and outcomes under the same stream
        let mut cfg = small_efficacy_config();
        cfg.alpha = 1e-18; // comparator spends nothing, never declares NI
        let design = ResolvedDesign::new(
            cfg.clone(),
            ScaleSet {
                ni: 0.0,
                inferiority: 0.0,
                toxicity: None,
                toxicity_cap: None,
            },
        )
        .unwrap();
        let scenario = crate::design::TrialScenario {
            label: "plumbing".into(),
            arms: vec![ArmScenario {
                efficacy: exponential_with_rmst(21.0, 24.0).unwrap(),
                toxicity: None,
                theta: None,
                beta: None,
            }],
        };
        let streams = || TrialStreams::derive(1234, 0, 7);
        let (bayes_record, bayes_log) =
            crate::design::run_trial_logged(&design, &scenario, streams());
        let (rci_record, rci_log) = run_comparator_trial_logged(
            &design,
            comparator_cfg(FutilityRule::None),
            &scenario,
            streams(),
        );
        assert_eq!(bayes_log.patients, rci_log.patients);
        assert_eq!(bayes_record.duration, rci_record.duration);
        assert_eq!(bayes_record.arms[0].verdict, rci_record.arms[0].verdict);
    }
}
