use serde::{Deserialize, Serialize};

use crate::betastacy::{regular_grid, BetaStacyModel};
use crate::design::boundary::BoundarySpec;
use crate::error::{Error, Result};
use crate::survival::ScenarioDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointMode {
    EfficacyOnly,
    CoPrimary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccrualModel {
    /// Homogeneous Poisson arrivals at the configured mean rate.
    #[default]
    Poisson,
    /// Evenly spaced arrivals at 1/rate months.
    Deterministic,
}

fn default_interim_period() -> f64 {
    1.0
}
fn default_posterior_draws() -> u32 {
    1000
}
fn default_grid_step() -> f64 {
    0.25
}
fn default_grid_horizon() -> f64 {
    36.0
}
fn default_bootstrap() -> u32 {
    500
}
fn default_budget_factor() -> u32 {
    100
}

/// Complete specification of a de-intensification design.
///
/// Boundary scales may be given explicitly (`scale_*`) or left null to be
/// filled in by calibration; shapes, activations and targets are always part
/// of the design document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// Number of de-intensified arms K, tested in order.
    pub arms: u32,
    pub endpoint_mode: EndpointMode,
    /// Historical standard-of-care RMST for the efficacy endpoint (months).
    pub theta0: f64,
    /// Historical standard-of-care RMST for the time-to-toxicity endpoint.
    #[serde(default)]
    pub beta0: Option<f64>,
    /// Non-inferiority margin (months).
    pub delta: f64,
    /// Futility margin in efficacy-only mode; defaults to `delta`.
    #[serde(default)]
    pub delta_futility: Option<f64>,
    /// Tight futility margin used under weak toxicity-reduction evidence.
    #[serde(default)]
    pub delta_lenient: Option<f64>,
    /// Toxicity margin for the early-stopping rule.
    #[serde(default)]
    pub delta_beta: Option<f64>,
    /// RMST horizon (months).
    pub t_e: f64,
    /// Maximum follow-up after the last enrollment to the active arm.
    pub t_fu: f64,
    /// Mean accrual, patients per month.
    pub accrual_rate: f64,
    #[serde(default)]
    pub accrual: AccrualModel,
    /// Months between interim analyses.
    #[serde(default = "default_interim_period")]
    pub interim_period: f64,
    /// One-sided type I error target.
    pub alpha: f64,
    /// Total enrollment cap n across arms.
    pub n_total: u32,
    /// Per-arm enrollment cap.
    pub m_max: u32,
    /// Minimum enrollments before non-inferiority can be declared.
    pub m_ni: u32,
    /// Minimum enrollments before an inferiority stop.
    pub m_i: u32,
    /// Minimum enrollments before a toxicity stop (co-primary).
    #[serde(default)]
    pub m_t: Option<u32>,
    pub shape_ni: f64,
    pub shape_i: f64,
    #[serde(default)]
    pub shape_t: Option<f64>,
    /// Target proportion of inferior-arm trials stopped early; 0 disables the
    /// inferiority rule.
    pub p_i: f64,
    #[serde(default)]
    pub p_t: Option<f64>,
    /// Explicit boundary scales; normally supplied by a calibration file.
    #[serde(default)]
    pub scale_ni: Option<f64>,
    #[serde(default)]
    pub scale_i: Option<f64>,
    #[serde(default)]
    pub scale_t: Option<f64>,
    /// Scale of the margin-switch boundary; defaults to (1 + scale_t) / 2.
    #[serde(default)]
    pub scale_t_cap: Option<f64>,
    /// Posterior draws per interim probability.
    #[serde(default = "default_posterior_draws")]
    pub posterior_draws: u32,
    /// Proposal budget multiplier for order-constrained joint sampling.
    #[serde(default = "default_budget_factor")]
    pub proposal_budget_factor: u32,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_grid_horizon")]
    pub grid_horizon: f64,
    /// Prior center for every efficacy model.
    pub prior_efficacy_center: ScenarioDistribution,
    pub prior_efficacy_weight: f64,
    #[serde(default)]
    pub prior_toxicity_center: Option<ScenarioDistribution>,
    #[serde(default)]
    pub prior_toxicity_weight: Option<f64>,
    /// Order constraint on efficacy summaries across arms.
    #[serde(default)]
    pub monotone_efficacy: bool,
    /// Order constraint on toxicity summaries across arms.
    #[serde(default)]
    pub monotone_toxicity: bool,
    /// Historical SOC efficacy law; required to build calibration scenarios.
    #[serde(default)]
    pub soc_efficacy: Option<ScenarioDistribution>,
    #[serde(default)]
    pub soc_toxicity: Option<ScenarioDistribution>,
    /// Bootstrap resamples for comparator interim estimates.
    #[serde(default = "default_bootstrap")]
    pub bootstrap_b: u32,
    /// Frequentist comparator attached to this design, if any.
    #[serde(default)]
    pub comparator: Option<crate::comparator::RciDesignConfig>,
}

impl DesignConfig {
    pub fn is_coprimary(&self) -> bool {
        self.endpoint_mode == EndpointMode::CoPrimary
    }

    /// Futility margin for efficacy-only designs.
    pub fn futility_margin(&self) -> f64 {
        self.delta_futility.unwrap_or(self.delta)
    }

    /// Validate all structural invariants; returns every violation found.
    pub fn violations(&self) -> Vec<String> {
        fn push_if(v: &mut Vec<String>, ok: bool, msg: String) {
            if !ok {
                v.push(msg);
            }
        }
        let mut v = Vec::new();
        macro_rules! check {
            ($ok:expr, $msg:expr $(,)?) => {
                push_if(&mut v, $ok, $msg)
            };
        }
        check!(self.arms >= 1, "arms must be >= 1".into());
        check!(
            self.delta > 0.0 && self.delta.is_finite(),
            format!("delta must be > 0, got {}", self.delta),
        );
        let delta_k = self.futility_margin();
        check!(
            delta_k > 0.0 && self.delta >= delta_k,
            format!(
                "futility margin must satisfy 0 < delta_futility <= delta, got {} vs {}",
                delta_k, self.delta
            ),
        );
        check!(
            self.t_e > 0.0 && self.t_fu >= 0.0,
            "t_e must be > 0 and t_fu >= 0".into(),
        );
        check!(
            self.accrual_rate > 0.0,
            format!("accrual_rate must be > 0, got {}", self.accrual_rate),
        );
        check!(
            self.interim_period > 0.0,
            "interim_period must be > 0".into(),
        );
        check!(
            self.alpha > 0.0 && self.alpha <= 1.0,
            format!("alpha must be in (0, 1], got {}", self.alpha),
        );
        check!(
            self.m_max >= 1 && self.n_total >= self.m_max,
            format!(
                "need n_total >= m_max >= 1, got n_total {} m_max {}",
                self.n_total, self.m_max
            ),
        );
        check!(
            self.m_ni <= self.m_max,
            format!("m_ni {} exceeds m_max {}", self.m_ni, self.m_max),
        );
        check!(
            self.m_i <= self.m_max,
            format!("m_i {} exceeds m_max {}", self.m_i, self.m_max),
        );
        check!(
            self.shape_ni >= 0.0 && self.shape_i >= 0.0,
            "boundary shapes must be >= 0".into(),
        );
        check!(
            (0.0..1.0).contains(&self.p_i),
            format!("p_i must be in [0, 1), got {}", self.p_i),
        );
        check!(
            self.grid_step > 0.0 && self.grid_horizon >= self.t_e,
            format!(
                "grid must cover the RMST horizon: step {}, horizon {}, t_e {}",
                self.grid_step, self.grid_horizon, self.t_e
            ),
        );
        let steps = self.t_e / self.grid_step;
        check!(
            (steps - steps.round()).abs() < 1e-9,
            format!(
                "t_e {} must fall on the grid (step {})",
                self.t_e, self.grid_step
            ),
        );
        check!(
            self.posterior_draws >= 100,
            format!(
                "posterior_draws must be >= 100, got {}",
                self.posterior_draws
            ),
        );
        check!(
            self.prior_efficacy_weight > 0.0,
            "prior_efficacy_weight must be > 0".into(),
        );
        if let Err(e) = self.prior_efficacy_center.validate() {
            v.push(format!("prior_efficacy_center: {e}"));
        }
        if let Some(scale) = self.scale_ni {
            check!(
                (0.0..=1.0).contains(&scale),
                format!("scale_ni must be in [0, 1], got {scale}"),
            );
        }
        for (name, scale) in [("scale_i", self.scale_i), ("scale_t", self.scale_t)] {
            if let Some(s) = scale {
                check!(
                    (0.0..=1.0).contains(&s),
                    format!("{name} must be in [0, 1], got {s}"),
                );
            }
        }
        if self.is_coprimary() {
            check!(self.beta0.is_some(), "co-primary mode requires beta0".into());
            check!(
                self.m_t.is_some() && self.shape_t.is_some(),
                "co-primary mode requires m_t and shape_t".into(),
            );
            check!(
                self.prior_toxicity_center.is_some() && self.prior_toxicity_weight.is_some(),
                "co-primary mode requires a toxicity prior".into(),
            );
            if let Some(w) = self.prior_toxicity_weight {
                check!(w > 0.0, "prior_toxicity_weight must be > 0".into());
            }
            let delta_l = self.delta_lenient.unwrap_or(self.delta);
            check!(
                delta_l > 0.0 && self.delta >= delta_l,
                format!(
                    "the lenient margin rule needs 0 < delta_lenient <= delta, got {} vs {}",
                    delta_l, self.delta
                ),
            );
            check!(
                self.delta_beta.unwrap_or(0.0) >= 0.0,
                "delta_beta must be >= 0".into(),
            );
            if let Some(p_t) = self.p_t {
                check!(
                    (0.0..1.0).contains(&p_t),
                    format!("p_t must be in [0, 1), got {p_t}"),
                );
            }
            if let (Some(m_t), Some(shape_t)) = (self.m_t, self.shape_t) {
                check!(
                    m_t <= self.m_max,
                    format!("m_t {} exceeds m_max {}", m_t, self.m_max),
                );
                check!(shape_t >= 0.0, "shape_t must be >= 0".into());
            }
            // the margin-switch boundary must sit strictly below the toxicity
            // stopping boundary wherever either is active
            if let (Some(s_t), Some(s_cap)) = (self.scale_t, self.scale_t_cap) {
                if let (Some(m_t), Some(shape_t)) = (self.m_t, self.shape_t) {
                    if let (Ok(b_t), Ok(b_cap)) = (
                        BoundarySpec::new(s_t, shape_t, m_t, self.m_max),
                        BoundarySpec::new(s_cap, shape_t, m_t, self.m_max),
                    ) {
                        for l in 1..=self.m_max {
                            let (bt, bc) = (b_t.value(l), b_cap.value(l));
                            if bt < 1.0 || bc < 1.0 {
                                check!(
                                    bc < bt,
                                    format!(
                                        "margin-switch boundary must stay below the toxicity boundary, violated at l = {l}: {bc} >= {bt}"
                                    ),
                                );
                                break;
                            }
                        }
                        // scale comparison covers the rest of the active range
                        check!(
                            s_cap > s_t,
                            format!(
                                "margin-switch scale {s_cap} must exceed toxicity scale {s_t}"
                            ),
                        );
                    }
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(violations.join("; ")))
        }
    }

    /// FNV-1a digest of the canonical JSON form, used to pair calibration
    /// files with the design they were computed for.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in json.as_bytes() {
            hash ^= *byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: DesignConfig = serde_json::from_str(json)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Boundary scales resolved from a calibration file or explicit overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSet {
    pub ni: f64,
    pub inferiority: f64,
    pub toxicity: Option<f64>,
    pub toxicity_cap: Option<f64>,
}

/// A design with all boundaries concrete: what the engine executes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedDesign {
    pub config: DesignConfig,
    pub b_ni: BoundarySpec,
    pub b_i: BoundarySpec,
    pub b_t: Option<BoundarySpec>,
    pub b_t_cap: Option<BoundarySpec>,
    pub grid: Vec<f64>,
    pub prior_efficacy: BetaStacyModel,
    pub prior_toxicity: Option<BetaStacyModel>,
}

impl ResolvedDesign {
    /// Combine a validated config with boundary scales.
    pub fn new(config: DesignConfig, scales: ScaleSet) -> Result<Self> {
        config.validate()?;
        let b_ni = BoundarySpec::new(scales.ni, config.shape_ni, config.m_ni, config.m_max)?;
        let b_i = BoundarySpec::new(
            scales.inferiority,
            config.shape_i,
            config.m_i,
            config.m_max,
        )?;
        let (b_t, b_t_cap) = if config.is_coprimary() {
            let m_t = config.m_t.expect("validated");
            let shape_t = config.shape_t.expect("validated");
            let s_t = scales.toxicity.ok_or_else(|| {
                Error::MissingCalibration("co-primary design needs a toxicity scale".into())
            })?;
            let s_cap = scales.toxicity_cap.unwrap_or((1.0 + s_t) / 2.0);
            if s_cap <= s_t {
                return Err(Error::InvalidConfig(format!(
                    "margin-switch scale {s_cap} must exceed toxicity scale {s_t}"
                )));
            }
            (
                Some(BoundarySpec::new(s_t, shape_t, m_t, config.m_max)?),
                Some(BoundarySpec::new(s_cap, shape_t, m_t, config.m_max)?),
            )
        } else {
            (None, None)
        };
        let grid = regular_grid(config.grid_step, config.grid_horizon)?;
        let prior_efficacy = BetaStacyModel::make_prior(
            &grid,
            &config.prior_efficacy_center,
            config.prior_efficacy_weight,
        )?;
        let prior_toxicity = if config.is_coprimary() {
            Some(BetaStacyModel::make_prior(
                &grid,
                config.prior_toxicity_center.as_ref().expect("validated"),
                config.prior_toxicity_weight.expect("validated"),
            )?)
        } else {
            None
        };
        Ok(ResolvedDesign {
            config,
            b_ni,
            b_i,
            b_t,
            b_t_cap,
            grid,
            prior_efficacy,
            prior_toxicity,
        })
    }

    /// Resolve using explicit config scales where present, otherwise the
    /// provided calibrated values.
    pub fn from_calibrated(
        config: DesignConfig,
        calibrated: ScaleSet,
    ) -> Result<Self> {
        let scales = ScaleSet {
            ni: config.scale_ni.unwrap_or(calibrated.ni),
            inferiority: config.scale_i.unwrap_or(calibrated.inferiority),
            toxicity: config.scale_t.or(calibrated.toxicity),
            toxicity_cap: config.scale_t_cap.or(calibrated.toxicity_cap),
        };
        Self::new(config, scales)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::survival::exponential_with_rmst;

    /// Single-arm efficacy design: theta0 22, delta 2, m_max 100, prior
    /// centered at an exponential with RMST 20 and weight 10.
    pub fn small_efficacy_config() -> DesignConfig {
        DesignConfig {
            arms: 1,
            endpoint_mode: EndpointMode::EfficacyOnly,
            theta0: 22.0,
            beta0: None,
            delta: 2.0,
            delta_futility: None,
            delta_lenient: None,
            delta_beta: None,
            t_e: 24.0,
            t_fu: 12.0,
            accrual_rate: 5.0,
            accrual: AccrualModel::Poisson,
            interim_period: 1.0,
            alpha: 0.1,
            n_total: 100,
            m_max: 100,
            m_ni: 50,
            m_i: 0,
            m_t: None,
            shape_ni: 1.0,
            shape_i: 5.0,
            shape_t: None,
            p_i: 0.0,
            p_t: None,
            scale_ni: None,
            scale_i: None,
            scale_t: None,
            scale_t_cap: None,
            posterior_draws: 500,
            proposal_budget_factor: 100,
            grid_step: 0.25,
            grid_horizon: 36.0,
            prior_efficacy_center: exponential_with_rmst(20.0, 24.0).unwrap(),
            prior_efficacy_weight: 10.0,
            prior_toxicity_center: None,
            prior_toxicity_weight: None,
            monotone_efficacy: false,
            monotone_toxicity: false,
            soc_efficacy: Some(exponential_with_rmst(22.0, 24.0).unwrap()),
            soc_toxicity: None,
            bootstrap_b: 500,
            comparator: None,
        }
    }

    /// Two-arm co-primary design in the style of the toxicity experiments.
    pub fn small_coprimary_config() -> DesignConfig {
        let mut cfg = small_efficacy_config();
        cfg.arms = 2;
        cfg.endpoint_mode = EndpointMode::CoPrimary;
        cfg.theta0 = 21.97;
        cfg.beta0 = Some(12.49);
        cfg.delta = 2.0;
        cfg.delta_lenient = Some(1.0);
        cfg.delta_beta = Some(0.0);
        cfg.n_total = 500;
        cfg.m_max = 250;
        cfg.m_ni = 60;
        cfg.m_i = 60;
        cfg.m_t = Some(60);
        cfg.shape_ni = 6.0;
        cfg.shape_i = 5.0;
        cfg.shape_t = Some(5.0);
        cfg.p_i = 0.5;
        cfg.p_t = Some(0.5);
        cfg.prior_toxicity_center = Some(exponential_with_rmst(12.49, 24.0).unwrap());
        cfg.prior_toxicity_weight = Some(10.0);
        cfg.soc_efficacy = Some(exponential_with_rmst(21.97, 24.0).unwrap());
        cfg.soc_toxicity = Some(exponential_with_rmst(12.49, 24.0).unwrap());
        cfg
    }
}
