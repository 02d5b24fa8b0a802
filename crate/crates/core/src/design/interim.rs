use crate::betastacy::{joint_monotone_sample, prob_from_draws, OrderDirection, RmstEvent};
use crate::design::config::ResolvedDesign;
use crate::design::state::{Decision, InterimAssessment};
use crate::rng::StreamKey;
use crate::survival::CensoredObservation;

/// Everything the interim decision depends on at one analysis clock. The
/// engine extracts these from its simulated ledger; the replay extracts them
/// from a patient data file. Both must agree field for field.
#[derive(Debug)]
pub struct InterimInputs<'a> {
    /// Active arm, 1-based.
    pub arm: u32,
    /// Enrollments to the active arm so far.
    pub n_arm: u32,
    /// Efficacy observations for the active arm, censored at the clock.
    pub efficacy: &'a [CensoredObservation],
    /// Toxicity observations for the active arm (empty in efficacy-only mode).
    pub toxicity: &'a [CensoredObservation],
    /// Snapshots for arms tested before the active one, used by the
    /// order-constrained posterior.
    pub earlier_arms_efficacy: &'a [Vec<CensoredObservation>],
    pub earlier_arms_toxicity: &'a [Vec<CensoredObservation>],
    /// No further enrollment is possible (per-arm cap or total budget).
    pub enrollment_complete: bool,
    /// Months since the last enrollment to the active arm.
    pub months_since_last_enroll: f64,
}

/// Probe mode records posterior probabilities wherever a boundary ratio is
/// positive and never stops; decide mode applies the stopping rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssessMode {
    Decide,
    Probe,
}

/// Evaluate one interim analysis for the active arm.
///
/// Randomness comes from per-purpose children of `ia_key` (child 0 efficacy,
/// child 1 toxicity), so the draw streams are independent of which other
/// quantities are evaluated at this look.
pub fn bayesian_interim(
    design: &ResolvedDesign,
    inputs: &InterimInputs,
    mode: AssessMode,
    ia_key: StreamKey,
) -> InterimAssessment {
    let cfg = &design.config;
    let coprimary = cfg.is_coprimary();
    let n = inputs.n_arm;
    let r = cfg.posterior_draws as usize;
    let horizon = cfg.t_e;

    let boundary_ni = if n >= 1 { design.b_ni.value(n) } else { 1.0 };
    let boundary_inf = if n >= 1 { design.b_i.value(n) } else { 1.0 };
    let boundary_tox = design.b_t.map(|b| if n >= 1 { b.value(n) } else { 1.0 });
    let boundary_cap = design.b_t_cap.map(|b| if n >= 1 { b.value(n) } else { 1.0 });

    // Evaluability: a rule is worth computing where its ratio term is positive
    // (boundary below one). The non-strict co-primary rule is additionally
    // evaluated from its activation count on. A rule whose scale is zero is
    // skipped, except in probe mode when a calibration target exists for it:
    // probes run before the scale is known.
    let probing = mode == AssessMode::Probe;
    let eval_ni = n >= 1
        && (design.b_ni.ratio_power(n) > 0.0 || (coprimary && n >= cfg.m_ni));
    let eval_inf = n >= 1
        && design.b_i.ratio_power(n) > 0.0
        && (design.b_i.scale > 0.0 || (probing && cfg.p_i > 0.0));
    let eval_tox = coprimary
        && n >= 1
        && design
            .b_t
            .map(|b| {
                b.ratio_power(n) > 0.0
                    && (b.scale > 0.0 || (probing && cfg.p_t.unwrap_or(0.0) > 0.0))
            })
            .unwrap_or(false);

    let need_theta = eval_ni || eval_inf;
    let need_beta = coprimary && (eval_ni || eval_tox || eval_inf);

    let mut degraded = false;
    let theta_draws = if need_theta {
        Some(sample_arm_draws(
            design,
            inputs,
            Endpoint::Efficacy,
            r,
            horizon,
            ia_key.child(0),
            &mut degraded,
        ))
    } else {
        None
    };
    let beta_draws = if need_beta {
        Some(sample_arm_draws(
            design,
            inputs,
            Endpoint::Toxicity,
            r,
            horizon,
            ia_key.child(1),
            &mut degraded,
        ))
    } else {
        None
    };

    // Probabilities behind the three rules, all from the same draw sets.
    let p_toxicity = beta_draws.as_ref().map(|draws| {
        let threshold = cfg.beta0.expect("validated") + cfg.delta_beta.unwrap_or(0.0);
        prob_from_draws(draws, RmstEvent::AtMost(threshold))
    });

    // Futility margin in force: lenient while toxicity-reduction evidence is
    // strong, tight once the margin-switch boundary is crossed.
    let margin = if coprimary {
        match (p_toxicity, boundary_cap) {
            (Some(p_tox), Some(cap)) if p_tox > cap => {
                cfg.delta_lenient.unwrap_or(cfg.delta)
            }
            _ => cfg.delta,
        }
    } else {
        cfg.futility_margin()
    };

    let p_ni = theta_draws.as_ref().filter(|_| eval_ni).map(|theta| {
        if coprimary {
            let beta = beta_draws.as_ref().expect("beta sampled when NI needs it");
            let beta0 = cfg.beta0.expect("validated");
            let hits = theta
                .iter()
                .zip(beta)
                .filter(|&(&t, &b)| t > cfg.theta0 - cfg.delta && b > beta0)
                .count();
            hits as f64 / theta.len() as f64
        } else {
            prob_from_draws(theta, RmstEvent::GreaterThan(cfg.theta0 - cfg.delta))
        }
    });

    let p_inferior = theta_draws
        .as_ref()
        .filter(|_| eval_inf)
        .map(|theta| prob_from_draws(theta, RmstEvent::AtMost(cfg.theta0 - margin)));

    let decision = if mode == AssessMode::Probe {
        Decision::Continue
    } else {
        decide(
            design,
            inputs,
            p_ni,
            p_inferior,
            p_toxicity.filter(|_| eval_tox),
            boundary_ni,
            boundary_inf,
            boundary_tox,
            coprimary,
        )
    };

    InterimAssessment {
        decision,
        p_ni,
        p_inferior,
        p_toxicity,
        margin,
        boundary_ni,
        boundary_inferior: boundary_inf,
        boundary_toxicity: boundary_tox,
        boundary_margin_switch: boundary_cap,
        constrained_sampling_degraded: degraded,
    }
}

/// Stopping rules in precedence order: non-inferiority first, then toxicity,
/// then inferiority, then the pause / follow-up close-out bookkeeping.
#[allow(clippy::too_many_arguments)]
fn decide(
    design: &ResolvedDesign,
    inputs: &InterimInputs,
    p_ni: Option<f64>,
    p_inferior: Option<f64>,
    p_toxicity: Option<f64>,
    boundary_ni: f64,
    boundary_inf: f64,
    boundary_tox: Option<f64>,
    coprimary: bool,
) -> Decision {
    if let Some(p) = p_ni {
        // the single-endpoint rule is strict, the co-primary rule is not
        let fired = if coprimary {
            p >= boundary_ni
        } else {
            p > boundary_ni
        };
        if fired {
            return Decision::DeclareNonInferior;
        }
    }
    if let (Some(p), Some(b)) = (p_toxicity, boundary_tox) {
        if p > b {
            return Decision::StopToxicity;
        }
    }
    if let Some(p) = p_inferior {
        if p > boundary_inf {
            return Decision::StopInferior;
        }
    }
    if inputs.enrollment_complete {
        if inputs.months_since_last_enroll >= design.config.t_fu {
            return Decision::CloseNotRejected;
        }
        return Decision::Pause;
    }
    Decision::Continue
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Endpoint {
    Efficacy,
    Toxicity,
}

/// Posterior RMST draws for the active arm, honoring the across-arm order
/// constraint when configured. On a starved rejection sampler the assessment
/// falls back to the unconstrained posterior and flags the degradation.
fn sample_arm_draws(
    design: &ResolvedDesign,
    inputs: &InterimInputs,
    endpoint: Endpoint,
    r: usize,
    horizon: f64,
    key: StreamKey,
    degraded: &mut bool,
) -> Vec<f64> {
    let cfg = &design.config;
    let mut rng = key.rng();
    let (prior, own_sample, earlier, constrained, direction) = match endpoint {
        Endpoint::Efficacy => (
            &design.prior_efficacy,
            inputs.efficacy,
            inputs.earlier_arms_efficacy,
            cfg.monotone_efficacy,
            OrderDirection::NonIncreasing,
        ),
        Endpoint::Toxicity => (
            design.prior_toxicity.as_ref().expect("validated"),
            inputs.toxicity,
            inputs.earlier_arms_toxicity,
            cfg.monotone_toxicity,
            OrderDirection::NonDecreasing,
        ),
    };
    let own = prior.update(own_sample).expect("observations validated");
    if constrained && !earlier.is_empty() {
        let mut models = Vec::with_capacity(earlier.len() + 1);
        for sample in earlier {
            models.push(prior.update(sample).expect("observations validated"));
        }
        models.push(own.clone());
        match joint_monotone_sample(
            &models,
            direction,
            r,
            horizon,
            cfg.proposal_budget_factor as usize,
            &mut rng,
        ) {
            Ok(joint) => {
                let k = models.len() - 1;
                return joint.summaries.iter().map(|tuple| tuple[k]).collect();
            }
            Err(_) => {
                *degraded = true;
                // fall through to the unconstrained posterior on the same stream
            }
        }
    }
    own.sample_rmsts(r, horizon, &mut rng)
}
