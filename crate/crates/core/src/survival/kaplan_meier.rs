use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::sample_sd;

/// One right-censored observation: the time in months and whether the event
/// was observed (`event = false` means censored).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredObservation {
    pub time: f64,
    pub event: bool,
}

impl CensoredObservation {
    pub fn event(time: f64) -> Self {
        CensoredObservation { time, event: true }
    }

    pub fn censored(time: f64) -> Self {
        CensoredObservation { time, event: false }
    }
}

/// Product-limit estimate: survival evaluated at each distinct event time.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierFit {
    /// Distinct event times, ascending.
    pub event_times: Vec<f64>,
    /// Survival estimate just after each event time.
    pub survival: Vec<f64>,
    /// Number at risk at each event time (censored ties included).
    pub at_risk: Vec<u32>,
    /// Number of events at each event time.
    pub events: Vec<u32>,
    n: usize,
}

impl KaplanMeierFit {
    /// Step-function lookup; survival is 1 before the first event time.
    pub fn survival_at(&self, t: f64) -> f64 {
        let idx = self.event_times.partition_point(|&et| et <= t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }
}

/// Sort key used everywhere ties occur: events precede censorings at equal
/// times, so a tied censored subject stays in the risk set for that event.
fn sort_censored(sample: &mut [CensoredObservation]) {
    sample.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .expect("NaN observation time")
            .then_with(|| b.event.cmp(&a.event))
    });
}

/// Product-limit (Kaplan-Meier) estimator.
pub fn kaplan_meier(sample: &[CensoredObservation]) -> Result<KaplanMeierFit> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    for obs in sample {
        if !(obs.time >= 0.0) {
            return Err(Error::NegativeObservationTime(obs.time));
        }
    }
    let mut sorted = sample.to_vec();
    sort_censored(&mut sorted);

    let n = sorted.len();
    let mut event_times = Vec::new();
    let mut survival = Vec::new();
    let mut at_risk = Vec::new();
    let mut events = Vec::new();

    let mut s = 1.0;
    let mut i = 0;
    while i < n {
        let t = sorted[i].time;
        let risk = (n - i) as u32;
        let mut d = 0u32;
        let mut j = i;
        while j < n && sorted[j].time == t {
            if sorted[j].event {
                d += 1;
            }
            j += 1;
        }
        if d > 0 {
            s *= 1.0 - d as f64 / risk as f64;
            event_times.push(t);
            survival.push(s);
            at_risk.push(risk);
            events.push(d);
        }
        i = j;
    }

    Ok(KaplanMeierFit {
        event_times,
        survival,
        at_risk,
        events,
        n,
    })
}

/// Area under the Kaplan-Meier step function on [0, horizon], extending the
/// curve flat beyond the last observation.
pub fn km_rmst(fit: &KaplanMeierFit, horizon: f64) -> f64 {
    assert!(horizon > 0.0, "rmst horizon must be positive");
    let mut area = 0.0;
    let mut prev_t = 0.0;
    let mut prev_s = 1.0;
    for (&t, &s) in fit.event_times.iter().zip(&fit.survival) {
        if t >= horizon {
            break;
        }
        area += prev_s * (t - prev_t);
        prev_t = t;
        prev_s = s;
    }
    area + prev_s * (horizon - prev_t)
}

/// RMST of one bootstrap resample described by per-position counts over the
/// pre-sorted sample. A single pass telescopes tied events correctly.
fn rmst_from_counts(sorted: &[CensoredObservation], counts: &[u32], horizon: f64) -> f64 {
    let mut remaining: u32 = counts.iter().sum();
    let mut s = 1.0;
    let mut area = 0.0;
    let mut prev_t = 0.0;
    for (obs, &c) in sorted.iter().zip(counts) {
        if c == 0 {
            continue;
        }
        if obs.time >= horizon {
            break;
        }
        if obs.time > prev_t {
            area += s * (obs.time - prev_t);
            prev_t = obs.time;
        }
        if obs.event {
            s *= 1.0 - c as f64 / remaining as f64;
        }
        remaining -= c;
    }
    area + s * (horizon - prev_t)
}

/// Bootstrap standard error of the Kaplan-Meier RMST: the standard deviation
/// of `km_rmst` over `b` nonparametric resamples drawn with replacement.
pub fn bootstrap_rmst_se(
    sample: &[CensoredObservation],
    horizon: f64,
    b: u32,
    rng: &mut ChaCha12Rng,
) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "bootstrap needs at least 2 observations, got {}",
            sample.len()
        )));
    }
    if b < 2 {
        return Err(Error::OutOfRange(format!(
            "bootstrap needs at least 2 resamples, got {b}"
        )));
    }
    if !sample.iter().any(|o| o.event) {
        return Err(Error::DegenerateSample("no events in sample".into()));
    }
    let mut sorted = sample.to_vec();
    sort_censored(&mut sorted);
    let n = sorted.len();
    let mut counts = vec![0u32; n];
    let mut estimates = Vec::with_capacity(b as usize);
    for _ in 0..b {
        counts.fill(0);
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        estimates.push(rmst_from_counts(&sorted, &counts, horizon));
    }
    Ok(sample_sd(&estimates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::survival::ScenarioDistribution;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_product_limit() {
        let sample = vec![
            CensoredObservation::event(2.0),
            CensoredObservation::censored(3.0),
            CensoredObservation::event(4.0),
        ];
        let fit = kaplan_meier(&sample).unwrap();
        assert_eq!(fit.event_times, vec![2.0, 4.0]);
        assert!((fit.survival[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((fit.survival[1] - 0.0).abs() < 1e-15);
        assert_eq!(fit.at_risk, vec![3, 1]);
        assert_eq!(fit.events, vec![1, 1]);

        // hand integral: 2*1 + 2*(2/3) + 20*0 = 10/3
        assert!((km_rmst(&fit, 24.0) - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_censoring_equals_empirical_survival() {
        let times = [5.0, 1.0, 3.0, 3.0, 8.0];
        let sample: Vec<_> = times.iter().map(|&t| CensoredObservation::event(t)).collect();
        let fit = kaplan_meier(&sample).unwrap();
        for &t in &[0.5, 1.0, 2.0, 3.0, 4.0, 7.9, 8.0, 10.0] {
            let empirical = times.iter().filter(|&&x| x > t).count() as f64 / times.len() as f64;
            assert!(
                (fit.survival_at(t) - empirical).abs() < 1e-15,
                "mismatch at t={t}"
            );
        }
    }

    #[test]
    fn all_censored_keeps_survival_at_one() {
        let sample: Vec<_> = [2.0, 5.0, 9.0]
            .iter()
            .map(|&t| CensoredObservation::censored(t))
            .collect();
        let fit = kaplan_meier(&sample).unwrap();
        assert!(fit.event_times.is_empty());
        assert_eq!(fit.survival_at(100.0), 1.0);
        assert_eq!(km_rmst(&fit, 24.0), 24.0);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(matches!(kaplan_meier(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn single_event_rmst() {
        let fit = kaplan_meier(&[CensoredObservation::event(10.0)]).unwrap();
        assert!((km_rmst(&fit, 24.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn tied_censoring_stays_at_risk_for_the_event() {
        let sample = vec![
            CensoredObservation::event(4.0),
            CensoredObservation::censored(4.0),
            CensoredObservation::event(6.0),
        ];
        let fit = kaplan_meier(&sample).unwrap();
        // at t=4 risk set is all 3; at t=6 only the last subject remains
        assert_eq!(fit.at_risk, vec![3, 1]);
        assert!((fit.survival[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_se_zero_for_identical_observations() {
        let sample = vec![CensoredObservation::event(5.0); 6];
        let mut rng = stream(1, &[]);
        let se = bootstrap_rmst_se(&sample, 24.0, 100, &mut rng).unwrap();
        assert_eq!(se, 0.0);
    }

    #[test]
    fn bootstrap_se_is_reproducible() {
        let dist = ScenarioDistribution::exponential(1.0 / 20.0).unwrap();
        let mut gen = stream(9, &[0]);
        let sample: Vec<_> = (0..40)
            .map(|_| CensoredObservation::event(dist.sample_event_time(&mut gen)))
            .collect();
        let a = bootstrap_rmst_se(&sample, 24.0, 200, &mut stream(5, &[1])).unwrap();
        let b = bootstrap_rmst_se(&sample, 24.0, 200, &mut stream(5, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bootstrap_se_near_analytic_oracle_for_uncensored_exponential() {
        // With no censoring the KM RMST is the mean of min(Y, horizon), so its
        // sampling variance is Var(min(Y, horizon)) / n, available in closed
        // form for the exponential law.
        let mean = 20.0;
        let horizon = 24.0;
        let n = 200;
        let dist = ScenarioDistribution::exponential(1.0 / mean).unwrap();
        let mut gen = stream(11, &[3]);
        let sample: Vec<_> = (0..n)
            .map(|_| CensoredObservation::event(dist.sample_event_time(&mut gen)))
            .collect();
        let e1 = mean * (1.0 - (-horizon / mean).exp());
        let e2 = 2.0 * (mean * mean * (1.0 - (-horizon / mean).exp())
            - mean * horizon * (-horizon / mean).exp());
        let analytic_se = ((e2 - e1 * e1) / n as f64).sqrt();
        let se = bootstrap_rmst_se(&sample, horizon, 500, &mut stream(11, &[4])).unwrap();
        assert!(
            (se - analytic_se).abs() / analytic_se < 0.3,
            "bootstrap SE {se} vs analytic {analytic_se}"
        );
    }

    #[test]
    fn no_events_is_degenerate_for_bootstrap() {
        let sample = vec![CensoredObservation::censored(2.0); 5];
        let mut rng = stream(0, &[]);
        assert!(matches!(
            bootstrap_rmst_se(&sample, 24.0, 10, &mut rng),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn km_fit_tracks_sampling_distribution() {
        // Dvoretzky-Kiefer-Wolfowitz-style check: the KM fit of many
        // uncensored draws stays uniformly close to the generating survival.
        let dist = ScenarioDistribution::exponential(1.0 / 20.0).unwrap();
        let mut rng = stream(17, &[0]);
        let sample: Vec<_> = (0..10_000)
            .map(|_| CensoredObservation::event(dist.sample_event_time(&mut rng)))
            .collect();
        let fit = kaplan_meier(&sample).unwrap();
        let sup = fit
            .event_times
            .iter()
            .zip(&fit.survival)
            .map(|(&t, &s)| (s - dist.survival(t)).abs())
            .fold(0.0_f64, f64::max);
        assert!(sup <= 0.05, "sup distance {sup} exceeds 0.05");
    }

    proptest! {
        #[test]
        fn survival_is_monotone_and_product_limit_holds(
            times in proptest::collection::vec(0.0_f64..50.0, 1..60),
            flags in proptest::collection::vec(proptest::bool::ANY, 60),
        ) {
            let sample: Vec<_> = times
                .iter()
                .zip(&flags)
                .map(|(&t, &e)| CensoredObservation { time: t, event: e })
                .collect();
            let fit = kaplan_meier(&sample).unwrap();
            let mut prev = 1.0;
            let mut product = 1.0;
            for i in 0..fit.event_times.len() {
                prop_assert!(fit.survival[i] <= prev + 1e-12);
                prop_assert!((0.0..=1.0).contains(&fit.survival[i]));
                product *= 1.0 - fit.events[i] as f64 / fit.at_risk[i] as f64;
                prop_assert!((fit.survival[i] - product).abs() < 1e-12);
                prev = fit.survival[i];
            }
            // rmst bounded by horizon
            prop_assert!(km_rmst(&fit, 24.0) <= 24.0 + 1e-12);
        }
    }
}
