//! Nonparametric Bayesian survival model on a fixed time grid.
//!
//! The continuous-time process is realized through its canonical
//! finite-dimensional projection: independent Beta-distributed discrete
//! hazards per grid bin, conjugate to right-censored data bin by bin. With
//! prior mean CDF `V0` and weight function `c`, the bin-`m` hazard is
//!
//! ```text
//! h_m ~ Beta( c(t_m) * (V0(t_m) - V0(t_{m-1})) + d_m,
//!             c(t_m) * (1 - V0(t_m))           + r_m )
//! ```
//!
//! where `d_m` counts events in `(t_{m-1}, t_m]` and `r_m` counts subjects
//! still at risk after `t_m`. Survival paths are products of `1 - h_m`.

use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::survival::{CensoredObservation, ScenarioDistribution};

/// Regular grid 0, step, 2*step, ..., horizon (inclusive).
pub fn regular_grid(step: f64, horizon: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(horizon > step) {
        return Err(Error::InvalidGrid(format!(
            "need 0 < step < horizon, got step {step}, horizon {horizon}"
        )));
    }
    let bins = (horizon / step).round() as usize;
    if ((bins as f64) * step - horizon).abs() > 1e-9 {
        return Err(Error::InvalidGrid(format!(
            "horizon {horizon} is not a whole number of steps {step}"
        )));
    }
    Ok((0..=bins).map(|m| m as f64 * step).collect())
}

/// Prior/posterior state of the discrete-hazard survival model.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaStacyModel {
    /// Grid points t_0 = 0 < t_1 < ... < t_M.
    grid: Vec<f64>,
    /// Prior mean CDF V0 evaluated at t_1..t_M (V0(t_0) = 0).
    prior_cdf: Vec<f64>,
    /// Weight c evaluated at t_1..t_M.
    weight: Vec<f64>,
    /// Event counts d_m per bin.
    events: Vec<u32>,
    /// At-risk counts r_m after each bin end.
    at_risk_after: Vec<u32>,
    n_obs: u32,
}

/// Event about the RMST of a survival path at the model horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RmstEvent {
    AtMost(f64),
    GreaterThan(f64),
}

impl RmstEvent {
    pub fn holds(&self, rmst: f64) -> bool {
        match *self {
            RmstEvent::AtMost(x) => rmst <= x,
            RmstEvent::GreaterThan(x) => rmst > x,
        }
    }
}

/// Direction of the across-arm order constraint on summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderDirection {
    /// summary_1 >= summary_2 >= ... (efficacy under decreasing dose)
    NonIncreasing,
    /// summary_1 <= summary_2 <= ... (time-to-toxicity under decreasing dose)
    NonDecreasing,
}

impl OrderDirection {
    fn satisfied(&self, values: &[f64]) -> bool {
        match self {
            OrderDirection::NonIncreasing => values.windows(2).all(|w| w[0] >= w[1]),
            OrderDirection::NonDecreasing => values.windows(2).all(|w| w[0] <= w[1]),
        }
    }
}

/// Monte-Carlo draws from the posterior: survival paths on the grid together
/// with the derived RMST at the requested horizon.
#[derive(Debug, Clone)]
pub struct PosteriorDrawSet {
    pub grid: Vec<f64>,
    /// One survival path per draw, evaluated at t_1..t_M.
    pub paths: Vec<Vec<f64>>,
    pub rmst: Vec<f64>,
    pub horizon: f64,
}

/// Accepted joint draws from order-constrained posteriors.
#[derive(Debug, Clone)]
pub struct JointDrawSet {
    /// Per accepted draw, the K arm summaries in arm order.
    pub summaries: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub proposals: usize,
}

enum BinHazard {
    Zero,
    One,
    Random(Beta<f64>),
}

impl BetaStacyModel {
    /// Prior model centered at `center` with constant weight `c`.
    pub fn make_prior(grid: &[f64], center: &ScenarioDistribution, c: f64) -> Result<Self> {
        Self::make_prior_with_weight(grid, center, |_| c)
    }

    /// Prior model with weight evaluated at each grid point.
    pub fn make_prior_with_weight(
        grid: &[f64],
        center: &ScenarioDistribution,
        c: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if grid.len() < 2 || grid[0] != 0.0 {
            return Err(Error::InvalidGrid(
                "grid must start at 0 and contain at least one bin".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
        }
        center.validate()?;
        let bins = grid.len() - 1;
        let mut prior_cdf = Vec::with_capacity(bins);
        let mut weight = Vec::with_capacity(bins);
        for &t in &grid[1..] {
            prior_cdf.push(1.0 - center.survival(t));
            let w = c(t);
            if !(w > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "weight must be positive, got {w} at t = {t}"
                )));
            }
            weight.push(w);
        }
        Ok(BetaStacyModel {
            grid: grid.to_vec(),
            prior_cdf,
            weight,
            events: vec![0; bins],
            at_risk_after: vec![0; bins],
            n_obs: 0,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn bin_count(&self) -> usize {
        self.events.len()
    }

    pub fn observation_count(&self) -> u32 {
        self.n_obs
    }

    pub fn event_counts(&self) -> &[u32] {
        &self.events
    }

    pub fn at_risk_counts(&self) -> &[u32] {
        &self.at_risk_after
    }

    /// Beta parameters (a_m, b_m) of the bin-`m` hazard (m is 0-based here).
    pub fn bin_params(&self, m: usize) -> (f64, f64) {
        let v_prev = if m == 0 { 0.0 } else { self.prior_cdf[m - 1] };
        let a = self.weight[m] * (self.prior_cdf[m] - v_prev) + self.events[m] as f64;
        let b = self.weight[m] * (1.0 - self.prior_cdf[m]) + self.at_risk_after[m] as f64;
        (a, b)
    }

    /// Analytic mean of the bin-`m` discrete hazard.
    pub fn mean_hazard(&self, m: usize) -> f64 {
        let (a, b) = self.bin_params(m);
        if a <= 0.0 {
            0.0
        } else if b <= 0.0 {
            1.0
        } else {
            a / (a + b)
        }
    }

    /// Conjugate update: fold a censored sample into the sufficient statistics.
    /// Observation times past the grid end are clamped to a censoring at t_M.
    pub fn update(&self, sample: &[CensoredObservation]) -> Result<Self> {
        let mut out = self.clone();
        let t_max = *self.grid.last().expect("nonempty grid");
        let bins = out.events.len();
        // at-risk increments applied as a histogram of per-subject cutoffs,
        // then suffix-summed once
        let mut risk_hist = vec![0u32; bins + 1];
        for obs in sample {
            if !(obs.time >= 0.0) {
                return Err(Error::NegativeObservationTime(obs.time));
            }
            let (time, event) = if obs.time > t_max {
                (t_max, false)
            } else {
                (obs.time, obs.event)
            };
            // bin index (0-based): time in (grid[bin], grid[bin + 1]]
            let bin = if time <= 0.0 {
                0
            } else {
                self.grid.partition_point(|&t| t < time) - 1
            };
            if event {
                out.events[bin] += 1;
                // at risk through bins strictly before the event bin
                risk_hist[bin] += 1;
            } else {
                // censored: at risk through earlier bins, and also through its
                // own bin when it sits exactly on the bin's closing grid point
                let cutoff = if time > 0.0 && time == self.grid[bin + 1] {
                    bin + 1
                } else {
                    bin
                };
                risk_hist[cutoff] += 1;
            }
            out.n_obs += 1;
        }
        // r_m gains one for each subject whose cutoff covers bin m
        let mut acc = 0u32;
        for m in (0..bins).rev() {
            acc += risk_hist[m + 1];
            out.at_risk_after[m] += acc;
        }
        Ok(out)
    }

    fn bin_samplers(&self) -> Vec<BinHazard> {
        (0..self.bin_count())
            .map(|m| {
                let (a, b) = self.bin_params(m);
                if a <= 0.0 {
                    BinHazard::Zero
                } else if b <= 0.0 {
                    BinHazard::One
                } else {
                    BinHazard::Random(Beta::new(a, b).expect("positive Beta parameters"))
                }
            })
            .collect()
    }

    /// Draw `r` posterior survival paths and their RMSTs at `horizon`.
    pub fn sample_paths(&self, r: usize, horizon: f64, rng: &mut ChaCha12Rng) -> PosteriorDrawSet {
        assert!(r >= 1, "need at least one draw");
        let mut paths = vec![Vec::with_capacity(self.bin_count()); r];
        let rmst = self.sample_kernel(r, horizon, rng, Some(&mut paths));
        PosteriorDrawSet {
            grid: self.grid.clone(),
            paths,
            rmst,
            horizon,
        }
    }

    /// Draw `r` posterior RMSTs at `horizon` without materializing the paths.
    /// Bins past the horizon are not sampled.
    pub fn sample_rmsts(&self, r: usize, horizon: f64, rng: &mut ChaCha12Rng) -> Vec<f64> {
        self.sample_kernel(r, horizon, rng, None)
    }

    /// Bin-outer sampling kernel: one Beta distribution per bin drives all
    /// draws, survival accumulates as a running product and the RMST as a
    /// left-Riemann sum over the grid.
    fn sample_kernel(
        &self,
        r: usize,
        horizon: f64,
        rng: &mut ChaCha12Rng,
        mut record: Option<&mut Vec<Vec<f64>>>,
    ) -> Vec<f64> {
        assert!(horizon > 0.0, "horizon must be positive");
        let samplers = self.bin_samplers();
        let mut surv = vec![1.0_f64; r];
        let mut rmst = vec![0.0_f64; r];
        for (m, sampler) in samplers.iter().enumerate() {
            let t_lo = self.grid[m];
            let t_hi = self.grid[m + 1];
            if t_lo >= horizon && record.is_none() {
                break;
            }
            let dt = (t_hi.min(horizon) - t_lo).max(0.0);
            if dt > 0.0 {
                for d in 0..r {
                    rmst[d] += surv[d] * dt;
                }
            }
            match sampler {
                BinHazard::Zero => {}
                BinHazard::One => surv.fill(0.0),
                BinHazard::Random(beta) => {
                    for s in surv.iter_mut() {
                        *s *= 1.0 - sample_hazard(beta, rng);
                    }
                }
            }
            if let Some(paths) = record.as_mut() {
                for (d, s) in surv.iter().enumerate() {
                    paths[d].push(*s);
                }
            }
        }
        rmst
    }

    /// Monte-Carlo posterior probability of an RMST event.
    pub fn posterior_prob(
        &self,
        event: RmstEvent,
        r: usize,
        horizon: f64,
        rng: &mut ChaCha12Rng,
    ) -> f64 {
        assert!(r >= 1);
        let draws = self.sample_rmsts(r, horizon, rng);
        prob_from_draws(&draws, event)
    }
}

/// Fraction of draws satisfying the event; complementary events over the same
/// draw set sum to one exactly.
pub fn prob_from_draws(draws: &[f64], event: RmstEvent) -> f64 {
    let hits = draws.iter().filter(|&&v| event.holds(v)).count();
    hits as f64 / draws.len() as f64
}

/// Beta draw hardened against underflow at extreme parameters: a non-finite
/// draw falls back to the limiting atom at zero.
fn sample_hazard(beta: &Beta<f64>, rng: &mut ChaCha12Rng) -> f64 {
    let h = beta.sample(rng);
    if h.is_finite() {
        h.clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Rejection sampling from the product of independent posteriors, retaining
/// joint draws whose summaries satisfy the order constraint across arms.
///
/// Returns `r` accepted draws or an error once `budget_factor * r` proposals
/// have been spent.
pub fn joint_monotone_sample(
    models: &[BetaStacyModel],
    direction: OrderDirection,
    r: usize,
    horizon: f64,
    budget_factor: usize,
    rng: &mut ChaCha12Rng,
) -> Result<JointDrawSet> {
    assert!(models.len() >= 2, "joint sampling needs at least two arms");
    assert!(r >= 1);
    let budget = budget_factor.saturating_mul(r).max(r);
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut proposals = 0usize;
    while accepted.len() < r && proposals < budget {
        let batch = (r - accepted.len()).min(budget - proposals);
        // one rmst batch per model, zipped into joint proposals
        let columns: Vec<Vec<f64>> = models
            .iter()
            .map(|m| m.sample_rmsts(batch, horizon, rng))
            .collect();
        for d in 0..batch {
            let tuple: Vec<f64> = columns.iter().map(|col| col[d]).collect();
            if direction.satisfied(&tuple) {
                accepted.push(tuple);
                if accepted.len() == r {
                    // count only the proposals actually examined
                    proposals += d + 1;
                    return Ok(JointDrawSet {
                        acceptance_rate: r as f64 / proposals as f64,
                        summaries: accepted,
                        proposals,
                    });
                }
            }
        }
        proposals += batch;
    }
    Err(Error::AcceptanceRateTooLow {
        accepted: accepted.len(),
        requested: r,
        proposals,
    })
}

/// Render posterior draw summaries as `draw_id,arm,rmst` CSV.
pub fn draws_to_csv(rmst_per_arm: &[(u32, &[f64])]) -> String {
    let mut out = String::from("draw_id,arm,rmst\n");
    for &(arm, draws) in rmst_per_arm {
        for (i, v) in draws.iter().enumerate() {
            out.push_str(&format!("{i},{arm},{v}\n"));
        }
    }
    out
}
