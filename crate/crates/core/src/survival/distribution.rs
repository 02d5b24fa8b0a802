use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a piecewise curve extends beyond its last knot.
///
/// Digitized curves end at their last published time point, but simulated
/// trials sample event times past that support, so some rule is required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// Exponential tail whose rate matches the average hazard of the final
    /// segment. Degenerates to flat when the final segment is flat.
    #[default]
    ExponentialHazard,
    /// Constant survival beyond the last knot.
    Flat,
}

/// A monotone transformation of a survival law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    /// S'(t) = S(t)^hazard_ratio
    ProportionalHazards { hazard_ratio: f64 },
    /// S'(t) = S(t / time_scale)
    AcceleratedFailureTime { time_scale: f64 },
    /// odds of S' = odds_ratio * odds of S, with odds(s) = s / (1 - s)
    ProportionalOdds { odds_ratio: f64 },
}

impl TransformKind {
    pub fn parameter(&self) -> f64 {
        match *self {
            TransformKind::ProportionalHazards { hazard_ratio } => hazard_ratio,
            TransformKind::AcceleratedFailureTime { time_scale } => time_scale,
            TransformKind::ProportionalOdds { odds_ratio } => odds_ratio,
        }
    }

    pub fn with_parameter(&self, value: f64) -> TransformKind {
        match self {
            TransformKind::ProportionalHazards { .. } => TransformKind::ProportionalHazards {
                hazard_ratio: value,
            },
            TransformKind::AcceleratedFailureTime { .. } => {
                TransformKind::AcceleratedFailureTime { time_scale: value }
            }
            TransformKind::ProportionalOdds { .. } => {
                TransformKind::ProportionalOdds { odds_ratio: value }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.parameter();
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "transform parameter must be strictly positive and finite, got {p}"
            )));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.parameter() == 1.0
    }

    /// Survival-scale forward map: s -> s'.
    fn apply_survival(&self, s: f64) -> f64 {
        match *self {
            TransformKind::ProportionalHazards { hazard_ratio } => s.powf(hazard_ratio),
            TransformKind::AcceleratedFailureTime { .. } => s,
            TransformKind::ProportionalOdds { odds_ratio } => {
                if s >= 1.0 {
                    1.0
                } else {
                    odds_ratio * s / (1.0 - s + odds_ratio * s)
                }
            }
        }
    }

    /// Survival-scale inverse map: s' -> s.
    fn invert_survival(&self, s_prime: f64) -> f64 {
        match *self {
            TransformKind::ProportionalHazards { hazard_ratio } => {
                s_prime.powf(1.0 / hazard_ratio)
            }
            TransformKind::AcceleratedFailureTime { .. } => s_prime,
            TransformKind::ProportionalOdds { odds_ratio } => {
                if s_prime >= 1.0 {
                    1.0
                } else {
                    s_prime / (odds_ratio * (1.0 - s_prime) + s_prime)
                }
            }
        }
    }
}

/// A samplable survival law used to generate trial scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioDistribution {
    /// Constant hazard; `rate` in events per month.
    Exponential { rate: f64 },
    /// Right-continuous step survival function through `knots`, each
    /// `(time_months, survival)`, first knot `(0, 1)`.
    Piecewise {
        knots: Vec<(f64, f64)>,
        #[serde(default)]
        tail: TailRule,
    },
    /// A transformed base law.
    Transformed {
        base: Box<ScenarioDistribution>,
        transform: TransformKind,
    },
}

impl ScenarioDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        let dist = ScenarioDistribution::Exponential { rate };
        dist.validate()?;
        Ok(dist)
    }

    pub fn piecewise(knots: Vec<(f64, f64)>, tail: TailRule) -> Result<Self> {
        let dist = ScenarioDistribution::Piecewise { knots, tail };
        dist.validate()?;
        Ok(dist)
    }

    /// A law with no events on any horizon (survival identically one).
    pub fn never_event() -> Self {
        ScenarioDistribution::Piecewise {
            knots: vec![(0.0, 1.0)],
            tail: TailRule::Flat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioDistribution::Exponential { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(Error::InvalidDistribution(format!(
                        "exponential rate must be strictly positive, got {rate}"
                    )));
                }
            }
            ScenarioDistribution::Piecewise { knots, .. } => {
                if knots.is_empty() {
                    return Err(Error::InvalidDistribution(
                        "piecewise curve needs at least one knot".into(),
                    ));
                }
                if knots[0] != (0.0, 1.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "first knot must be (0, 1), got ({}, {})",
                        knots[0].0, knots[0].1
                    )));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::InvalidDistribution(format!(
                            "knot times must be strictly increasing ({} then {})",
                            w[0].0, w[1].0
                        )));
                    }
                    if w[1].1 > w[0].1 {
                        return Err(Error::InvalidDistribution(format!(
                            "survival must be non-increasing ({} then {})",
                            w[0].1, w[1].1
                        )));
                    }
                }
                for &(t, s) in knots {
                    if !t.is_finite() || !s.is_finite() || !(0.0..=1.0).contains(&s) {
                        return Err(Error::InvalidDistribution(format!(
                            "knot ({t}, {s}) outside the valid range"
                        )));
                    }
                }
            }
            ScenarioDistribution::Transformed { base, transform } => {
                base.validate()?;
                transform.validate()?;
            }
        }
        Ok(())
    }

    /// Survival probability S(t).
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self {
            ScenarioDistribution::Exponential { rate } => (-rate * t).exp(),
            ScenarioDistribution::Piecewise { knots, tail } => {
                let last = knots.len() - 1;
                if t >= knots[last].0 {
                    let s_last = knots[last].1;
                    let rate = tail_rate(knots, *tail);
                    return if rate > 0.0 {
                        s_last * (-rate * (t - knots[last].0)).exp()
                    } else {
                        s_last
                    };
                }
                // last knot with time <= t
                let idx = knots.partition_point(|&(kt, _)| kt <= t) - 1;
                knots[idx].1
            }
            ScenarioDistribution::Transformed { base, transform } => match *transform {
                TransformKind::AcceleratedFailureTime { time_scale } => {
                    base.survival(t / time_scale)
                }
                _ => transform.apply_survival(base.survival(t)),
            },
        }
    }

    /// Inverse survival function: the smallest time t with S(t) <= u, for
    /// u in (0, 1]. Returns infinity when survival plateaus above u.
    pub fn inverse_survival(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0, "inverse_survival needs u in (0,1]");
        if u >= 1.0 {
            return 0.0;
        }
        match self {
            ScenarioDistribution::Exponential { rate } => -u.ln() / rate,
            ScenarioDistribution::Piecewise { knots, tail } => {
                for &(t, s) in &knots[1..] {
                    if s <= u {
                        return t;
                    }
                }
                let (t_last, s_last) = *knots.last().expect("validated nonempty");
                let rate = tail_rate(knots, *tail);
                if rate > 0.0 {
                    t_last + (s_last / u).ln() / rate
                } else {
                    f64::INFINITY
                }
            }
            ScenarioDistribution::Transformed { base, transform } => match *transform {
                TransformKind::AcceleratedFailureTime { time_scale } => {
                    time_scale * base.inverse_survival(u)
                }
                _ => base.inverse_survival(transform.invert_survival(u)),
            },
        }
    }

    /// Draw one event time by inverse-CDF sampling; deterministic given the
    /// stream state. May return infinity when the law has a survival plateau.
    pub fn sample_event_time(&self, rng: &mut ChaCha12Rng) -> f64 {
        // map [0,1) to (0,1] so u = 0 never reaches the inverse
        let u = 1.0 - rng.random::<f64>();
        self.inverse_survival(u)
    }

    /// Restricted mean survival time over [0, horizon].
    pub fn rmst(&self, horizon: f64) -> f64 {
        assert!(horizon > 0.0, "rmst horizon must be positive");
        match self {
            ScenarioDistribution::Exponential { rate } => {
                let mu = 1.0 / rate;
                mu * (1.0 - (-horizon / mu).exp())
            }
            ScenarioDistribution::Piecewise { knots, tail } => {
                let mut area = 0.0;
                for w in knots.windows(2) {
                    let (t0, s0) = w[0];
                    let t1 = w[1].0;
                    if t0 >= horizon {
                        return area;
                    }
                    area += s0 * (t1.min(horizon) - t0);
                }
                let (t_last, s_last) = *knots.last().expect("validated nonempty");
                if horizon > t_last {
                    let rate = tail_rate(knots, *tail);
                    if rate > 0.0 {
                        area += s_last * (1.0 - (-rate * (horizon - t_last)).exp()) / rate;
                    } else {
                        area += s_last * (horizon - t_last);
                    }
                }
                area
            }
            ScenarioDistribution::Transformed { .. } => {
                let mut points = self.jump_points(horizon);
                points.push(0.0);
                points.push(horizon);
                points.sort_by(|a, b| a.partial_cmp(b).unwrap());
                points.dedup();
                let mut area = 0.0;
                for w in points.windows(2) {
                    area += integrate_survival(self, w[0], w[1]);
                }
                area
            }
        }
    }

    /// Locations in (0, cap) where the survival function jumps.
    fn jump_points(&self, cap: f64) -> Vec<f64> {
        match self {
            ScenarioDistribution::Exponential { .. } => Vec::new(),
            ScenarioDistribution::Piecewise { knots, .. } => knots
                .iter()
                .map(|&(t, _)| t)
                .filter(|&t| t > 0.0 && t < cap)
                .collect(),
            ScenarioDistribution::Transformed { base, transform } => match *transform {
                TransformKind::AcceleratedFailureTime { time_scale } => base
                    .jump_points(cap / time_scale)
                    .into_iter()
                    .map(|t| t * time_scale)
                    .collect(),
                _ => base.jump_points(cap),
            },
        }
    }
}

/// Hazard rate of the extension beyond the final knot.
fn tail_rate(knots: &[(f64, f64)], tail: TailRule) -> f64 {
    if tail == TailRule::Flat || knots.len() < 2 {
        return 0.0;
    }
    let (t0, s0) = knots[knots.len() - 2];
    let (t1, s1) = knots[knots.len() - 1];
    if s1 <= 0.0 || s1 >= s0 {
        // zero survival needs no tail; a flat final segment extends flat
        return 0.0;
    }
    (s0 / s1).ln() / (t1 - t0)
}

/// Adaptive Simpson quadrature of S(t) over [a, b]; the integrand is smooth
/// on the open interval by construction (jumps are split off by the caller).
fn integrate_survival(dist: &ScenarioDistribution, a: f64, b: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, tol / 2.0, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let f = |t: f64| dist.survival(t);
    // open the interval a hair so jump endpoints are never sampled
    let eps = 1e-9 * (b - a);
    let (a_in, b_in) = (a + eps, b - eps);
    let fa = f(a_in);
    let fb = f(b_in);
    let m = 0.5 * (a_in + b_in);
    let fm = f(m);
    let whole = simpson(a_in, fa, b_in, fb, fm);
    recurse(&f, a_in, fa, b_in, fb, fm, whole, 1e-11, 40)
        + eps * (f(a_in) + f(b_in))
}

/// Apply a transformation, materializing closed families where exact.
pub fn apply_transform(base: &ScenarioDistribution, tk: TransformKind) -> ScenarioDistribution {
    if tk.is_identity() {
        return base.clone();
    }
    match (base, tk) {
        (
            ScenarioDistribution::Exponential { rate },
            TransformKind::ProportionalHazards { hazard_ratio },
        ) => ScenarioDistribution::Exponential {
            rate: rate * hazard_ratio,
        },
        (
            ScenarioDistribution::Exponential { rate },
            TransformKind::AcceleratedFailureTime { time_scale },
        ) => ScenarioDistribution::Exponential {
            rate: rate / time_scale,
        },
        (ScenarioDistribution::Piecewise { knots, tail }, tk) => {
            // PH and AFT commute with the segmentwise representation; PO does
            // not act exponentially on the tail, so it stays wrapped unless
            // the curve already hits zero.
            let tail_matters =
                knots.last().map(|&(_, s)| s > 0.0).unwrap_or(false) && *tail != TailRule::Flat;
            match tk {
                TransformKind::ProportionalHazards { hazard_ratio } => {
                    ScenarioDistribution::Piecewise {
                        knots: knots
                            .iter()
                            .map(|&(t, s)| (t, s.powf(hazard_ratio)))
                            .collect(),
                        tail: *tail,
                    }
                }
                TransformKind::AcceleratedFailureTime { time_scale } => {
                    ScenarioDistribution::Piecewise {
                        knots: knots.iter().map(|&(t, s)| (t * time_scale, s)).collect(),
                        tail: *tail,
                    }
                }
                TransformKind::ProportionalOdds { .. } if !tail_matters => {
                    ScenarioDistribution::Piecewise {
                        knots: knots
                            .iter()
                            .map(|&(t, s)| (t, tk.apply_survival(s)))
                            .collect(),
                        tail: *tail,
                    }
                }
                _ => ScenarioDistribution::Transformed {
                    base: Box::new(base.clone()),
                    transform: tk,
                },
            }
        }
        (base, tk) => ScenarioDistribution::Transformed {
            base: Box::new(base.clone()),
            transform: tk,
        },
    }
}

/// Solve for the transform parameter within `family` such that the transformed
/// law has the target RMST at the given horizon, to within 1e-6 months.
pub fn solve_transform_to_rmst(
    base: &ScenarioDistribution,
    family: TransformKind,
    target: f64,
    horizon: f64,
) -> Result<TransformKind> {
    if !(target > 0.0 && target < horizon) {
        return Err(Error::TargetUnreachable {
            target,
            reason: format!("target must lie strictly inside (0, {horizon})"),
        });
    }
    let rmst_at = |p: f64| apply_transform(base, family.with_parameter(p)).rmst(horizon);
    let base_rmst = base.rmst(horizon);
    if (base_rmst - target).abs() <= 1e-9 {
        return Ok(family.with_parameter(1.0));
    }
    // RMST is decreasing in the PH parameter and increasing in the AFT and PO
    // parameters; expand the bracket away from 1.0 until f = rmst - target
    // changes sign.
    let increasing = !matches!(family, TransformKind::ProportionalHazards { .. });
    let need_larger_param = (target > base_rmst) == increasing;
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    let f_at_one = base_rmst - target;
    let mut steps = 0;
    loop {
        let probe = if need_larger_param {
            hi *= 2.0;
            hi
        } else {
            lo /= 2.0;
            lo
        };
        if f_at_one * (rmst_at(probe) - target) <= 0.0 {
            break;
        }
        steps += 1;
        if steps > 80 {
            return Err(Error::TargetUnreachable {
                target,
                reason: "bracketing failed after 80 doublings".into(),
            });
        }
    }
    let mut f_lo = rmst_at(lo) - target;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = rmst_at(mid) - target;
        if f_mid.abs() <= 1e-9 || (hi - lo) <= f64::EPSILON * mid {
            return Ok(family.with_parameter(mid));
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (rmst_at(mid) - target).abs() <= 1e-6 {
        Ok(family.with_parameter(mid))
    } else {
        Err(Error::TargetUnreachable {
            target,
            reason: "bisection did not converge".into(),
        })
    }
}

/// Exponential law with the requested RMST at the given horizon.
pub fn exponential_with_rmst(target: f64, horizon: f64) -> Result<ScenarioDistribution> {
    if !(target > 0.0 && target < horizon) {
        return Err(Error::TargetUnreachable {
            target,
            reason: format!("an exponential RMST at horizon {horizon} must lie in (0, {horizon})"),
        });
    }
    let f = |mu: f64| mu * (1.0 - (-horizon / mu).exp()) - target;
    let mut lo = 1e-9;
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::TargetUnreachable {
                target,
                reason: "mean bracket overflow".into(),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    ScenarioDistribution::exponential(1.0 / mu)
}

/// Parse a digitized-curve CSV with header `time_months,survival`.
pub fn parse_curve_csv(path: &str) -> Result<ScenarioDistribution> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curve_csv_str(&content, path)
}

/// Parse digitized-curve CSV content; `label` names the source in errors.
pub fn parse_curve_csv_str(content: &str, label: &str) -> Result<ScenarioDistribution> {
    let err = |row: usize, message: String| Error::CsvParse {
        path: label.to_string(),
        row,
        message,
    };
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty file".to_string()))?;
    if header.trim() != "time_months,survival" {
        return Err(err(
            1,
            format!("expected header 'time_months,survival', got '{}'", header.trim()),
        ));
    }
    let mut knots = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t: f64 = fields
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|e| err(row, format!("bad time_months: {e}")))?;
        let s: f64 = fields
            .next()
            .ok_or_else(|| err(row, "missing survival column".to_string()))?
            .trim()
            .parse()
            .map_err(|e| err(row, format!("bad survival: {e}")))?;
        if fields.next().is_some() {
            return Err(err(row, "too many columns".to_string()));
        }
        if knots.is_empty() && (t, s) != (0.0, 1.0) {
            return Err(err(row, format!("first row must be 0,1.0, got {t},{s}")));
        }
        if let Some(&(pt, ps)) = knots.last() {
            if t <= pt {
                return Err(err(row, format!("time {t} not greater than previous {pt}")));
            }
            if s > ps {
                return Err(err(row, format!("survival {s} increases from previous {ps}")));
            }
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(err(row, format!("survival {s} outside [0, 1]")));
        }
        knots.push((t, s));
    }
    if knots.is_empty() {
        return Err(err(1, "no data rows".to_string()));
    }
    ScenarioDistribution::piecewise(knots, TailRule::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn exp_mean(mean: f64) -> ScenarioDistribution {
        ScenarioDistribution::exponential(1.0 / mean).unwrap()
    }

    fn median_curve() -> ScenarioDistribution {
        ScenarioDistribution::piecewise(
            vec![(0.0, 1.0), (12.0, 0.5), (24.0, 0.5)],
            TailRule::ExponentialHazard,
        )
        .unwrap()
    }

    #[test]
    fn exponential_inverse_cdf_at_known_point() {
        let dist = ScenarioDistribution::exponential(1.0 / 24.0).unwrap();
        let u = (-1.0_f64).exp();
        assert!((dist.inverse_survival(u) - 24.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_inverse_cdf_lands_in_first_segment() {
        let t = median_curve().inverse_survival(0.75);
        assert!(t > 0.0 && t <= 12.0, "got {t}");
    }

    #[test]
    fn sample_mean_matches_law_of_large_numbers() {
        let dist = exp_mean(30.0);
        let mut rng = stream(42, &[0]);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| dist.sample_event_time(&mut rng))
            .sum::<f64>()
            / n as f64;
        let se = 30.0 / (n as f64).sqrt();
        assert!(
            (mean - 30.0).abs() < 3.0 * se,
            "sample mean {mean} further than 3 SE from 30"
        );
    }

    #[test]
    fn rmst_exponential_closed_form() {
        let dist = exp_mean(30.0);
        let expect = 30.0 * (1.0 - (-24.0_f64 / 30.0).exp());
        assert!((dist.rmst(24.0) - expect).abs() < 1e-12);
        // huge mean approaches the horizon
        let flat = exp_mean(1e9);
        assert!((flat.rmst(24.0) - 24.0).abs() < 1e-6);
    }

    #[test]
    fn rmst_of_step_curve_by_hand() {
        // 12 * 1 + 12 * 0.5 = 18 under the right-continuous step reading
        assert!((median_curve().rmst(24.0) - 18.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_with_rmst_forward_check() {
        let dist = exponential_with_rmst(20.0, 24.0).unwrap();
        assert!((dist.rmst(24.0) - 20.0).abs() < 1e-9);
        // RMST 20 at 24 months needs a mean well above 20
        if let ScenarioDistribution::Exponential { rate } = dist {
            assert!(1.0 / rate > 20.0);
        } else {
            panic!("expected exponential");
        }
    }

    #[test]
    fn ph_transform_identity_and_hazard_doubling() {
        let base = exp_mean(24.0);
        let same = apply_transform(&base, TransformKind::ProportionalHazards { hazard_ratio: 1.0 });
        assert_eq!(same, base);
        let doubled =
            apply_transform(&base, TransformKind::ProportionalHazards { hazard_ratio: 2.0 });
        assert_eq!(
            doubled,
            ScenarioDistribution::Exponential { rate: 2.0 / 24.0 }
        );
        let po_same = apply_transform(&base, TransformKind::ProportionalOdds { odds_ratio: 1.0 });
        assert_eq!(po_same, base);
    }

    #[test]
    fn transform_survival_identities() {
        let base = median_curve();
        let t = 7.3;
        let ph = apply_transform(&base, TransformKind::ProportionalHazards { hazard_ratio: 1.7 });
        assert!((ph.survival(t) - base.survival(t).powf(1.7)).abs() < 1e-12);
        let aft =
            apply_transform(&base, TransformKind::AcceleratedFailureTime { time_scale: 0.8 });
        assert!((aft.survival(t) - base.survival(t / 0.8)).abs() < 1e-12);
        let po = apply_transform(&base, TransformKind::ProportionalOdds { odds_ratio: 0.5 });
        let s = base.survival(t);
        let expect = 0.5 * s / (1.0 - s + 0.5 * s);
        assert!((po.survival(t) - expect).abs() < 1e-12);
    }

    #[test]
    fn solve_to_rmst_round_trip_all_families() {
        let base = exponential_with_rmst(22.0, 24.0).unwrap();
        for family in [
            TransformKind::ProportionalHazards { hazard_ratio: 1.0 },
            TransformKind::AcceleratedFailureTime { time_scale: 1.0 },
            TransformKind::ProportionalOdds { odds_ratio: 1.0 },
        ] {
            let solved = solve_transform_to_rmst(&base, family, 20.0, 24.0).unwrap();
            let transformed = apply_transform(&base, solved);
            assert!(
                (transformed.rmst(24.0) - 20.0).abs() <= 1e-6,
                "round trip failed for {family:?}: rmst {}",
                transformed.rmst(24.0)
            );
            // de-intensified targets need hr > 1, scale < 1, or < 1
            match solved {
                TransformKind::ProportionalHazards { hazard_ratio } => assert!(hazard_ratio > 1.0),
                TransformKind::AcceleratedFailureTime { time_scale } => assert!(time_scale < 1.0),
                TransformKind::ProportionalOdds { odds_ratio } => assert!(odds_ratio < 1.0),
            }
        }
    }

    #[test]
    fn solve_to_rmst_identity_target() {
        let base = exponential_with_rmst(22.0, 24.0).unwrap();
        let solved = solve_transform_to_rmst(
            &base,
            TransformKind::ProportionalHazards { hazard_ratio: 1.0 },
            base.rmst(24.0),
            24.0,
        )
        .unwrap();
        assert_eq!(solved.parameter(), 1.0);
    }

    #[test]
    fn unreachable_target_is_an_error() {
        let base = exp_mean(30.0);
        assert!(solve_transform_to_rmst(
            &base,
            TransformKind::ProportionalHazards { hazard_ratio: 1.0 },
            25.0,
            24.0
        )
        .is_err());
    }

    #[test]
    fn transforms_move_rmst_in_the_documented_direction() {
        let bases = [exp_mean(28.0), median_curve()];
        for base in &bases {
            let r0 = base.rmst(24.0);
            for p in [1.3, 2.0, 4.0] {
                let ph =
                    apply_transform(base, TransformKind::ProportionalHazards { hazard_ratio: p });
                assert!(ph.rmst(24.0) < r0, "PH {p} did not reduce RMST");
            }
            for p in [0.9, 0.6, 0.3] {
                let aft =
                    apply_transform(base, TransformKind::AcceleratedFailureTime { time_scale: p });
                assert!(aft.rmst(24.0) < r0, "AFT {p} did not reduce RMST");
                let po = apply_transform(base, TransformKind::ProportionalOdds { odds_ratio: p });
                assert!(po.rmst(24.0) < r0, "PO {p} did not reduce RMST");
            }
        }
    }

    #[test]
    fn transformed_rmst_matches_quadrature_of_materialized_form() {
        // PH of a piecewise law evaluates in closed form; forcing the wrapped
        // representation must integrate to the same value.
        let base = median_curve();
        let tk = TransformKind::ProportionalHazards { hazard_ratio: 1.6 };
        let materialized = apply_transform(&base, tk);
        let wrapped = ScenarioDistribution::Transformed {
            base: Box::new(base),
            transform: tk,
        };
        assert!((materialized.rmst(24.0) - wrapped.rmst(24.0)).abs() < 1e-8);
    }

    #[test]
    fn exponential_tail_extends_the_final_segment_hazard() {
        let dist = ScenarioDistribution::piecewise(
            vec![(0.0, 1.0), (10.0, 0.8), (20.0, 0.4)],
            TailRule::ExponentialHazard,
        )
        .unwrap();
        let rate = (0.8_f64 / 0.4).ln() / 10.0;
        let expect = 0.4 * (-rate * 5.0).exp();
        assert!((dist.survival(25.0) - expect).abs() < 1e-12);
        let flat = ScenarioDistribution::piecewise(
            vec![(0.0, 1.0), (10.0, 0.8), (20.0, 0.4)],
            TailRule::Flat,
        )
        .unwrap();
        assert_eq!(flat.survival(1e4), 0.4);
    }

    #[test]
    fn rmst_is_within_horizon_bound() {
        for dist in [exp_mean(5.0), exp_mean(500.0), median_curve()] {
            let r = dist.rmst(24.0);
            assert!(r > 0.0 && r <= 24.0);
            assert!(r < 24.0, "strictly below horizon when mass lies inside");
        }
    }

    #[test]
    fn curve_csv_round_trip_and_errors() {
        let good = "time_months,survival\n0,1.0\n6,0.9\n12,0.75\n";
        let dist = parse_curve_csv_str(good, "good.csv").unwrap();
        assert_eq!(dist.survival(7.0), 0.9);

        let bad_order = "time_months,survival\n0,1.0\n6,0.9\n6,0.8\n";
        let e = parse_curve_csv_str(bad_order, "bad.csv").unwrap_err();
        assert!(e.to_string().contains("bad.csv:4"), "error was {e}");

        let bad_first = "time_months,survival\n1,1.0\n";
        assert!(parse_curve_csv_str(bad_first, "x.csv").is_err());

        let rising = "time_months,survival\n0,1.0\n3,0.5\n5,0.7\n";
        assert!(parse_curve_csv_str(rising, "x.csv").is_err());
    }

    #[test]
    fn serde_round_trip() {
        let dist = ScenarioDistribution::Transformed {
            base: Box::new(median_curve()),
            transform: TransformKind::ProportionalOdds { odds_ratio: 0.7 },
        };
        let json = serde_json::to_string(&dist).unwrap();
        let back: ScenarioDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(dist, back);
    }
}
