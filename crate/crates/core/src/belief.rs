//! Belief arithmetic over finite state spaces and piecewise-constant densities
//! on `[0, 1]`.
//!
//! Finite beliefs are plain probability vectors aligned with a [`StateSpace`].
//! Support membership is structural: a state is in the support iff its stored
//! probability is not exactly zero. Continuous beliefs are restricted to
//! piecewise-constant densities, a class closed under Bayes updating with
//! step-function likelihoods, so every posterior here is exact.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for probability vectors and densities.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Ordered set of states, optionally carrying a numeric value per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateSpaceRaw")]
pub struct StateSpace {
    labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct StateSpaceRaw {
    labels: Vec<String>,
    #[serde(default)]
    values: Option<Vec<f64>>,
}

impl TryFrom<StateSpaceRaw> for StateSpace {
    type Error = Error;
    fn try_from(raw: StateSpaceRaw) -> Result<Self> {
        StateSpace::new(raw.labels, raw.values)
    }
}

impl StateSpace {
    pub fn new(labels: Vec<String>, values: Option<Vec<f64>>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidStateSpace(format!(
                "need at least two states, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidStateSpace(format!(
                    "duplicate label `{label}`"
                )));
            }
        }
        if let Some(v) = &values {
            if v.len() != labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: labels.len(),
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidStateSpace(
                    "state values must be finite".into(),
                ));
            }
        }
        Ok(Self { labels, values })
    }

    /// States labelled by their numeric values.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let labels = values.iter().map(|v| format!("{v}")).collect();
        Self::new(labels, Some(values))
    }

    /// The binary space `{1, 0}`: index 0 is the high state `θ = 1`.
    pub fn binary() -> Self {
        Self {
            labels: vec!["1".into(), "0".into()],
            values: Some(vec![1.0, 0.0]),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }
}

/// Probability vector over a finite state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FiniteBelief {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FiniteBelief {
    type Error = Error;
    fn try_from(probs: Vec<f64>) -> Result<Self> {
        FiniteBelief::new(probs)
    }
}

impl From<FiniteBelief> for Vec<f64> {
    fn from(b: FiniteBelief) -> Self {
        b.probs
    }
}

impl FiniteBelief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "empty probability vector".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} is not a probability"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights into a belief.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weight {w} is not nonnegative"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbabilityMessage);
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Binary belief `(p, 1 - p)` over `{1, 0}`.
    pub fn binary(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDistribution(format!(
                "{p} is not a probability"
            )));
        }
        Ok(Self {
            probs: vec![p, 1.0 - p],
        })
    }

    pub fn uniform(len: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; len])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices with nonzero probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len())
            .filter(|&i| self.probs[i] != 0.0)
            .collect()
    }

    /// `self ≪ other`: every state charged by `self` is charged by `other`.
    pub fn is_absolutely_continuous_wrt(&self, other: &FiniteBelief) -> bool {
        self.len() == other.len()
            && self
                .probs
                .iter()
                .zip(&other.probs)
                .all(|(p, q)| *p == 0.0 || *q != 0.0)
    }

    pub fn max_abs_diff(&self, other: &FiniteBelief) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &FiniteBelief) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn dot(&self, weights: &[f64]) -> Result<f64> {
        check_dims(self.len(), weights.len())?;
        Ok(self.probs.iter().zip(weights).map(|(p, w)| p * w).sum())
    }

    /// Expected numeric state value.
    pub fn expected_state(&self, space: &StateSpace) -> Result<f64> {
        let values = space.values().ok_or(Error::MissingStateValues)?;
        self.dot(values)
    }

    /// Draws a state index given a uniform variate in `[0, 1)`.
    pub(crate) fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Posterior after observing a message with the given per-state likelihood.
pub fn bayes_update(prior: &FiniteBelief, likelihood: &[f64]) -> Result<FiniteBelief> {
    check_dims(prior.len(), likelihood.len())?;
    if let Some(l) = likelihood.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::InvalidDistribution(format!(
            "likelihood {l} outside [0, 1]"
        )));
    }
    let joint: Vec<f64> = prior
        .probs
        .iter()
        .zip(likelihood)
        .map(|(p, l)| p * l)
        .collect();
    let norm: f64 = joint.iter().sum();
    if norm <= 0.0 {
        return Err(Error::ZeroProbabilityMessage);
    }
    Ok(FiniteBelief {
        probs: joint.into_iter().map(|j| j / norm).collect(),
    })
}

/// Minimum and maximum of `pi(θ) / pi0(θ)` over the support of `pi0`.
pub fn likelihood_ratio_bounds(pi: &FiniteBelief, pi0: &FiniteBelief) -> Result<(f64, f64)> {
    check_dims(pi0.len(), pi.len())?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, (p, q)) in pi.probs.iter().zip(&pi0.probs).enumerate() {
        if *q == 0.0 {
            if *p != 0.0 {
                return Err(Error::NotAbsolutelyContinuous(i));
            }
            continue;
        }
        let r = p / q;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Convex combination of beliefs.
pub fn mix(beliefs: &[FiniteBelief], weights: &[f64]) -> Result<FiniteBelief> {
    let first = beliefs
        .first()
        .ok_or_else(|| Error::InvalidDistribution("mix of zero beliefs".into()))?;
    check_dims(beliefs.len(), weights.len())?;
    // validates the weight vector
    FiniteBelief::new(weights.to_vec())?;
    let mut out = vec![0.0; first.len()];
    for (b, w) in beliefs.iter().zip(weights) {
        check_dims(first.len(), b.len())?;
        for (o, p) in out.iter_mut().zip(&b.probs) {
            *o += w * p;
        }
    }
    Ok(FiniteBelief { probs: out })
}

/// Piecewise-constant function on `[0, 1]`, used as a likelihood or a
/// likelihood ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_partition(&breakpoints)?;
        check_dims(breakpoints.len() - 1, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("step values must be finite".into()));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            values: vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Right-continuous evaluation; `x = 1` falls in the last piece.
    pub fn value_at(&self, x: f64) -> f64 {
        self.values[piece_index(&self.breakpoints, x)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> StepFunction {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }
}

/// Piecewise-constant probability density on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRaw")]
pub struct PiecewiseDensity {
    breakpoints: Vec<f64>,
    densities: Vec<f64>,
}

#[derive(Deserialize)]
struct DensityRaw {
    breakpoints: Vec<f64>,
    densities: Vec<f64>,
}

impl TryFrom<DensityRaw> for PiecewiseDensity {
    type Error = Error;
    fn try_from(raw: DensityRaw) -> Result<Self> {
        PiecewiseDensity::new(raw.breakpoints, raw.densities)
    }
}

fn validate_partition(breakpoints: &[f64]) -> Result<()> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidDistribution(
            "need at least two breakpoints".into(),
        ));
    }
    if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
        return Err(Error::InvalidDistribution(
            "breakpoints must start at 0 and end at 1".into(),
        ));
    }
    if breakpoints
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::InvalidDistribution(
            "breakpoints must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn piece_index(breakpoints: &[f64], x: f64) -> usize {
    let pieces = breakpoints.len() - 1;
    let idx = breakpoints.partition_point(|b| *b <= x);
    idx.clamp(1, pieces) - 1
}

/// Sorted union of two partitions of `[0, 1]`.
pub(crate) fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().chain(b).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

impl PiecewiseDensity {
    pub fn new(breakpoints: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        validate_partition(&breakpoints)?;
        check_dims(breakpoints.len() - 1, densities.len())?;
        if let Some(d) = densities.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "density level {d} is negative"
            )));
        }
        let density = Self {
            breakpoints,
            densities,
        };
        let total = density.total_mass();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "density integrates to {total}"
            )));
        }
        Ok(density)
    }

    /// Normalizes nonnegative levels into a density.
    pub fn from_levels(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        validate_partition(&breakpoints)?;
        check_dims(breakpoints.len() - 1, levels.len())?;
        if let Some(d) = levels.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "density level {d} is negative"
            )));
        }
        let raw = Self {
            breakpoints,
            densities: levels,
        };
        let total = raw.total_mass();
        if total <= 0.0 {
            return Err(Error::ZeroProbabilityMessage);
        }
        Ok(Self {
            densities: raw.densities.iter().map(|d| d / total).collect(),
            ..raw
        })
    }

    pub fn uniform() -> Self {
        Self {
            breakpoints: vec![0.0, 1.0],
            densities: vec![1.0],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| (w[0], w[1], *d))
    }

    fn total_mass(&self) -> f64 {
        self.pieces().map(|(a, b, d)| d * (b - a)).sum()
    }

    /// Right-continuous density value; `x = 1` falls in the last piece.
    pub fn density_at(&self, x: f64) -> f64 {
        self.densities[piece_index(&self.breakpoints, x)]
    }

    /// Probability of `[lo, hi]`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        self.pieces()
            .map(|(a, b, d)| {
                let l = a.max(lo);
                let h = b.min(hi);
                if h > l {
                    d * (h - l)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `∫ θ f(θ) dθ`, closed form per piece.
    pub fn expected_state(&self) -> f64 {
        self.pieces()
            .map(|(a, b, d)| d * (b * b - a * a) / 2.0)
            .sum()
    }

    /// Exact posterior after a message whose per-state probability is the
    /// step function `likelihood`.
    pub fn update(&self, likelihood: &StepFunction) -> Result<PiecewiseDensity> {
        if let Some(l) = likelihood.values.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidDistribution(format!(
                "likelihood {l} outside [0, 1]"
            )));
        }
        let bps = merge_breakpoints(&self.breakpoints, &likelihood.breakpoints);
        let levels: Vec<f64> = bps
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let l = likelihood.value_at(mid);
                self.density_at(mid) * l
            })
            .collect();
        PiecewiseDensity::from_levels(bps, levels)
    }

    /// Radon–Nikodym derivative `d self / d prior` as a step function on the
    /// merged partition. Pieces where the prior vanishes carry ratio 0.
    pub fn ratio_to(&self, prior: &PiecewiseDensity) -> Result<StepFunction> {
        let bps = merge_breakpoints(&self.breakpoints, &prior.breakpoints);
        let mut values = Vec::with_capacity(bps.len() - 1);
        for (i, w) in bps.windows(2).enumerate() {
            let mid = 0.5 * (w[0] + w[1]);
            let (p, q) = (self.density_at(mid), prior.density_at(mid));
            if q == 0.0 {
                if p != 0.0 {
                    return Err(Error::NotAbsolutelyContinuous(i));
                }
                values.push(0.0);
            } else {
                values.push(p / q);
            }
        }
        StepFunction::new(bps, values)
    }

    /// Essential infimum and supremum of `d self / d prior` over the support
    /// of the prior.
    pub fn ratio_bounds(&self, prior: &PiecewiseDensity) -> Result<(f64, f64)> {
        let ratio = self.ratio_to(prior)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (w, r) in ratio.breakpoints.windows(2).zip(&ratio.values) {
            if prior.density_at(0.5 * (w[0] + w[1])) > 0.0 {
                lo = lo.min(*r);
                hi = hi.max(*r);
            }
        }
        Ok((lo, hi))
    }
}

/// Receiver count and pivotal count of the audience.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AudienceRaw")]
pub struct AudienceSpec {
    pub n: usize,
    pub n0: usize,
    pub gamma0: f64,
}

#[derive(Deserialize)]
struct AudienceRaw {
    n: usize,
    n0: usize,
}

impl TryFrom<AudienceRaw> for AudienceSpec {
    type Error = Error;
    fn try_from(raw: AudienceRaw) -> Result<Self> {
        AudienceSpec::new(raw.n, raw.n0)
    }
}

impl AudienceSpec {
    pub fn new(n: usize, n0: usize) -> Result<Self> {
        if n == 0 || n0 > n {
            return Err(Error::InvalidParams(format!(
                "audience requires 0 <= n0 <= n, n > 0 (n={n}, n0={n0})"
            )));
        }
        Ok(Self {
            n,
            n0,
            gamma0: n0 as f64 / n as f64,
        })
    }

    pub fn has_excess_audience(&self) -> bool {
        0 < self.n0 && self.n0 < self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fb(p: &[f64]) -> FiniteBelief {
        FiniteBelief::new(p.to_vec()).unwrap()
    }

    #[test]
    fn uninformative_message_returns_prior() {
        let prior = fb(&[0.4, 0.6]);
        let post = bayes_update(&prior, &[0.3, 0.3]).unwrap();
        assert!(post.max_abs_diff(&prior) < 1e-15);
    }

    #[test]
    fn election_message_posterior() {
        let post = bayes_update(&fb(&[0.4, 0.6]), &[1.0, 0.5]).unwrap();
        assert_abs_diff_eq!(post.probs()[0], 4.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(post.probs()[1], 3.0 / 7.0, epsilon = 1e-15);
        // closed-form upper endpoint p0 / (p0 + (1 - p0) γ)
        assert_abs_diff_eq!(post.probs()[0], 0.4 / (0.4 + 0.6 * 0.5), epsilon = 1e-15);
    }

    #[test]
    fn revealing_message() {
        let post = bayes_update(&fb(&[0.5, 0.5]), &[1.0, 0.0]).unwrap();
        assert_eq!(post.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn off_path_message_is_an_error() {
        assert_eq!(
            bayes_update(&fb(&[1.0, 0.0]), &[0.0, 1.0]),
            Err(Error::ZeroProbabilityMessage)
        );
        assert!(matches!(
            bayes_update(&fb(&[0.5, 0.5]), &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ratio_bounds_examples() {
        let p = fb(&[0.25, 0.75]);
        assert_eq!(likelihood_ratio_bounds(&p, &p).unwrap(), (1.0, 1.0));
        let (lo, hi) = likelihood_ratio_bounds(
            &fb(&[1.0 / 3.0, 4.0 / 9.0, 2.0 / 9.0]),
            &fb(&[0.5, 1.0 / 3.0, 1.0 / 6.0]),
        )
        .unwrap();
        assert_abs_diff_eq!(lo, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lo / hi, 0.5, epsilon = 1e-15);
        assert_eq!(
            likelihood_ratio_bounds(&fb(&[1.0, 0.0]), &fb(&[0.5, 0.5])).unwrap(),
            (0.0, 2.0)
        );
        assert_eq!(
            likelihood_ratio_bounds(&fb(&[0.5, 0.5]), &fb(&[1.0, 0.0])),
            Err(Error::NotAbsolutelyContinuous(1))
        );
    }

    #[test]
    fn mix_examples() {
        let m = mix(&[fb(&[1.0, 0.0]), fb(&[0.0, 1.0])], &[0.4, 0.6]).unwrap();
        assert_eq!(m.probs(), &[0.4, 0.6]);
        let pi = fb(&[0.2, 0.3, 0.5]);
        assert_eq!(mix(std::slice::from_ref(&pi), &[1.0]).unwrap(), pi);
        let m = mix(&[fb(&[4.0 / 7.0, 3.0 / 7.0]), fb(&[0.0, 1.0])], &[0.7, 0.3]).unwrap();
        assert!(m.max_abs_diff(&fb(&[0.4, 0.6])) < 1e-15);
        assert!(matches!(
            mix(&[fb(&[1.0, 0.0]), fb(&[0.2, 0.3, 0.5])], &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn expected_state_examples() {
        assert_eq!(PiecewiseDensity::uniform().expected_state(), 0.5);
        // two-level optimal posterior for γ = 1/4: θ1 = 2/3, c0 = 1 / (γθ1 + 1 - θ1)
        let (gamma, theta1) = (0.25, 2.0 / 3.0);
        let c0 = 1.0 / (gamma * theta1 + 1.0 - theta1);
        let d = PiecewiseDensity::new(vec![0.0, theta1, 1.0], vec![gamma * c0, c0]).unwrap();
        assert_abs_diff_eq!(d.expected_state(), 2.0 / 3.0, epsilon = 1e-14);
        let space = StateSpace::from_values(vec![1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(
            fb(&[1.0 / 3.0, 4.0 / 9.0, 2.0 / 9.0])
                .expected_state(&space)
                .unwrap(),
            17.0 / 9.0,
            epsilon = 1e-15
        );
        let unvalued = StateSpace::new(vec!["a".into(), "b".into()], None).unwrap();
        assert_eq!(
            fb(&[0.5, 0.5]).expected_state(&unvalued),
            Err(Error::MissingStateValues)
        );
    }

    #[test]
    fn state_space_validation() {
        assert!(StateSpace::new(vec!["a".into()], None).is_err());
        assert!(StateSpace::new(vec!["a".into(), "a".into()], None).is_err());
        // no ordering imposed on values
        assert!(StateSpace::from_values(vec![3.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn density_validation_and_serde() {
        assert!(PiecewiseDensity::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.5]).is_err());
        assert!(PiecewiseDensity::new(vec![0.0, 0.5, 0.5, 1.0], vec![1.0, 1.0, 1.0]).is_err());
        let d = PiecewiseDensity::new(vec![0.0, 0.5, 1.0], vec![0.5, 1.5]).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(
            json,
            r#"{"breakpoints":[0.0,0.5,1.0],"densities":[0.5,1.5]}"#
        );
        assert_eq!(serde_json::from_str::<PiecewiseDensity>(&json).unwrap(), d);
        assert!(serde_json::from_str::<PiecewiseDensity>(
            r#"{"breakpoints":[0,1],"densities":[2]}"#
        )
        .is_err());
        let b: FiniteBelief = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "[0.25,0.75]");
        assert!(serde_json::from_str::<FiniteBelief>("[0.25,0.5]").is_err());
    }

    #[test]
    fn density_update_is_exact() {
        let prior = PiecewiseDensity::uniform();
        let lik = StepFunction::new(vec![0.0, 0.6, 1.0], vec![0.25, 1.0]).unwrap();
        let post = prior.update(&lik).unwrap();
        let z = 0.6 * 0.25 + 0.4;
        assert_abs_diff_eq!(post.density_at(0.1), 0.25 / z, epsilon = 1e-15);
        assert_abs_diff_eq!(post.density_at(0.9), 1.0 / z, epsilon = 1e-15);
        assert_eq!(
            prior.update(&StepFunction::constant(0.0)),
            Err(Error::ZeroProbabilityMessage)
        );
        let (lo, hi) = post.ratio_bounds(&prior).unwrap();
        assert_abs_diff_eq!(lo / hi, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn audience_spec() {
        let a = AudienceSpec::new(100, 50).unwrap();
        assert_eq!(a.gamma0, 0.5);
        assert!(a.has_excess_audience());
        assert!(!AudienceSpec::new(10, 10).unwrap().has_excess_audience());
        assert!(!AudienceSpec::new(10, 0).unwrap().has_excess_audience());
        assert!(AudienceSpec::new(10, 11).is_err());
        let a: AudienceSpec = serde_json::from_str(r#"{"n":4,"n0":1}"#).unwrap();
        assert_eq!(a.gamma0, 0.25);
    }

    fn belief_strategy(len: usize) -> impl Strategy<Value = FiniteBelief> {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0], len)
            .prop_filter("nonzero", |w| w.iter().sum::<f64>() > 0.0)
            .prop_map(|w| FiniteBelief::from_weights(&w).unwrap())
    }

    proptest! {
        #[test]
        fn posterior_is_absolutely_continuous(
            (prior, lik) in (2usize..7).prop_flat_map(|k| (belief_strategy(k), prop::collection::vec(0.0f64..=1.0, k)))
        ) {
            if let Ok(post) = bayes_update(&prior, &lik) {
                prop_assert!(post.is_absolutely_continuous_wrt(&prior));
            }
        }

        #[test]
        fn martingale_property(
            (prior, kernel) in (2usize..7, 2usize..5).prop_flat_map(|(k, m)| (
                belief_strategy(k),
                prop::collection::vec(prop::collection::vec(0.01f64..1.0, m), k),
            ))
        ) {
            // kernel[θ] is an unnormalized message distribution for state θ
            let m = kernel[0].len();
            let rows: Vec<Vec<f64>> = kernel.iter().map(|r| { let s: f64 = r.iter().sum(); r.iter().map(|x| x / s).collect() }).collect();
            let mut posts = Vec::new();
            let mut weights = Vec::new();
            for j in 0..m {
                let lik: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                let pm: f64 = prior.probs().iter().zip(&lik).map(|(p, l)| p * l).sum();
                posts.push(bayes_update(&prior, &lik).unwrap());
                weights.push(pm);
            }
            let total: f64 = weights.iter().sum();
            let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let back = mix(&posts, &weights).unwrap();
            prop_assert!(back.max_abs_diff(&prior) <= 1e-12);
        }

        #[test]
        fn ratio_bounds_bracket_one(
            (pi0, pi) in (2usize..7).prop_flat_map(|k| (belief_strategy(k), belief_strategy(k)))
        ) {
            if let Ok((lo, hi)) = likelihood_ratio_bounds(&pi, &pi0) {
                prop_assert!(lo <= 1.0 + 1e-12 && hi >= 1.0 - 1e-12);
                let equal_on_support = pi0.support().iter().all(|&i| pi.probs()[i] == pi0.probs()[i]);
                if equal_on_support {
                    prop_assert!(lo == 1.0 && hi == 1.0);
                } else {
                    prop_assert!(lo < 1.0 && hi > 1.0);
                }
            }
        }

        #[test]
        fn closed_form_integrals_match_midpoint_rule(
            levels in prop::collection::vec(0.0f64..3.0, 1..6),
            cuts in prop::collection::vec(0.01f64..0.99, 0..5),
        ) {
            let mut bps = vec![0.0, 1.0];
            bps.extend(cuts);
            bps.sort_by(f64::total_cmp);
            bps.dedup();
            let pieces = bps.len() - 1;
            let levels: Vec<f64> = (0..pieces).map(|i| levels[i % levels.len()] + 0.1).collect();
            let d = PiecewiseDensity::from_levels(bps, levels).unwrap();
            let midpoint = |cells: usize| {
                let h = 1.0 / cells as f64;
                (0..cells).map(|i| { let x = (i as f64 + 0.5) * h; (d.density_at(x), x * d.density_at(x)) })
                    .fold((0.0, 0.0), |(m, e), (a, b)| (m + a * h, e + b * h))
            };
            let exact = d.expected_state();
            let coarse = midpoint(1_000);
            let fine = midpoint(100_000);
            prop_assert!((coarse.0 - 1.0).abs() < 1e-1 && (coarse.1 - exact).abs() < 1e-1);
            prop_assert!((fine.0 - 1.0).abs() < 1e-3);
            prop_assert!((fine.1 - exact).abs() < 1e-3);
        }
    }
}
