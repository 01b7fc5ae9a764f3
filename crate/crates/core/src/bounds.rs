//! Closed-form failure-probability upper bounds.
//!
//! * [`bernstein_upper_bound`] bounds the bias of one failure indicator from
//!   its observed failure count.
//! * [`composition_bound`] bounds a conjunction of indicators that are
//!   approximately independent, splitting the confidence budget evenly.
//! * [`conjunction_bound_analytic`] is the same product with known marginals.
//! * [`system_bound`] combines sub-module bounds with a residual term through
//!   the law of total probability.

use serde::{Deserialize, Serialize};

use crate::error::{CertError, Result};
use crate::prob::{scaled_product, ProbBound};

/// `failures` out of `trials` Bernoulli observations of one indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTrialSummary")]
pub struct TrialSummary {
    failures: u64,
    trials: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrialSummary {
    failures: u64,
    trials: u64,
}

impl TryFrom<RawTrialSummary> for TrialSummary {
    type Error = CertError;

    fn try_from(r: RawTrialSummary) -> Result<Self> {
        TrialSummary::new(r.failures, r.trials)
    }
}

impl TrialSummary {
    pub fn new(failures: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(CertError::validation("trial count must be positive"));
        }
        if failures > trials {
            return Err(CertError::validation(format!(
                "failure count {failures} exceeds trial count {trials}"
            )));
        }
        Ok(TrialSummary { failures, trials })
    }

    pub fn failures(&self) -> u64 {
        self.failures
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn empirical_rate(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }
}

/// Failure probability `delta` allowed for a bound; the bound holds with
/// probability at least `1 - delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ConfidenceLevel(f64);

impl ConfidenceLevel {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(CertError::validation(format!(
                "delta {delta} outside (0, 1]"
            )));
        }
        Ok(ConfidenceLevel(delta))
    }

    pub fn delta(&self) -> f64 {
        self.0
    }

    /// The level left for each of `parts` claims under an even union-bound split.
    pub fn split(&self, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(CertError::validation("cannot split delta into zero parts"));
        }
        ConfidenceLevel::new(self.0 / parts as f64)
    }

    /// `ln(parts / delta)`, written so that `parts == 1` gives exactly `-ln(delta)`.
    fn log_inverse_split(&self, parts: usize) -> f64 {
        (parts as f64).ln() - self.0.ln()
    }
}

impl TryFrom<f64> for ConfidenceLevel {
    type Error = CertError;

    fn try_from(v: f64) -> Result<Self> {
        ConfidenceLevel::new(v)
    }
}

impl From<ConfidenceLevel> for f64 {
    fn from(c: ConfidenceLevel) -> f64 {
        c.0
    }
}

/// Approximate-independence factors `c_t`, one per indicator position.
///
/// `c_t` bounds `P[z_t | z_1 .. z_{t-1} all fired] / P[z_t]`; a value of 1
/// means the indicator is no more likely to fire given the earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct IndependenceFactors(Vec<f64>);

impl IndependenceFactors {
    pub fn new(factors: Vec<f64>) -> Result<Self> {
        if factors.is_empty() {
            return Err(CertError::validation(
                "at least one independence factor required",
            ));
        }
        if let Some(bad) = factors.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(CertError::validation(format!(
                "independence factor {bad} must be finite and nonnegative"
            )));
        }
        Ok(IndependenceFactors(factors))
    }

    pub fn uniform(factor: f64, len: usize) -> Result<Self> {
        IndependenceFactors::new(vec![factor; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for IndependenceFactors {
    type Error = CertError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        IndependenceFactors::new(v)
    }
}

impl From<IndependenceFactors> for Vec<f64> {
    fn from(f: IndependenceFactors) -> Vec<f64> {
        f.0
    }
}

/// Per-sub-module failure bounds plus the residual term
/// `P[system fails | every sub-module worked]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleBoundSet {
    pub module_bounds: Vec<ProbBound>,
    pub residual: ProbBound,
}

impl ModuleBoundSet {
    pub fn new(module_bounds: Vec<ProbBound>, residual: ProbBound) -> Self {
        ModuleBoundSet {
            module_bounds,
            residual,
        }
    }

    /// Convenience constructor from raw probabilities.
    pub fn from_values(module_bounds: &[f64], residual: f64) -> Result<Self> {
        let module_bounds = module_bounds
            .iter()
            .map(|&v| checked_probability(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModuleBoundSet::new(
            module_bounds,
            checked_probability(residual)?,
        ))
    }

    pub fn module_sum(&self) -> f64 {
        self.module_bounds.iter().map(ProbBound::value).sum()
    }
}

fn checked_probability(v: f64) -> Result<ProbBound> {
    if !(0.0..=1.0).contains(&v) {
        return Err(CertError::validation(format!(
            "probability {v} outside [0, 1]"
        )));
    }
    ProbBound::from_linear(v)
}

/// Bernstein bracket `p + sqrt(2 p L / m) + 4 L / m` with `L = log_term`, clipped to 1.
fn bernstein_bracket(summary: &TrialSummary, log_term: f64) -> f64 {
    let m = summary.trials as f64;
    let rate = summary.empirical_rate();
    let bound = rate + (2.0 * rate * log_term / m).sqrt() + 4.0 * log_term / m;
    bound.min(1.0)
}

/// Upper bound on an indicator's failure probability holding with
/// probability at least `1 - delta` over the sampled trials:
/// `p <= p_hat + sqrt(2 p_hat ln(1/delta) / m) + 4 ln(1/delta) / m`.
///
/// With zero observed failures this is `4 ln(1/delta) / m`.
pub fn bernstein_upper_bound(
    summary: &TrialSummary,
    confidence: ConfidenceLevel,
) -> Result<ProbBound> {
    ProbBound::from_linear(bernstein_bracket(summary, confidence.log_inverse_split(1)))
}

/// Upper bound on the probability that all `T` indicators fire together,
/// holding with probability at least `1 - delta`.
///
/// Each indicator is bounded at confidence `delta / T`, its bracket clipped
/// to 1, scaled by its independence factor, and the factors multiplied in log
/// space. Sample sizes may differ between indicators.
pub fn composition_bound(
    summaries: &[TrialSummary],
    factors: &IndependenceFactors,
    confidence: ConfidenceLevel,
) -> Result<ProbBound> {
    if summaries.is_empty() {
        return Err(CertError::validation(
            "composition needs at least one indicator",
        ));
    }
    if summaries.len() != factors.len() {
        return Err(CertError::validation(format!(
            "{} summaries but {} independence factors",
            summaries.len(),
            factors.len()
        )));
    }
    let log_term = confidence.log_inverse_split(summaries.len());
    let terms: Vec<(f64, f64)> = factors
        .as_slice()
        .iter()
        .zip(summaries)
        .map(|(&c, s)| (c, bernstein_bracket(s, log_term)))
        .collect();
    scaled_product(&terms)
}

/// `min(1, prod_t c_t p_t)` for known marginals `p_t`.
pub fn conjunction_bound_analytic(
    marginals: &[f64],
    factors: &IndependenceFactors,
) -> Result<ProbBound> {
    if marginals.len() != factors.len() {
        return Err(CertError::validation(format!(
            "{} marginals but {} independence factors",
            marginals.len(),
            factors.len()
        )));
    }
    if let Some(bad) = marginals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(CertError::validation(format!(
            "marginal {bad} outside [0, 1]"
        )));
    }
    let terms: Vec<(f64, f64)> = factors
        .as_slice()
        .iter()
        .copied()
        .zip(marginals.iter().copied())
        .collect();
    scaled_product(&terms)
}

/// System failure bound `min(1, 2 * sum_j P[g_j] + residual)`.
///
/// This relies on every sub-module working with probability at least 1/2,
/// which is certified here by the union bound `sum_j P[g_j] <= 1/2`. When
/// the certificate fails no bound is emitted.
pub fn system_bound(bounds: &ModuleBoundSet) -> Result<ProbBound> {
    let sum = bounds.module_sum();
    if sum > 0.5 {
        return Err(CertError::AssumptionViolated { sum });
    }
    ProbBound::from_linear(2.0 * sum + bounds.residual.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(k: u64, m: u64) -> TrialSummary {
        TrialSummary::new(k, m).unwrap()
    }

    fn delta(d: f64) -> ConfidenceLevel {
        ConfidenceLevel::new(d).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn summary_invariants() {
        assert!(TrialSummary::new(0, 0).is_err());
        assert!(TrialSummary::new(3, 2).is_err());
        assert_eq!(summary(2, 8).empirical_rate(), 0.25);
        assert!(serde_json::from_str::<TrialSummary>(r#"{"failures":5,"trials":4}"#).is_err());
    }

    #[test]
    fn confidence_range() {
        assert!(ConfidenceLevel::new(0.0).is_err());
        assert!(ConfidenceLevel::new(1.5).is_err());
        assert!(ConfidenceLevel::new(f64::NAN).is_err());
        assert!(ConfidenceLevel::new(1.0).is_ok());
    }

    #[test]
    fn factors_invariants() {
        assert!(IndependenceFactors::new(vec![]).is_err());
        assert!(IndependenceFactors::new(vec![1.0, -0.1]).is_err());
        assert!(IndependenceFactors::new(vec![f64::INFINITY]).is_err());
    }

    // Expected values below were evaluated at 50 significant digits.
    #[test]
    fn bernstein_zero_failures() {
        let b = bernstein_upper_bound(&summary(0, 1000), delta(0.05)).unwrap();
        assert!(rel(b.value(), 0.011982929094215964) < 1e-13);
    }

    #[test]
    fn bernstein_with_failures() {
        let b = bernstein_upper_bound(&summary(10, 1000), delta(0.05)).unwrap();
        assert!(rel(b.value(), 0.029723384214625863) < 1e-13);
    }

    #[test]
    fn bernstein_delta_one_is_empirical_rate() {
        let b = bernstein_upper_bound(&summary(37, 100), delta(1.0)).unwrap();
        assert_eq!(b.value(), 0.37);
    }

    #[test]
    fn bernstein_clips_to_one() {
        let b = bernstein_upper_bound(&summary(5, 6), delta(0.01)).unwrap();
        assert_eq!(b, ProbBound::ONE);
    }

    #[test]
    fn composition_single_factor_matches_bernstein() {
        let s = summary(13, 977);
        let f = IndependenceFactors::new(vec![1.0]).unwrap();
        assert_eq!(
            composition_bound(&[s], &f, delta(0.03)).unwrap(),
            bernstein_upper_bound(&s, delta(0.03)).unwrap()
        );
    }

    #[test]
    fn composition_two_zero_failure_indicators() {
        let s = summary(0, 1_000_000);
        let f = IndependenceFactors::uniform(1.1, 2).unwrap();
        let b = composition_bound(&[s, s], &f, delta(0.05)).unwrap();
        assert!(rel(b.value(), 2.634_476_202_984_09e-10) < 1e-12);
    }

    #[test]
    fn composition_zero_factor_annihilates() {
        let f = IndependenceFactors::new(vec![2.0, 0.0, 1.0]).unwrap();
        let s = summary(40, 100);
        let b = composition_bound(&[s, s, s], &f, delta(0.1)).unwrap();
        assert!(b.is_zero());
        assert_eq!(b.value(), 0.0);
    }

    #[test]
    fn composition_errors() {
        let f = IndependenceFactors::uniform(1.0, 2).unwrap();
        assert!(composition_bound(&[], &f, delta(0.1)).is_err());
        assert!(composition_bound(&[summary(0, 5)], &f, delta(0.1)).is_err());
    }

    #[test]
    fn analytic_worked_example() {
        let f = IndependenceFactors::uniform(1.1, 3).unwrap();
        let b = conjunction_bound_analytic(&[1e-6; 3], &f).unwrap();
        assert!(rel(b.value(), 1.331e-18) < 1e-12);
        assert!(b.value() <= 1.34e-18);
        assert!((b.log_value().unwrap() - (1.331e-18f64).ln()).abs() <= 1e-9);
    }

    #[test]
    fn analytic_identities() {
        let ones = IndependenceFactors::uniform(1.0, 2).unwrap();
        let b = conjunction_bound_analytic(&[0.3, 0.5], &ones).unwrap();
        assert!((b.value() - 0.15).abs() < 1e-15);
        assert!(conjunction_bound_analytic(&[0.3], &ones).is_err());
        assert!(conjunction_bound_analytic(&[0.3, 1.2], &ones).is_err());
    }

    #[test]
    fn system_examples() {
        let b = system_bound(&ModuleBoundSet::from_values(&[0.1, 0.2], 0.01).unwrap()).unwrap();
        assert!((b.value() - 0.61).abs() < 1e-15);

        let b = system_bound(&ModuleBoundSet::from_values(&[], 0.2).unwrap()).unwrap();
        assert_eq!(b.value(), 0.2);

        match system_bound(&ModuleBoundSet::from_values(&[0.4, 0.2], 0.0).unwrap()) {
            Err(CertError::AssumptionViolated { sum }) => assert!((sum - 0.6).abs() < 1e-15),
            other => panic!("expected assumption violation, got {other:?}"),
        }
    }

    #[test]
    fn system_clips_to_one() {
        let b = system_bound(&ModuleBoundSet::from_values(&[0.5], 0.5).unwrap()).unwrap();
        assert_eq!(b, ProbBound::ONE);
    }
}
