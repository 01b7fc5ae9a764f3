//! Sample-size planning for end-to-end validation versus modular certification.
//!
//! End-to-end validation has to tell a failure rate of at most `eps` apart
//! from one of at least `2 eps`, which needs on the order of `1/eps` examples.
//! Modular certification only needs each indicator's rate to be bounded, and
//! the product of those bounds shrinks exponentially with the number of
//! indicators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{composition_bound, ConfidenceLevel, IndependenceFactors, TrialSummary};
use crate::error::{CertError, Result};
use crate::prob::ProbBound;

/// Default hard cap on any sample size returned by a planner.
pub const DEFAULT_SAMPLE_CAP: u64 = 1_000_000_000;

/// Expected number of examples before the first failure at rate `2 eps`,
/// i.e. `1 / (2 eps)`. Fewer examples than this cannot separate `eps` from
/// `2 eps`, so end-to-end validation needs `Omega(1/eps)` samples.
pub fn e2e_validation_lower_bound(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CertError::validation(format!(
            "epsilon {epsilon} outside (0, 1)"
        )));
    }
    Ok(1.0 / (2.0 * epsilon))
}

/// Order-of-magnitude training sample estimate `d / eps` for a loss class of
/// VC dimension `d`, ignoring constants and log factors. Heuristic only.
pub fn vc_training_bound(vc_dimension: u64, epsilon: f64) -> Result<f64> {
    if vc_dimension == 0 {
        return Err(CertError::validation("VC dimension must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CertError::validation(format!(
            "epsilon {epsilon} outside (0, 1)"
        )));
    }
    Ok(vc_dimension as f64 / epsilon)
}

/// Distinguish failure rate `<= epsilon` from `>= 2 epsilon`, with error
/// probability at most `delta` on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationTask {
    epsilon: f64,
    delta: f64,
}

impl ValidationTask {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(CertError::validation(format!(
                "epsilon {epsilon} outside (0, 0.5)"
            )));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(CertError::validation(format!(
                "delta {delta} outside (0, 0.5)"
            )));
        }
        Ok(ValidationTask { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// A threshold test: observe `samples_required` examples and declare the
/// system good iff at most `decision_threshold` of them fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub samples_required: u64,
    pub decision_threshold: u64,
    /// `P[Bin(m, 2 eps) <= k]`: declaring a bad system good.
    pub achieved_alpha: f64,
    /// `P[Bin(m, eps) > k]`: declaring a good system bad.
    pub achieved_beta: f64,
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    acc: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            acc: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.acc = self.acc * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.acc += (x - self.max).exp();
        }
    }

    fn ln(&self) -> f64 {
        if self.acc == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.ln()
        }
    }
}

/// Terms smaller than this fraction of the running sum no longer change it.
const TAIL_CUTOFF_LN: f64 = -43.0;

/// `ln C(m, k)` as a sum of `min(k, m-k)` logs; exact to rounding for the
/// small thresholds these tests use.
pub(crate) fn ln_choose(m: u64, k: u64) -> f64 {
    debug_assert!(k <= m);
    let k = k.min(m - k);
    let base = (m - k) as f64;
    (1..=k).map(|i| ((base + i as f64) / i as f64).ln()).sum()
}

pub(crate) fn ln_binomial_pmf(m: u64, k: u64, p: f64) -> f64 {
    ln_choose(m, k) + k as f64 * p.ln() + (m - k) as f64 * (-p).ln_1p()
}

/// `ln P[Bin(m, p) <= k]`. Each tail is summed outward from `k`, away from
/// the mode, so the recurrence runs over shrinking terms and stops once they
/// are negligible; a tail that contains the mode is taken as the complement
/// of the other one.
pub(crate) fn ln_lower_tail(m: u64, k: u64, p: f64) -> f64 {
    if k >= m {
        return 0.0;
    }
    if k >= mode(m, p) {
        return (-ln_upper_walk(m, k, p).exp()).ln_1p();
    }
    ln_lower_walk(m, k, p)
}

/// `ln P[Bin(m, p) > k]`.
pub(crate) fn ln_upper_tail(m: u64, k: u64, p: f64) -> f64 {
    if k >= m {
        return f64::NEG_INFINITY;
    }
    if k < mode(m, p) {
        return (-ln_lower_walk(m, k, p).exp()).ln_1p();
    }
    ln_upper_walk(m, k, p)
}

fn mode(m: u64, p: f64) -> u64 {
    (((m + 1) as f64 * p).floor() as u64).min(m)
}

fn ln_lower_walk(m: u64, k: u64, p: f64) -> f64 {
    let ln_odds = (p / (1.0 - p)).ln();
    let mut term = ln_binomial_pmf(m, k, p);
    let mut sum = LogSum::new();
    let mut j = k;
    loop {
        sum.add(term);
        if j == 0 || term - sum.ln() < TAIL_CUTOFF_LN {
            break;
        }
        // pmf(j-1) = pmf(j) * j / (m-j+1) * (1-p)/p
        term += (j as f64 / (m - j + 1) as f64).ln() - ln_odds;
        j -= 1;
    }
    sum.ln()
}

fn ln_upper_walk(m: u64, k: u64, p: f64) -> f64 {
    let ln_odds = (p / (1.0 - p)).ln();
    let mut j = k + 1;
    let mut term = ln_binomial_pmf(m, j, p);
    let mut sum = LogSum::new();
    loop {
        sum.add(term);
        if j == m || term - sum.ln() < TAIL_CUTOFF_LN {
            break;
        }
        term += ((m - j) as f64 / (j + 1) as f64).ln() + ln_odds;
        j += 1;
    }
    sum.ln()
}

impl ValidationTask {
    fn beta(&self, m: u64, k: u64) -> f64 {
        ln_upper_tail(m, k, self.epsilon).exp()
    }

    fn alpha(&self, m: u64, k: u64) -> f64 {
        ln_lower_tail(m, k, 2.0 * self.epsilon).exp()
    }

    /// Smallest threshold with `beta <= delta`, searched from `hint`.
    fn min_threshold(&self, m: u64, hint: u64) -> u64 {
        let mut k = hint.min(m);
        while self.beta(m, k) > self.delta {
            k += 1;
        }
        while k > 0 && self.beta(m, k - 1) <= self.delta {
            k -= 1;
        }
        k
    }

    /// The best threshold test at sample size `m`, if both errors fit.
    /// `alpha` grows and `beta` shrinks with `k`, so the smallest threshold
    /// meeting the `beta` constraint is the only candidate worth checking.
    fn evaluate(&self, m: u64, hint: u64) -> (u64, Option<PlanResult>) {
        let k = self.min_threshold(m, hint);
        let alpha = self.alpha(m, k);
        let plan = (alpha <= self.delta).then(|| PlanResult {
            samples_required: m,
            decision_threshold: k,
            achieved_alpha: alpha,
            achieved_beta: self.beta(m, k),
        });
        (k, plan)
    }

    fn evaluate_fresh(&self, m: u64) -> Option<PlanResult> {
        self.evaluate(m, (m as f64 * self.epsilon).floor() as u64).1
    }

    /// Any test must have `(1 - 2 eps)^m <= alpha <= delta`.
    fn necessary_samples(&self) -> u64 {
        let bound = self.delta.ln() / (-2.0 * self.epsilon).ln_1p();
        (bound.floor() as u64).saturating_sub(1).max(1)
    }
}

const SCAN_CHUNK: u64 = 1024;

/// Minimal sample size for the threshold test of `task`, capped at
/// [`DEFAULT_SAMPLE_CAP`].
pub fn validation_sample_size(task: &ValidationTask) -> Result<PlanResult> {
    validation_sample_size_with_cap(task, DEFAULT_SAMPLE_CAP)
}

/// Minimal `m` for which some threshold keeps both exact binomial error
/// probabilities at most `delta`; ties broken by the smallest threshold.
///
/// Feasibility is not monotone in `m` (the discrete tails give a sawtooth),
/// so doubling and bisection only locate a feasible upper bracket. The
/// minimum is then found by scanning every `m` from the necessary lower
/// bound, in parallel chunks whose first hit is order-independent.
pub fn validation_sample_size_with_cap(task: &ValidationTask, cap: u64) -> Result<PlanResult> {
    let start = task.necessary_samples();
    if start > cap {
        return Err(CertError::Capacity {
            message: format!("validation needs more than {cap} samples"),
            achieved_bound: None,
        });
    }

    let mut infeasible = start - 1;
    let mut hi = start;
    let upper = loop {
        if let Some(plan) = task.evaluate_fresh(hi) {
            break plan;
        }
        if hi >= cap {
            return Err(CertError::Capacity {
                message: format!("no threshold test with at most {cap} samples meets delta"),
                achieved_bound: None,
            });
        }
        infeasible = hi;
        hi = hi.saturating_mul(2).min(cap);
    };

    let mut upper = upper;
    let mut lo = infeasible;
    while upper.samples_required - lo > 1 {
        let mid = lo + (upper.samples_required - lo) / 2;
        match task.evaluate_fresh(mid) {
            Some(plan) => upper = plan,
            None => lo = mid,
        }
    }

    let scan_end = upper.samples_required;
    let chunks = (scan_end - start).div_ceil(SCAN_CHUNK);
    let first = (0..chunks).into_par_iter().find_map_first(|c| {
        let from = start + c * SCAN_CHUNK;
        let to = (from + SCAN_CHUNK).min(scan_end);
        let mut hint = (from as f64 * task.epsilon).floor() as u64;
        for m in from..to {
            let (k, plan) = task.evaluate(m, hint);
            if plan.is_some() {
                return plan;
            }
            hint = k;
        }
        None
    });
    Ok(first.unwrap_or(upper))
}

/// A modular certification target: bound the conjunction of `module_count`
/// indicators, each `uniform_factor`-approximately independent of the ones
/// before it, below `target_failure_prob` with confidence `1 - delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapScenario {
    pub target_failure_prob: f64,
    pub module_count: usize,
    pub uniform_factor: f64,
    pub delta: f64,
    /// Failure rates assumed to be observed per indicator; all zero if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumed_observed_rates: Option<Vec<f64>>,
}

impl GapScenario {
    pub fn new(
        target_failure_prob: f64,
        module_count: usize,
        uniform_factor: f64,
        delta: f64,
    ) -> Self {
        GapScenario {
            target_failure_prob,
            module_count,
            uniform_factor,
            delta,
            assumed_observed_rates: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_failure_prob > 0.0 && self.target_failure_prob < 1.0) {
            return Err(CertError::validation(format!(
                "target failure probability {} outside (0, 1)",
                self.target_failure_prob
            )));
        }
        if self.module_count == 0 {
            return Err(CertError::validation("module count must be at least 1"));
        }
        if !(self.uniform_factor.is_finite() && self.uniform_factor >= 1.0) {
            return Err(CertError::validation(format!(
                "uniform factor {} must be >= 1",
                self.uniform_factor
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CertError::validation(format!(
                "delta {} outside (0, 1)",
                self.delta
            )));
        }
        if let Some(rates) = &self.assumed_observed_rates {
            if rates.len() != self.module_count {
                return Err(CertError::validation(format!(
                    "{} assumed rates for {} indicators",
                    rates.len(),
                    self.module_count
                )));
            }
            if let Some(bad) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(CertError::validation(format!(
                    "assumed rate {bad} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    fn rate(&self, t: usize) -> f64 {
        self.assumed_observed_rates.as_ref().map_or(0.0, |r| r[t])
    }

    /// Composition bound when every indicator has `m` samples and
    /// `round(rate * m)` failures.
    pub fn bound_at(&self, m: u64) -> Result<ProbBound> {
        self.validate()?;
        let summaries = (0..self.module_count)
            .map(|t| {
                let k = ((self.rate(t) * m as f64).round() as u64).min(m);
                TrialSummary::new(k, m)
            })
            .collect::<Result<Vec<_>>>()?;
        let factors = IndependenceFactors::uniform(self.uniform_factor, self.module_count)?;
        composition_bound(&summaries, &factors, ConfidenceLevel::new(self.delta)?)
    }

    /// Zero-failure closed form `4 c ln(T/delta) / target^(1/T)`.
    pub fn zero_rate_closed_form(&self) -> f64 {
        let t = self.module_count as f64;
        4.0 * self.uniform_factor * (t / self.delta).ln() / self.target_failure_prob.powf(1.0 / t)
    }
}

/// Minimal per-indicator sample count whose composition bound meets the
/// target, capped at [`DEFAULT_SAMPLE_CAP`].
pub fn modular_certification_plan(scenario: &GapScenario) -> Result<u64> {
    modular_certification_plan_with_cap(scenario, DEFAULT_SAMPLE_CAP)
}

/// Binary search over `m`; the bound is nonincreasing in `m` at fixed rates.
pub fn modular_certification_plan_with_cap(scenario: &GapScenario, cap: u64) -> Result<u64> {
    scenario.validate()?;
    let target = scenario.target_failure_prob;
    if scenario.bound_at(1)?.value() <= target {
        return Ok(1);
    }
    let at_cap = scenario.bound_at(cap)?;
    if at_cap.value() > target {
        return Err(CertError::Capacity {
            message: format!(
                "bound {:e} at {cap} samples still above target {target:e}",
                at_cap.value()
            ),
            achieved_bound: Some(at_cap.value()),
        });
    }
    let (mut lo, mut hi) = (1u64, cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if scenario.bound_at(mid)?.value() <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// End-to-end validation floor next to the modular certification cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub scenario: GapScenario,
    /// Samples needed per indicator.
    pub modular_samples_per_indicator: u64,
    /// `T * m`, the cost if every indicator were labeled on separate data.
    pub modular_samples_total: u64,
    pub modular_bound_achieved: ProbBound,
    /// `1 / (2 * target)`.
    pub e2e_validation_floor: f64,
    /// `e2e_validation_floor / modular_samples_per_indicator`, unclamped.
    pub ratio: f64,
}

pub fn gap_report(scenario: &GapScenario) -> Result<GapReport> {
    let m = modular_certification_plan(scenario)?;
    let floor = e2e_validation_lower_bound(scenario.target_failure_prob)?;
    Ok(GapReport {
        scenario: scenario.clone(),
        modular_samples_per_indicator: m,
        modular_samples_total: m.saturating_mul(scenario.module_count as u64),
        modular_bound_achieved: scenario.bound_at(m)?,
        e2e_validation_floor: floor,
        ratio: floor / m as f64,
    })
}
