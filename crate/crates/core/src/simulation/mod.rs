//! Ground-truth oracle and Monte Carlo verification harness.
//!
//! A [`JointIndicatorModel`] is an explicit outcome table, so every quantity
//! the bounds talk about (marginals, the conjunction probability, the exact
//! independence factors) is available by enumeration. Sampling from the model
//! and re-running the bounds many times measures their empirical coverage.

mod model;
pub mod rng;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use model::{
    ExactStatistics, JointIndicatorModel, ModelSpec, MAX_INDICATORS, TABLE_SUM_TOLERANCE,
};
use rng::{mix, SimRng};

use crate::bounds::{composition_bound, ConfidenceLevel, IndependenceFactors, TrialSummary};
use crate::error::{CertError, Result};
use crate::log::IndicatorLog;

/// Default cap on the number of trials of a coverage experiment.
pub const DEFAULT_TRIAL_CAP: u64 = 1_000_000;

/// Inverse-CDF sampler over a model's outcome table.
struct OutcomeSampler {
    cumulative: Vec<f64>,
    total: f64,
    last_positive: usize,
}

impl OutcomeSampler {
    fn new(model: &JointIndicatorModel) -> Self {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = model
            .probabilities()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = model
            .probabilities()
            .iter()
            .rposition(|&p| p > 0.0)
            .expect("a valid table has positive mass");
        OutcomeSampler {
            total: acc,
            cumulative,
            last_positive,
        }
    }

    fn draw(&self, rng: &mut SimRng) -> usize {
        let u = rng.next_f64() * self.total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.last_positive)
    }
}

/// `m` independent draws from `model`, reproducible from `seed`.
pub fn sample(model: &JointIndicatorModel, m: u64, seed: u64) -> Result<IndicatorLog> {
    if m == 0 {
        return Err(CertError::validation("sample size must be positive"));
    }
    let sampler = OutcomeSampler::new(model);
    let mut rng = SimRng::new(seed);
    let t_count = model.indicator_count();
    let width = m.to_string().len();
    let mut ids = Vec::with_capacity(m as usize);
    let mut rows = Vec::with_capacity(m as usize);
    for i in 0..m {
        let outcome = sampler.draw(&mut rng);
        rows.push((0..t_count).map(|t| outcome >> t & 1 == 1).collect());
        ids.push(format!("s{i:0width$}"));
    }
    let names = (1..=t_count).map(|t| format!("z{t}")).collect();
    IndicatorLog::new(names, ids, rows)
}

/// Per-indicator failure counts of `m` draws; the same stream as [`sample`].
fn sample_counts(sampler: &OutcomeSampler, t_count: usize, m: u64, seed: u64) -> Vec<u64> {
    let mut rng = SimRng::new(seed);
    let mut counts = vec![0u64; t_count];
    for _ in 0..m {
        let outcome = sampler.draw(&mut rng);
        for (t, c) in counts.iter_mut().enumerate() {
            *c += (outcome >> t & 1) as u64;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub trials: u64,
    /// Trials whose bound fell below the true conjunction probability.
    pub violations: u64,
    pub coverage: f64,
    pub base_seed: u64,
}

/// Parameters of a coverage run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub samples: u64,
    pub delta: f64,
    pub trials: u64,
    pub base_seed: u64,
}

/// Repeatedly sample `samples` examples, bound the conjunction with the
/// model's exact independence factors, and count how often the bound falls
/// below the true conjunction probability. For one indicator this is the
/// coverage of the single-indicator Bernstein bound.
///
/// Trial `i` uses seed `mix(base_seed, i)`, so the count does not depend on
/// how trials are spread across threads.
pub fn coverage_experiment(
    model: &JointIndicatorModel,
    config: &CoverageConfig,
) -> Result<CoverageResult> {
    coverage_experiment_with_cap(model, config, DEFAULT_TRIAL_CAP)
}

pub fn coverage_experiment_with_cap(
    model: &JointIndicatorModel,
    config: &CoverageConfig,
    trial_cap: u64,
) -> Result<CoverageResult> {
    if config.samples == 0 {
        return Err(CertError::validation("sample size must be positive"));
    }
    if config.trials == 0 {
        return Err(CertError::validation("at least one trial required"));
    }
    if config.trials > trial_cap {
        return Err(CertError::Capacity {
            message: format!("{} trials exceed the cap of {trial_cap}", config.trials),
            achieved_bound: None,
        });
    }
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(CertError::validation(format!(
            "delta {} outside (0, 1)",
            config.delta
        )));
    }
    let confidence = ConfidenceLevel::new(config.delta)?;
    let stats = model.exact_statistics();
    let factors = IndependenceFactors::new(stats.independence_factors.clone())?;
    let truth = stats.conjunction_prob;
    let sampler = OutcomeSampler::new(model);
    let t_count = model.indicator_count();

    let violations = (0..config.trials)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let counts = sample_counts(&sampler, t_count, config.samples, mix(config.base_seed, i));
            let summaries = counts
                .into_iter()
                .map(|k| TrialSummary::new(k, config.samples))
                .collect::<Result<Vec<_>>>()?;
            let bound = composition_bound(&summaries, &factors, confidence)?;
            Ok(u64::from(bound.value() < truth))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    Ok(CoverageResult {
        trials: config.trials,
        violations,
        coverage: 1.0 - violations as f64 / config.trials as f64,
        base_seed: config.base_seed,
    })
}
