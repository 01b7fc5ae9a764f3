use serde::{Deserialize, Serialize};

use crate::error::{CertError, Result};

pub const MAX_INDICATORS: usize = 20;

/// Tolerance on the total mass of a probability table.
pub const TABLE_SUM_TOLERANCE: f64 = 1e-12;

/// Exact joint law of `T` binary failure indicators, stored as a table of
/// `2^T` outcome probabilities.
///
/// Outcome index `b` encodes indicator `t` in bit `t`, so indicator 0 is the
/// least significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct JointIndicatorModel {
    indicator_count: usize,
    probabilities: Vec<f64>,
}

fn check_rate(what: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CertError::validation(format!("{what} {p} outside [0, 1]")))
    }
}

fn check_count(t: usize) -> Result<()> {
    if (1..=MAX_INDICATORS).contains(&t) {
        Ok(())
    } else {
        Err(CertError::validation(format!(
            "indicator count {t} outside [1, {MAX_INDICATORS}]"
        )))
    }
}

fn independent_table(rates: &[f64]) -> Vec<f64> {
    let mut table = vec![1.0];
    for &p in rates {
        // Doubling keeps bit t for indicator t: new entries with bit t set go to the upper half.
        let lower: Vec<f64> = table.iter().map(|q| q * (1.0 - p)).collect();
        let upper: Vec<f64> = table.iter().map(|q| q * p).collect();
        table = lower;
        table.extend(upper);
    }
    table
}

impl JointIndicatorModel {
    pub fn from_table(indicator_count: usize, probabilities: Vec<f64>) -> Result<Self> {
        check_count(indicator_count)?;
        if probabilities.len() != 1 << indicator_count {
            return Err(CertError::validation(format!(
                "table has {} entries, expected {}",
                probabilities.len(),
                1usize << indicator_count
            )));
        }
        if let Some(bad) = probabilities
            .iter()
            .find(|p| !(p.is_finite() && **p >= 0.0))
        {
            return Err(CertError::validation(format!(
                "table entry {bad} is not a probability"
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > TABLE_SUM_TOLERANCE {
            return Err(CertError::validation(format!(
                "table sums to {total}, not 1"
            )));
        }
        Ok(JointIndicatorModel {
            indicator_count,
            probabilities,
        })
    }

    /// Independent indicators with the given marginals.
    pub fn independent(marginals: &[f64]) -> Result<Self> {
        check_count(marginals.len())?;
        for &p in marginals {
            check_rate("marginal", p)?;
        }
        Self::from_table(marginals.len(), independent_table(marginals))
    }

    /// With probability `q` a common fault makes every indicator fire
    /// independently at its `fault_rates` entry; otherwise at `base_rates`.
    /// Mixing positively correlates the indicators.
    pub fn common_cause(q: f64, base_rates: &[f64], fault_rates: &[f64]) -> Result<Self> {
        check_rate("mixture weight", q)?;
        if base_rates.len() != fault_rates.len() {
            return Err(CertError::validation(format!(
                "{} base rates but {} fault rates",
                base_rates.len(),
                fault_rates.len()
            )));
        }
        check_count(base_rates.len())?;
        for &p in base_rates.iter().chain(fault_rates) {
            check_rate("rate", p)?;
        }
        let table = independent_table(base_rates)
            .into_iter()
            .zip(independent_table(fault_rates))
            .map(|(b, f)| q * f + (1.0 - q) * b)
            .collect();
        Self::from_table(base_rates.len(), table)
    }

    pub fn indicator_count(&self) -> usize {
        self.indicator_count
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability_of(&self, outcome: &[bool]) -> Option<f64> {
        if outcome.len() != self.indicator_count {
            return None;
        }
        let index = outcome
            .iter()
            .enumerate()
            .fold(0usize, |acc, (t, &b)| acc | (usize::from(b) << t));
        Some(self.probabilities[index])
    }

    /// Sum of table entries whose outcome has every bit in `mask` set.
    fn mass_with(&self, mask: usize) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(b, _)| b & mask == mask)
            .map(|(_, p)| p)
            .sum()
    }

    /// Marginals, conjunction probability and the exact independence factors
    /// `c_t = P[z_t | z_1 .. z_{t-1}] / P[z_t]` in the given indicator order.
    ///
    /// `c_1` is 1. When the conditioning prefix or the marginal has zero
    /// mass, `c_t` is reported as 1 and flagged as degenerate; the
    /// conjunction probability is then 0.
    pub fn exact_statistics(&self) -> ExactStatistics {
        let t_count = self.indicator_count;
        let marginals: Vec<f64> = (0..t_count).map(|t| self.mass_with(1 << t)).collect();
        let prefixes: Vec<f64> = (1..=t_count)
            .map(|t| self.mass_with((1 << t) - 1))
            .collect();

        let mut factors = Vec::with_capacity(t_count);
        let mut degenerate = Vec::with_capacity(t_count);
        for t in 0..t_count {
            let prev = if t == 0 { 1.0 } else { prefixes[t - 1] };
            if prev == 0.0 || marginals[t] == 0.0 {
                factors.push(1.0);
                degenerate.push(true);
            } else if t == 0 {
                factors.push(1.0);
                degenerate.push(false);
            } else {
                factors.push(prefixes[t] / prev / marginals[t]);
                degenerate.push(false);
            }
        }

        ExactStatistics {
            marginals,
            conjunction_prob: prefixes[t_count - 1],
            independence_factors: factors,
            degenerate_conditioning: degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactStatistics {
    pub marginals: Vec<f64>,
    /// `P[z_1 = .. = z_T = 1]`.
    pub conjunction_prob: f64,
    pub independence_factors: Vec<f64>,
    pub degenerate_conditioning: Vec<bool>,
}

impl ExactStatistics {
    pub fn any_degenerate(&self) -> bool {
        self.degenerate_conditioning.iter().any(|&d| d)
    }

    /// `prod_t c_t * marginal_t`, equal to the conjunction probability when
    /// no factor is degenerate.
    pub fn telescoped_product(&self) -> f64 {
        self.independence_factors
            .iter()
            .zip(&self.marginals)
            .map(|(c, p)| c * p)
            .product()
    }
}

/// Model specification file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Independent {
        marginals: Vec<f64>,
    },
    CommonCause {
        q: f64,
        base_rates: Vec<f64>,
        fault_rates: Vec<f64>,
    },
    Table {
        indicator_count: usize,
        probabilities: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<JointIndicatorModel> {
        match self {
            ModelSpec::Independent { marginals } => JointIndicatorModel::independent(marginals),
            ModelSpec::CommonCause {
                q,
                base_rates,
                fault_rates,
            } => JointIndicatorModel::common_cause(*q, base_rates, fault_rates),
            ModelSpec::Table {
                indicator_count,
                probabilities,
            } => JointIndicatorModel::from_table(*indicator_count, probabilities.clone()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CertError::parse(e.line(), e.to_string()))
    }
}
