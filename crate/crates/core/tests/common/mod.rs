#![allow(dead_code)]

use std::path::PathBuf;

use modcert::simulation::rng::SimRng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn rel_err(actual: f64, expected: f64) -> f64 {
    ((actual - expected) / expected).abs()
}

/// Random joint table over `t` indicators with every entry strictly positive,
/// so every prefix conjunction has positive probability. Entries are skewed
/// (cubed uniforms) so that the factors stray well away from 1.
pub fn random_positive_table(rng: &mut SimRng, t: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..1usize << t)
        .map(|_| 1e-3 + rng.next_f64().powi(3))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Marginals and prefix-conjunction probabilities by direct enumeration of
/// the table (indicator `i` is bit `i` of the outcome index).
pub struct EnumeratedStats {
    pub marginals: Vec<f64>,
    pub prefixes: Vec<f64>,
}

impl EnumeratedStats {
    pub fn of(t: usize, table: &[f64]) -> Self {
        let mut marginals = vec![0.0; t];
        let mut prefixes = vec![0.0; t];
        for (outcome, &p) in table.iter().enumerate() {
            for i in 0..t {
                if outcome & (1 << i) != 0 {
                    marginals[i] += p;
                }
                let mask = (1usize << (i + 1)) - 1;
                if outcome & mask == mask {
                    prefixes[i] += p;
                }
            }
        }
        EnumeratedStats {
            marginals,
            prefixes,
        }
    }

    /// `c_t = P[z_t | z_1..z_{t-1}] / P[z_t]`.
    pub fn factors(&self) -> Vec<f64> {
        (0..self.marginals.len())
            .map(|i| {
                let conditional = if i == 0 {
                    self.marginals[0]
                } else {
                    self.prefixes[i] / self.prefixes[i - 1]
                };
                conditional / self.marginals[i]
            })
            .collect()
    }

    pub fn conjunction(&self) -> f64 {
        *self.prefixes.last().unwrap()
    }
}

/// Next binomial pmf row: `Bin(m+1, p)` from `Bin(m, p)`.
fn convolve(row: &[f64], p: f64) -> Vec<f64> {
    let mut next = vec![0.0; row.len() + 1];
    for (j, &v) in row.iter().enumerate() {
        next[j] += v * (1.0 - p);
        next[j + 1] += v * p;
    }
    next
}

/// Smallest `(m, k)` such that declaring "good" iff at most `k` failures
/// are seen among `m` samples has both error rates at most `delta`:
/// `P[Bin(m, eps) > k] <= delta` and `P[Bin(m, 2 eps) <= k] <= delta`.
/// Exhaustive over every `m` from 1 and every `k`, with the pmf built by
/// repeated convolution.
pub fn brute_force_plan(eps: f64, delta: f64, max_m: usize) -> Option<(u64, u64)> {
    let mut good = vec![1.0];
    let mut bad = vec![1.0];
    for m in 1..=max_m {
        good = convolve(&good, eps);
        bad = convolve(&bad, 2.0 * eps);
        // beta[k] = P[good > k], summed from the top
        let mut beta = vec![0.0; m + 1];
        for k in (0..m).rev() {
            beta[k] = beta[k + 1] + good[k + 1];
        }
        let mut alpha = 0.0;
        for k in 0..=m {
            alpha += bad[k];
            if beta[k] <= delta && alpha <= delta {
                return Some((m as u64, k as u64));
            }
        }
    }
    None
}
