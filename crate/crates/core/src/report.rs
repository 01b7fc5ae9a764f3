//! Certification reports and their JSON and text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{CertError, Result};
use crate::prob::ProbBound;
use crate::sample_complexity::{GapReport, PlanResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Certified,
    AssumptionViolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleMode {
    /// Indicator rates bounded from observed counts.
    Empirical,
    /// Indicator marginals supplied as known probabilities.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorReport {
    pub name: String,
    pub factor: f64,
    /// Where the indicator's data came from: `counts`, `log:<path>` or `analytic`.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failures: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<f64>,
    /// Confidence budget spent on this indicator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub bound: ProbBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleReport {
    pub name: String,
    pub mode: ModuleMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub indicators: Vec<IndicatorReport>,
    pub bound: ProbBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemReport {
    pub module_bound_sum: f64,
    pub residual: f64,
    pub residual_assumed_zero: bool,
    pub bound: ProbBound,
}

/// One entry of the assumption ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assumption {
    pub id: String,
    pub detail: String,
}

impl Assumption {
    pub fn new(id: &str, detail: impl Into<String>) -> Self {
        Assumption {
            id: id.to_owned(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDigests {
    /// Digest of the canonical JSON form of the scenario config.
    pub config_sha256: String,
    pub logs: Vec<FileDigest>,
}

/// Training-side sample estimate; never a certified bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingEstimate {
    pub vc_dimension: u64,
    pub samples: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationPlanReport {
    pub epsilon: f64,
    pub delta: f64,
    pub plan: PlanResult,
    pub e2e_validation_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_estimate: Option<TrainingEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificationReport {
    pub status: ReportStatus,
    pub tool_version: String,
    pub delta: f64,
    pub modules: Vec<ModuleReport>,
    /// Absent when the union-bound certificate failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemReport>,
    pub assumptions: Vec<Assumption>,
    pub inputs: InputDigests,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_plan: Option<ValidationPlanReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Text,
}

/// Probabilities below 1e-4 in scientific notation with 6 significant digits.
pub fn format_probability(p: f64) -> String {
    if p != 0.0 && p.abs() < 1e-4 {
        format!("{p:.5e}")
    } else {
        format!("{p:.6}")
    }
}

/// Pretty JSON with object keys in sorted order and a trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value).map_err(|e| CertError::validation(e.to_string()))?;
    let mut s =
        serde_json::to_string_pretty(&value).map_err(|e| CertError::validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn emit_report(report: &CertificationReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_sorted_json(report).expect("reports serialize"),
        OutputFormat::Text => render_text(report),
    }
}

pub fn parse_report(json: &str) -> Result<CertificationReport> {
    serde_json::from_str(json).map_err(|e| CertError::parse(e.line(), e.to_string()))
}

fn render_text(r: &CertificationReport) -> String {
    let mut out = String::new();
    let status = match r.status {
        ReportStatus::Certified => "certified",
        ReportStatus::AssumptionViolated => "assumption_violated",
    };
    let _ = writeln!(
        out,
        "modcert certification report (tool {})",
        r.tool_version
    );
    let _ = writeln!(out, "status: {status}");
    let _ = writeln!(out, "delta:  {}", r.delta);
    let _ = writeln!(out);

    let _ = writeln!(
        out,
        "{:<16} {:<16} {:>8} {:>16} {:>12} {:>14}",
        "module", "indicator", "factor", "failures/trials", "delta", "bound"
    );
    for m in &r.modules {
        for ind in &m.indicators {
            let counts = match (ind.failures, ind.trials, ind.marginal) {
                (Some(k), Some(n), _) => format!("{k}/{n}"),
                (_, _, Some(p)) => format!("p={}", format_probability(p)),
                _ => "-".to_owned(),
            };
            let delta = ind.delta.map_or("-".to_owned(), |d| format!("{d:.4e}"));
            let _ = writeln!(
                out,
                "{:<16} {:<16} {:>8} {:>16} {:>12} {:>14}",
                m.name,
                ind.name,
                ind.factor,
                counts,
                delta,
                format_probability(ind.bound.value())
            );
        }
        let _ = writeln!(
            out,
            "{:<16} {:<16} {:>8} {:>16} {:>12} {:>14}",
            m.name,
            "(module)",
            "",
            "",
            m.delta.map_or("-".to_owned(), |d| format!("{d:.4e}")),
            format_probability(m.bound.value())
        );
    }
    let _ = writeln!(out);

    match &r.system {
        Some(s) => {
            let _ = writeln!(
                out,
                "system bound: 2 x {} + {} = {}",
                format_probability(s.module_bound_sum),
                format_probability(s.residual),
                format_probability(s.bound.value())
            );
        }
        None => {
            let _ = writeln!(
                out,
                "system bound: withheld (union-bound certificate failed)"
            );
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "assumptions:");
    for a in &r.assumptions {
        if a.id == "residual-assumed-zero" {
            let _ = writeln!(out, "  WARNING [{}] {}", a.id, a.detail);
        } else {
            let _ = writeln!(out, "  [{}] {}", a.id, a.detail);
        }
    }

    if let Some(v) = &r.validation_plan {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "end-to-end validation (eps={}, delta={}): {} samples, declare good iff failures <= {} (alpha={:.4}, beta={:.4}); floor 1/(2 eps) = {}",
            v.epsilon,
            v.delta,
            v.plan.samples_required,
            v.plan.decision_threshold,
            v.plan.achieved_alpha,
            v.plan.achieved_beta,
            v.e2e_validation_floor
        );
        if let Some(t) = &v.training_estimate {
            let _ = writeln!(
                out,
                "training estimate (VC={}): {:.3e} samples [{}]",
                t.vc_dimension, t.samples, t.label
            );
        }
    }
    if let Some(g) = &r.gap {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "gap: {} samples per indicator ({} total) vs end-to-end floor {:.4e}; ratio {:.4e}",
            g.modular_samples_per_indicator,
            g.modular_samples_total,
            g.e2e_validation_floor,
            g.ratio
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_formatting() {
        assert_eq!(format_probability(1.331e-18), "1.33100e-18");
        assert_eq!(format_probability(0.0239659), "0.023966");
        assert_eq!(format_probability(0.0), "0.000000");
        assert_eq!(format_probability(9.99e-5), "9.99000e-5");
    }

    #[test]
    fn sorted_keys() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let s = to_sorted_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }
}
