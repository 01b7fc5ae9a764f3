//! Declarative certification scenarios and the pipeline that evaluates them.
//!
//! A scenario lists sub-modules, each the conjunction of one or more failure
//! indicators with an approximate-independence factor. Indicators carry
//! either failure counts, a reference to a log, or (in analytic mode) a known
//! marginal. The pipeline bounds every indicator, composes the bounds per
//! module, and combines modules into a system bound.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    bernstein_upper_bound, composition_bound, conjunction_bound_analytic, system_bound,
    ConfidenceLevel, IndependenceFactors, ModuleBoundSet, TrialSummary,
};
use crate::error::{CertError, Result};
use crate::log::{ingest_log, IndicatorLog, LogFormat};
use crate::prob::ProbBound;
use crate::report::{
    Assumption, CertificationReport, FileDigest, IndicatorReport, InputDigests, ModuleMode,
    ModuleReport, ReportStatus, SystemReport, TrainingEstimate, ValidationPlanReport, TOOL_VERSION,
};
use crate::sample_complexity::{
    e2e_validation_lower_bound, gap_report, validation_sample_size, vc_training_bound, GapScenario,
    ValidationTask,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub delta: f64,
    pub modules: Vec<ModuleConfig>,
    /// `P[system fails | all sub-modules work]`; taken as 0 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapScenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleConfig {
    pub name: String,
    pub indicators: Vec<IndicatorConfig>,
}

/// Exactly one of `counts`, `log` or `marginal` must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorConfig {
    pub name: String,
    pub factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<TrialSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<LogRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRef {
    /// Relative paths resolve against the config file's directory.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<LogFormat>,
    /// Column to read; defaults to the indicator name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanParams {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vc_dimension: Option<u64>,
}

enum Source<'a> {
    Counts(TrialSummary),
    Log(&'a LogRef),
    Marginal(f64),
}

impl IndicatorConfig {
    fn source(&self) -> Result<Source<'_>> {
        match (&self.counts, &self.log, self.marginal) {
            (Some(c), None, None) => Ok(Source::Counts(*c)),
            (None, Some(l), None) => Ok(Source::Log(l)),
            (None, None, Some(p)) => Ok(Source::Marginal(p)),
            _ => Err(CertError::validation(format!(
                "indicator {:?} must set exactly one of counts, log, marginal",
                self.name
            ))),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| CertError::parse(e.line(), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CertError::validation(format!(
                "unsupported schema_version {}; expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        ConfidenceLevel::new(self.delta)?;
        if self.modules.is_empty() {
            return Err(CertError::validation("scenario needs at least one module"));
        }
        if let Some(r) = self.residual {
            if !(0.0..=1.0).contains(&r) {
                return Err(CertError::validation(format!(
                    "residual {r} outside [0, 1]"
                )));
            }
        }
        let mut module_names = std::collections::HashSet::new();
        for m in &self.modules {
            if !module_names.insert(m.name.as_str()) {
                return Err(CertError::validation(format!(
                    "duplicate module name {:?}",
                    m.name
                )));
            }
            if m.indicators.is_empty() {
                return Err(CertError::validation(format!(
                    "module {:?} has no indicators",
                    m.name
                )));
            }
            let mut analytic = 0;
            for ind in &m.indicators {
                if !(ind.factor.is_finite() && ind.factor >= 0.0) {
                    return Err(CertError::validation(format!(
                        "indicator {:?} has invalid factor {}",
                        ind.name, ind.factor
                    )));
                }
                if let Source::Marginal(p) = ind.source()? {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(CertError::validation(format!(
                            "indicator {:?} marginal {p} outside [0, 1]",
                            ind.name
                        )));
                    }
                    analytic += 1;
                }
            }
            if analytic != 0 && analytic != m.indicators.len() {
                return Err(CertError::validation(format!(
                    "module {:?} mixes analytic marginals with observed data",
                    m.name
                )));
            }
        }
        Ok(())
    }

    fn canonical_digest(&self) -> String {
        let bytes = serde_json::to_vec(&serde_json::to_value(self).expect("config serializes"))
            .expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Logs loaded once per path, with their digests.
struct LogCache {
    base_dir: PathBuf,
    logs: BTreeMap<String, (IndicatorLog, String)>,
}

impl LogCache {
    fn get(&mut self, r: &LogRef) -> Result<&IndicatorLog> {
        if !self.logs.contains_key(&r.path) {
            let full = self.base_dir.join(&r.path);
            let bytes = std::fs::read(&full).map_err(|e| {
                CertError::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", full.display()),
                ))
            })?;
            let format = r
                .format
                .or_else(|| LogFormat::from_path(&full))
                .ok_or_else(|| {
                    CertError::validation(format!("cannot infer log format of {}", r.path))
                })?;
            let log = ingest_log(bytes.as_slice(), format).map_err(|e| match e {
                CertError::Parse { line, message } => CertError::Parse {
                    line,
                    message: format!("{}: {message}", r.path),
                },
                other => other,
            })?;
            let digest = hex::encode(Sha256::digest(&bytes));
            self.logs.insert(r.path.clone(), (log, digest));
        }
        Ok(&self.logs[&r.path].0)
    }

    fn digests(&self) -> Vec<FileDigest> {
        self.logs
            .iter()
            .map(|(path, (_, sha))| FileDigest {
                path: path.clone(),
                sha256: sha.clone(),
            })
            .collect()
    }
}

/// Read, parse and run a scenario file; logs resolve relative to its directory.
pub fn run_scenario_file(path: &Path) -> Result<CertificationReport> {
    let text = std::fs::read_to_string(path)?;
    let config = ScenarioConfig::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_scenario(&config, base)
}

/// Evaluate a scenario.
///
/// The confidence budget is split evenly across modules and then across the
/// indicators of each module, so every empirical bound in the report holds
/// simultaneously with probability at least `1 - delta`. A failed union-bound
/// certificate yields a report with status `assumption_violated` and no
/// system bound rather than an error.
pub fn run_scenario(config: &ScenarioConfig, base_dir: &Path) -> Result<CertificationReport> {
    config.validate()?;
    let confidence = ConfidenceLevel::new(config.delta)?;
    let module_confidence = confidence.split(config.modules.len())?;
    let mut cache = LogCache {
        base_dir: base_dir.to_path_buf(),
        logs: BTreeMap::new(),
    };

    let mut modules = Vec::with_capacity(config.modules.len());
    let mut any_analytic = false;
    for m in &config.modules {
        let factors = IndependenceFactors::new(m.indicators.iter().map(|i| i.factor).collect())?;
        let analytic = matches!(m.indicators[0].source()?, Source::Marginal(_));
        any_analytic |= analytic;

        let report = if analytic {
            let marginals: Vec<f64> = m.indicators.iter().filter_map(|i| i.marginal).collect();
            let indicators = m
                .indicators
                .iter()
                .zip(&marginals)
                .map(|(ind, &p)| {
                    Ok(IndicatorReport {
                        name: ind.name.clone(),
                        factor: ind.factor,
                        source: "analytic".to_owned(),
                        failures: None,
                        trials: None,
                        marginal: Some(p),
                        delta: None,
                        bound: ProbBound::from_linear(p)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ModuleReport {
                name: m.name.clone(),
                mode: ModuleMode::Analytic,
                delta: None,
                indicators,
                bound: conjunction_bound_analytic(&marginals, &factors)?,
            }
        } else {
            let indicator_confidence = module_confidence.split(m.indicators.len())?;
            let mut summaries = Vec::with_capacity(m.indicators.len());
            let mut indicators = Vec::with_capacity(m.indicators.len());
            for ind in &m.indicators {
                let (summary, source) = match ind.source()? {
                    Source::Counts(c) => (c, "counts".to_owned()),
                    Source::Log(r) => {
                        let log = cache.get(r)?;
                        let column = r.column.as_deref().unwrap_or(&ind.name);
                        let idx = log.column(column).ok_or_else(|| {
                            CertError::validation(format!(
                                "log {} has no column {column:?}",
                                r.path
                            ))
                        })?;
                        (log.summaries()[idx], format!("log:{}#{column}", r.path))
                    }
                    Source::Marginal(_) => unreachable!("validated as non-mixed"),
                };
                summaries.push(summary);
                indicators.push(IndicatorReport {
                    name: ind.name.clone(),
                    factor: ind.factor,
                    source,
                    failures: Some(summary.failures()),
                    trials: Some(summary.trials()),
                    marginal: None,
                    delta: Some(indicator_confidence.delta()),
                    bound: bernstein_upper_bound(&summary, indicator_confidence)?,
                });
            }
            ModuleReport {
                name: m.name.clone(),
                mode: ModuleMode::Empirical,
                delta: Some(module_confidence.delta()),
                indicators,
                bound: composition_bound(&summaries, &factors, module_confidence)?,
            }
        };
        modules.push(report);
    }

    let mut assumptions = vec![
        Assumption::new(
            "independence-factors-unverified",
            "approximate-independence factors are configuration inputs, not estimated from data",
        ),
        Assumption::new(
            "delta-allocation",
            format!(
                "delta {} split evenly across {} module(s), then evenly across each module's indicators",
                config.delta,
                config.modules.len()
            ),
        ),
    ];
    if any_analytic {
        assumptions.push(Assumption::new(
            "analytic-marginals",
            "analytic modules treat the supplied marginals as exact probabilities",
        ));
    }
    let residual_assumed_zero = config.residual.is_none();
    let residual = config.residual.unwrap_or(0.0);
    if residual_assumed_zero {
        assumptions.push(Assumption::new(
            "residual-assumed-zero",
            "no residual supplied; P[system fails | all sub-modules work] taken as 0",
        ));
    } else {
        assumptions.push(Assumption::new(
            "residual-supplied",
            format!("P[system fails | all sub-modules work] <= {residual} as configured"),
        ));
    }

    let set = ModuleBoundSet::new(
        modules.iter().map(|m| m.bound).collect(),
        ProbBound::from_linear(residual)?,
    );
    let sum = set.module_sum();
    let (status, system) = match system_bound(&set) {
        Ok(bound) => {
            assumptions.push(Assumption::new(
                "union-bound-certificate",
                format!(
                    "module bounds sum to {sum:e} <= 0.5, certifying P[all sub-modules work] >= 0.5"
                ),
            ));
            (
                ReportStatus::Certified,
                Some(SystemReport {
                    module_bound_sum: sum,
                    residual,
                    residual_assumed_zero,
                    bound,
                }),
            )
        }
        Err(CertError::AssumptionViolated { sum }) => {
            assumptions.push(Assumption::new(
                "union-bound-certificate",
                format!("module bounds sum to {sum:e} > 0.5; system bound withheld"),
            ));
            (ReportStatus::AssumptionViolated, None)
        }
        Err(e) => return Err(e),
    };

    let validation_plan = config.plan.as_ref().map(plan_report).transpose()?;
    let gap = config.gap.as_ref().map(gap_report).transpose()?;

    Ok(CertificationReport {
        status,
        tool_version: TOOL_VERSION.to_owned(),
        delta: config.delta,
        modules,
        system,
        assumptions,
        inputs: InputDigests {
            config_sha256: config.canonical_digest(),
            logs: cache.digests(),
        },
        validation_plan,
        gap,
    })
}

pub fn plan_report(p: &PlanParams) -> Result<ValidationPlanReport> {
    let task = ValidationTask::new(p.epsilon, p.delta)?;
    let plan = validation_sample_size(&task)?;
    let training_estimate = p
        .vc_dimension
        .map(|d| {
            Ok::<_, CertError>(TrainingEstimate {
                vc_dimension: d,
                samples: vc_training_bound(d, p.epsilon)?,
                label: "heuristic order-of-magnitude estimate (constants and log factors ignored); not a certified bound".to_owned(),
            })
        })
        .transpose()?;
    Ok(ValidationPlanReport {
        epsilon: p.epsilon,
        delta: p.delta,
        plan,
        e2e_validation_floor: e2e_validation_lower_bound(p.epsilon)?,
        training_estimate,
    })
}
