//! Command-line surface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 assumption violation.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bounds::{
    bernstein_upper_bound, composition_bound, conjunction_bound_analytic, system_bound,
    ConfidenceLevel, IndependenceFactors, ModuleBoundSet, TrialSummary,
};
use crate::error::{CertError, Result};
use crate::log::LogFormat;
use crate::prob::ProbBound;
use crate::report::{emit_report, format_probability, to_sorted_json, OutputFormat, ReportStatus};
use crate::sample_complexity::{gap_report, GapScenario};
use crate::scenario::{plan_report, run_scenario_file, PlanParams, ScenarioConfig};
use crate::simulation::{coverage_experiment_with_cap, sample, CoverageConfig, ModelSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "modcert",
    version,
    about = "Certify failure-probability bounds for modular systems"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: OutputFormat,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper-bound one indicator's failure probability from its counts.
    Bound {
        #[arg(long)]
        failures: u64,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        delta: f64,
    },
    /// Bound a conjunction of approximately independent indicators.
    Compose {
        /// Observed counts as `k/m` pairs, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            conflicts_with = "marginals",
            required_unless_present = "marginals"
        )]
        counts: Vec<String>,
        /// Known marginals (analytic mode), comma separated.
        #[arg(long, value_delimiter = ',')]
        marginals: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        factors: Vec<f64>,
        #[arg(long, required_unless_present = "marginals")]
        delta: Option<f64>,
    },
    /// Combine sub-module bounds and a residual into a system bound.
    System {
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        module_bounds: Vec<f64>,
        #[arg(long)]
        residual: Option<f64>,
    },
    /// Plan end-to-end validation sample size.
    Plan(PlanArgs),
    /// Compare modular certification cost with the end-to-end validation floor.
    Gap(GapArgs),
    /// Draw a log from a model file and summarize it.
    Simulate(SimulateArgs),
    /// Measure empirical coverage of the composed bound on a model file.
    Coverage(CoverageArgs),
    /// Run a scenario config and emit a certification report.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Scenario config whose `plan` section supplies the parameters.
    #[arg(long, conflicts_with_all = ["epsilon", "delta"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    epsilon: Option<f64>,
    #[arg(long, required_unless_present = "config")]
    delta: Option<f64>,
    #[arg(long)]
    vc_dimension: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    /// Scenario config whose `gap` section supplies the parameters.
    #[arg(long, conflicts_with_all = ["target", "modules", "factor", "delta"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    target: Option<f64>,
    /// Number of indicators composed.
    #[arg(long, required_unless_present = "config")]
    modules: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    factor: f64,
    #[arg(long, required_unless_present = "config")]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model specification file.
    #[arg(long, visible_alias = "model")]
    config: PathBuf,
    #[arg(long)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the sampled log here.
    #[arg(long)]
    log_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    log_format: LogFormat,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// Model specification file.
    #[arg(long, visible_alias = "model")]
    config: PathBuf,
    #[arg(long)]
    samples: u64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = crate::simulation::DEFAULT_TRIAL_CAP)]
    trial_cap: u64,
}

/// What a subcommand produced: rendered output plus its exit code.
struct Outcome {
    text: String,
    code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome {
            text,
            code: EXIT_OK,
        }
    }
}

fn render<T: Serialize>(
    format: OutputFormat,
    value: &T,
    text: impl FnOnce() -> String,
) -> Result<String> {
    match format {
        OutputFormat::Json => to_sorted_json(value),
        OutputFormat::Text => Ok(text()),
    }
}

fn read_model(path: &Path) -> Result<ModelSpec> {
    ModelSpec::from_json(&std::fs::read_to_string(path)?)
}

fn read_config(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(&std::fs::read_to_string(path)?)
}

fn parse_counts(items: &[String]) -> Result<Vec<TrialSummary>> {
    items
        .iter()
        .map(|s| {
            let (k, m) = s
                .split_once('/')
                .ok_or_else(|| CertError::validation(format!("count {s:?} is not k/m")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| CertError::validation(format!("count {s:?} is not k/m")))
            };
            TrialSummary::new(parse(k)?, parse(m)?)
        })
        .collect()
}

fn bound_json(b: &ProbBound) -> serde_json::Value {
    serde_json::to_value(b).expect("bounds serialize")
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let format = cli.format;
    match &cli.command {
        Command::Bound {
            failures,
            trials,
            delta,
        } => {
            let summary = TrialSummary::new(*failures, *trials)?;
            let b = bernstein_upper_bound(&summary, ConfidenceLevel::new(*delta)?)?;
            let v = json!({
                "failures": failures, "trials": trials, "delta": delta,
                "empirical_rate": summary.empirical_rate(), "bound": bound_json(&b),
            });
            render(format, &v, || {
                format!("bound: {}\n", format_probability(b.value()))
            })
            .map(Outcome::ok)
        }
        Command::Compose {
            counts,
            marginals,
            factors,
            delta,
        } => {
            let f = IndependenceFactors::new(factors.clone())?;
            let (b, v) = if marginals.is_empty() {
                let summaries = parse_counts(counts)?;
                let delta = delta
                    .ok_or_else(|| CertError::validation("--delta is required with --counts"))?;
                let b = composition_bound(&summaries, &f, ConfidenceLevel::new(delta)?)?;
                let v = json!({
                    "mode": "empirical", "summaries": summaries, "factors": factors,
                    "delta": delta, "bound": bound_json(&b),
                });
                (b, v)
            } else {
                let b = conjunction_bound_analytic(marginals, &f)?;
                let v = json!({
                    "mode": "analytic", "marginals": marginals, "factors": factors,
                    "bound": bound_json(&b),
                });
                (b, v)
            };
            render(format, &v, || {
                format!("bound: {}\n", format_probability(b.value()))
            })
            .map(Outcome::ok)
        }
        Command::System {
            module_bounds,
            residual,
        } => {
            let set = ModuleBoundSet::from_values(module_bounds, residual.unwrap_or(0.0))?;
            match system_bound(&set) {
                Ok(b) => {
                    let v = json!({
                        "status": "certified", "module_bound_sum": set.module_sum(),
                        "residual": residual.unwrap_or(0.0),
                        "residual_assumed_zero": residual.is_none(), "bound": bound_json(&b),
                    });
                    render(format, &v, || {
                        let mut s = format!("system bound: {}\n", format_probability(b.value()));
                        if residual.is_none() {
                            s.push_str("WARNING [residual-assumed-zero] no residual supplied; taken as 0\n");
                        }
                        s
                    })
                    .map(Outcome::ok)
                }
                Err(CertError::AssumptionViolated { sum }) => {
                    let v = json!({"status": "assumption_violated", "module_bound_sum": sum});
                    let text = render(format, &v, || {
                        format!("assumption violated: module bounds sum to {sum} > 0.5\n")
                    })?;
                    Ok(Outcome {
                        text,
                        code: EXIT_ASSUMPTION,
                    })
                }
                Err(e) => Err(e),
            }
        }
        Command::Plan(args) => {
            let params = match &args.config {
                Some(path) => read_config(path)?
                    .plan
                    .ok_or_else(|| CertError::validation("config has no plan section"))?,
                None => PlanParams {
                    epsilon: args.epsilon.expect("required by clap"),
                    delta: args.delta.expect("required by clap"),
                    vc_dimension: args.vc_dimension,
                },
            };
            let r = plan_report(&params)?;
            render(format, &r, || {
                format!(
                    "samples: {}\nthreshold: {}\nalpha: {:.6}\nbeta: {:.6}\ne2e floor 1/(2 eps): {}\n",
                    r.plan.samples_required,
                    r.plan.decision_threshold,
                    r.plan.achieved_alpha,
                    r.plan.achieved_beta,
                    r.e2e_validation_floor
                )
            })
            .map(Outcome::ok)
        }
        Command::Gap(args) => {
            let scenario = match &args.config {
                Some(path) => read_config(path)?
                    .gap
                    .ok_or_else(|| CertError::validation("config has no gap section"))?,
                None => GapScenario {
                    assumed_observed_rates: args.rates.clone(),
                    ..GapScenario::new(
                        args.target.expect("required by clap"),
                        args.modules.expect("required by clap"),
                        args.factor,
                        args.delta.expect("required by clap"),
                    )
                },
            };
            let r = gap_report(&scenario)?;
            render(format, &r, || {
                format!(
                    "samples per indicator: {}\ntotal modular samples: {}\ne2e validation floor: {:.6e}\nratio: {:.6e}\n",
                    r.modular_samples_per_indicator, r.modular_samples_total, r.e2e_validation_floor, r.ratio
                )
            })
            .map(Outcome::ok)
        }
        Command::Simulate(args) => {
            let spec = read_model(&args.config)?;
            let model = spec.build()?;
            let log = sample(&model, args.samples, args.seed)?;
            let mut csv = Vec::new();
            log.write_csv(&mut csv)?;
            if let Some(path) = &args.log_out {
                let mut buf = Vec::new();
                log.write(&mut buf, args.log_format)?;
                std::fs::write(path, buf)?;
            }
            let counts = log.failure_counts();
            let rates: Vec<f64> = counts
                .iter()
                .map(|&k| k as f64 / args.samples as f64)
                .collect();
            let exact = model.exact_statistics();
            let v = json!({
                "model": spec, "samples": args.samples, "seed": args.seed,
                "indicator_names": log.names(), "failure_counts": counts,
                "empirical_rates": rates, "exact": exact,
                "log_csv_sha256": hex::encode(Sha256::digest(&csv)),
            });
            render(format, &v, || {
                let mut s = String::new();
                for (i, n) in log.names().iter().enumerate() {
                    s.push_str(&format!(
                        "{n}: {}/{} (exact marginal {})\n",
                        counts[i],
                        args.samples,
                        format_probability(exact.marginals[i])
                    ));
                }
                s
            })
            .map(Outcome::ok)
        }
        Command::Coverage(args) => {
            let spec = read_model(&args.config)?;
            let model = spec.build()?;
            let cfg = CoverageConfig {
                samples: args.samples,
                delta: args.delta,
                trials: args.trials,
                base_seed: args.seed,
            };
            let r = coverage_experiment_with_cap(&model, &cfg, args.trial_cap)?;
            let v = json!({
                "model": spec, "samples": args.samples, "delta": args.delta,
                "exact": model.exact_statistics(), "result": r,
            });
            render(format, &v, || {
                format!(
                    "coverage: {:.6} ({} violations in {} trials; nominal {})\n",
                    r.coverage,
                    r.violations,
                    r.trials,
                    1.0 - args.delta
                )
            })
            .map(Outcome::ok)
        }
        Command::Report { config } => {
            let report = run_scenario_file(config)?;
            let code = match report.status {
                ReportStatus::Certified => EXIT_OK,
                ReportStatus::AssumptionViolated => EXIT_ASSUMPTION,
            };
            Ok(Outcome {
                text: emit_report(&report, format),
                code,
            })
        }
    }
}

fn run_parsed(cli: &Cli) -> Result<Outcome> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CertError::validation(e.to_string()))?;
            pool.install(|| execute(cli))
        }
        None => execute(cli),
    }
}

/// Parse `args`, run, write output, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run_parsed(&cli) {
        Ok(outcome) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, outcome.text.as_bytes()),
                None => std::io::stdout().write_all(outcome.text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return EXIT_DATA;
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
