//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

mod common;

use std::process::Command;
use std::time::Instant;

use common::{brute_force_plan, fixture, random_positive_table, rel_err, EnumeratedStats};
use modcert::simulation::rng::SimRng;
use modcert::{
    bernstein_upper_bound, composition_bound, conjunction_bound_analytic, coverage_experiment,
    e2e_validation_lower_bound, gap_report, run_scenario_file, validation_sample_size,
    ConfidenceLevel, CoverageConfig, GapScenario, IndependenceFactors, JointIndicatorModel,
    ReportStatus, TrialSummary, ValidationTask,
};

/// 0.95 - 3 sqrt(0.05 * 0.95 / 1e4), rounded down.
const COVERAGE_FLOOR: f64 = 0.9435;
const TRIALS: u64 = 10_000;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn worked_example() -> Check {
    let b = conjunction_bound_analytic(&[1e-6; 3], &IndependenceFactors::uniform(1.1, 3).unwrap())
        .map_err(|e| e.to_string())?;
    let err = rel_err(b.value(), 1.331e-18);
    ensure(err <= 1e-9, format!("got {:e}, rel err {err:e}", b.value()))?;
    Ok(format!("bound {:.6e} (rel err {err:.1e})", b.value()))
}

fn zero_failure_bound() -> Check {
    let mut worst = 0.0f64;
    for m in [100u64, 10_000, 1_000_000] {
        for delta in [0.2, 0.05, 0.001] {
            let b = bernstein_upper_bound(
                &TrialSummary::new(0, m).unwrap(),
                ConfidenceLevel::new(delta).unwrap(),
            )
            .map_err(|e| e.to_string())?;
            let expected = 4.0 * (1.0 / delta).ln() / m as f64;
            let err = rel_err(b.value(), expected);
            ensure(
                err <= 1e-12,
                format!("m={m} delta={delta}: {} vs {expected}", b.value()),
            )?;
            worst = worst.max(err);
        }
    }
    Ok(format!("9 grid points, max rel err {worst:.1e}"))
}

fn coverage_of(model: &JointIndicatorModel, samples: u64, seed: u64) -> Result<f64, String> {
    let cfg = CoverageConfig {
        samples,
        delta: 0.05,
        trials: TRIALS,
        base_seed: seed,
    };
    Ok(coverage_experiment(model, &cfg)
        .map_err(|e| e.to_string())?
        .coverage)
}

fn single_indicator_coverage() -> Check {
    let mut lowest = 1.0f64;
    for (i, p) in [0.001, 0.01, 0.1].into_iter().enumerate() {
        for (j, m) in [100u64, 1000].into_iter().enumerate() {
            let model = JointIndicatorModel::independent(&[p]).unwrap();
            let c = coverage_of(&model, m, 1000 + (i * 2 + j) as u64)?;
            ensure(c >= COVERAGE_FLOOR, format!("p={p} m={m}: coverage {c}"))?;
            lowest = lowest.min(c);
        }
    }
    Ok(format!(
        "6 configs x {TRIALS} trials, min coverage {lowest:.4}"
    ))
}

fn composed_coverage() -> Check {
    let mut models = vec![(
        "common-cause q=0.1".to_owned(),
        JointIndicatorModel::common_cause(0.1, &[0.1, 0.1], &[0.9, 0.9]).unwrap(),
    )];
    let mut rng = SimRng::new(2024);
    for i in 0..10 {
        let t = 1 + (rng.next_u64() % 4) as usize;
        let table = random_positive_table(&mut rng, t);
        models.push((
            format!("random table #{i} (T={t})"),
            JointIndicatorModel::from_table(t, table).unwrap(),
        ));
    }
    let mut lowest = 1.0f64;
    for (i, (name, model)) in models.iter().enumerate() {
        for m in [500u64, 5000] {
            let c = coverage_of(model, m, 5000 + i as u64 * 10 + m)?;
            ensure(c >= COVERAGE_FLOOR, format!("{name} m={m}: coverage {c}"))?;
            lowest = lowest.min(c);
        }
    }
    Ok(format!(
        "{} models x 2 sizes x {TRIALS} trials, min coverage {lowest:.4}",
        models.len()
    ))
}

fn oracle_identity() -> Check {
    let mut rng = SimRng::new(77);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let t = 1 + (rng.next_u64() % 4) as usize;
        let table = random_positive_table(&mut rng, t);
        let model = JointIndicatorModel::from_table(t, table.clone()).unwrap();
        let stats = model.exact_statistics();
        let oracle = EnumeratedStats::of(t, &table);

        let product: f64 = stats
            .independence_factors
            .iter()
            .zip(&stats.marginals)
            .map(|(c, p)| c * p)
            .product();
        let gap = (stats.conjunction_prob - product).abs();
        ensure(
            gap <= 1e-12,
            format!(
                "case {case}: conj {} vs product {product}",
                stats.conjunction_prob
            ),
        )?;
        ensure(
            (stats.conjunction_prob - oracle.conjunction()).abs() <= 1e-12,
            format!("case {case}: conj disagrees with enumeration"),
        )?;
        for (a, b) in stats.independence_factors.iter().zip(oracle.factors()) {
            ensure(
                (a - b).abs() <= 1e-12 * b.max(1.0),
                format!("case {case}: factor {a} vs {b}"),
            )?;
        }
        let c_max = stats
            .independence_factors
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let envelope = c_max.powi(t as i32) * oracle.marginals.iter().product::<f64>();
        ensure(
            oracle.conjunction() <= envelope * (1.0 + 1e-12),
            format!(
                "case {case}: conj {} above envelope {envelope}",
                oracle.conjunction()
            ),
        )?;
        worst = worst.max(gap);
    }
    Ok(format!("1000 tables, max |conj - prod c*p| {worst:.1e}"))
}

fn scenario_pipeline() -> Check {
    let report = run_scenario_file(&fixture("single_indicator.json")).map_err(|e| e.to_string())?;
    let system = report
        .system
        .ok_or("single-indicator fixture produced no system bound")?;
    let expected = 2.0 * 4.0 * 20f64.ln() / 1000.0;
    let err = rel_err(system.bound.value(), expected);
    ensure(
        err <= 1e-9,
        format!("system bound {} vs {expected}", system.bound.value()),
    )?;

    let violated = run_scenario_file(&fixture("overbudget.json")).map_err(|e| e.to_string())?;
    ensure(
        violated.status == ReportStatus::AssumptionViolated,
        "overbudget fixture was certified",
    )?;
    let out = Command::new(env!("CARGO_BIN_EXE_modcert"))
        .args(["report", "--config"])
        .arg(fixture("overbudget.json"))
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.code() == Some(3),
        format!("overbudget exit code {:?}", out.status.code()),
    )?;
    Ok(format!(
        "system bound {:.7} (rel err {err:.1e}); overbudget exits 3",
        system.bound.value()
    ))
}

fn validation_planning() -> Check {
    let mut rows = Vec::new();
    for eps in [0.05, 0.1, 0.2] {
        for delta in [0.05, 0.1] {
            let plan = validation_sample_size(&ValidationTask::new(eps, delta).unwrap())
                .map_err(|e| e.to_string())?;
            let oracle = brute_force_plan(eps, delta, 5000).ok_or("oracle found no plan")?;
            let got = (plan.samples_required, plan.decision_threshold);
            ensure(
                got == oracle,
                format!("eps={eps} delta={delta}: {got:?} vs oracle {oracle:?}"),
            )?;
            let floor = e2e_validation_lower_bound(eps).unwrap();
            ensure(
                plan.samples_required as f64 >= floor,
                format!("eps={eps}: m*={} below {floor}", got.0),
            )?;
            rows.push(format!("{}", got.0));
        }
    }
    Ok(format!(
        "6 (eps, delta) pairs match brute force; m* = [{}]",
        rows.join(", ")
    ))
}

fn gap_demonstration() -> Check {
    let r = gap_report(&GapScenario::new(1e-18, 3, 1.1, 0.05)).map_err(|e| e.to_string())?;
    let closed_form = 4.0 * 1.1 * 60f64.ln() * 1e6;
    let m = r.modular_samples_per_indicator as f64;
    ensure(
        (m - closed_form).abs() <= 1.0 + 1e-6,
        format!("per-indicator m {m} vs {closed_form}"),
    )?;
    ensure(
        rel_err(r.e2e_validation_floor, 5e17) <= 1e-12,
        format!("floor {}", r.e2e_validation_floor),
    )?;
    ensure(
        rel_err(r.ratio, 2.8e10) <= 0.01,
        format!("ratio {:e}", r.ratio),
    )?;
    Ok(format!(
        "m* = {} per indicator, floor {:.1e}, ratio {:.4e}",
        r.modular_samples_per_indicator, r.e2e_validation_floor, r.ratio
    ))
}

fn run_cli(args: &[&str], threads: usize) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_modcert"))
        .args(args)
        .args(["--threads", &threads.to_string()])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )?;
    Ok(out.stdout)
}

fn determinism() -> Check {
    let model = fixture("common_cause.json");
    let model = model.to_str().unwrap();
    let runs: [&[&str]; 2] = [
        &[
            "simulate",
            "--config",
            model,
            "--samples",
            "5000",
            "--seed",
            "7",
        ],
        &[
            "coverage",
            "--config",
            model,
            "--samples",
            "500",
            "--delta",
            "0.05",
            "--trials",
            "4000",
            "--seed",
            "11",
        ],
    ];
    for args in runs {
        let reference = run_cli(args, 1)?;
        for threads in [1, 4, 8] {
            ensure(
                run_cli(args, threads)? == reference,
                format!("{} output differs at {threads} threads", args[0]),
            )?;
        }
    }
    Ok("simulate and coverage byte-identical across runs and 1/4/8 threads".to_owned())
}

fn monotonicity_and_reduction() -> Check {
    let mut rng = SimRng::new(99);
    let cases = 2000;
    let delta_of = |rng: &mut SimRng| 10f64.powf(-6.0 * rng.next_f64()).min(1.0);
    for _ in 0..cases {
        let bound = |k: u64, m: u64, d: f64| {
            bernstein_upper_bound(
                &TrialSummary::new(k, m).unwrap(),
                ConfidenceLevel::new(d).unwrap(),
            )
            .unwrap()
        };
        let m1 = 1 + rng.next_u64() % 1_000_000;
        let m2 = m1 + rng.next_u64() % 1_000_000;
        let d = delta_of(&mut rng);
        ensure(
            bound(0, m2, d).value() <= bound(0, m1, d).value(),
            format!("k=0 not nonincreasing: m {m1}->{m2} delta {d}"),
        )?;

        let m = 1 + rng.next_u64() % 100_000;
        let k = rng.next_u64() % (m + 1);
        let (d1, d2) = (delta_of(&mut rng), delta_of(&mut rng));
        let (loose, tight) = if d1 >= d2 { (d1, d2) } else { (d2, d1) };
        ensure(
            bound(k, m, tight).value() >= bound(k, m, loose).value(),
            format!("not nondecreasing as delta shrinks: k={k} m={m} {loose}->{tight}"),
        )?;

        let s = TrialSummary::new(k, m).unwrap();
        let single = bernstein_upper_bound(&s, ConfidenceLevel::new(d1).unwrap()).unwrap();
        let composed = composition_bound(
            &[s],
            &IndependenceFactors::new(vec![1.0]).unwrap(),
            ConfidenceLevel::new(d1).unwrap(),
        )
        .unwrap();
        ensure(
            single.value().to_bits() == composed.value().to_bits()
                && single.ln().to_bits() == composed.ln().to_bits(),
            format!("reduction not bit-exact: k={k} m={m} delta={d1}"),
        )?;
    }
    Ok(format!("{cases} randomized cases per property"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("worked example 1.331e-18", worked_example),
        ("zero-failure bound 4 ln(1/delta)/m", zero_failure_bound),
        ("single-indicator coverage", single_indicator_coverage),
        ("composed-bound coverage", composed_coverage),
        ("oracle identity on random tables", oracle_identity),
        ("scenario pipeline and exit code 3", scenario_pipeline),
        ("validation planning vs brute force", validation_planning),
        ("modular vs end-to-end gap", gap_demonstration),
        ("determinism across runs and threads", determinism),
        (
            "monotonicity and reduction properties",
            monotonicity_and_reduction,
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
