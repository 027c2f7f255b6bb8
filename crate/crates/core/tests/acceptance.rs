//! Acceptance suite: one test per criterion, each printing a single
//! `PASS` or `FAIL` line. Run with `cargo test -p idsup-core --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use idsup_core::lab::{
    check_campbell, check_concentration_many, check_example_ex, check_exp_identity, check_gine_zinn,
    check_joty, check_mixing, check_partition, check_roadmap, concentration_triples, default_campbell_f,
    exp_identity_cases, joty_measure, run_named, CheckResult, ExampleExParams, CHECK_NAMES, SUP_BUDGET,
    TREE_BUDGET,
};
use idsup_core::majorizing::compute_jn;
use idsup_core::metric::{DistanceKind, DistanceMatrix, PhiFamily};
use idsup_core::partition::{gamma_exact, gamma_greedy};
use idsup_core::scenario::{random_scenario, ScenarioConfig};
use idsup_core::stats::stream_rng;
use rand::Rng;

fn verdict(criterion: u32, title: &str, ok: bool, detail: String) {
    println!("{} criterion {criterion}: {title} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn failures(results: &[CheckResult]) -> Vec<&CheckResult> {
    results.iter().filter(|r| !r.passed).collect()
}

fn suite(base: u64, count: u64, atoms: impl Fn(u64) -> usize, points: impl Fn(u64) -> usize) -> Vec<ScenarioConfig> {
    (0..count)
        .map(|i| random_scenario(base + i, atoms(i), points(i), 1.0).unwrap())
        .collect()
}

#[test]
fn criterion_01_campbell() {
    let start = Instant::now();
    let mut results = Vec::new();
    for sc in suite(1000, 50, |i| 1 + (i as usize * 7) % 20, |i| 2 + i as usize % 5) {
        let sc = sc.with_replications(100_000);
        results.push(check_campbell(&sc, &default_campbell_f(&sc)).unwrap());
    }
    let elapsed = start.elapsed();
    let bad = failures(&results);
    let worst = results.iter().map(|r| r.slack_or_constant).fold(0.0, f64::max);
    verdict(
        1,
        "Campbell identity",
        bad.is_empty() && elapsed < Duration::from_secs(60),
        format!("{} scenarios, {} failures, worst {worst:.2} SE, {:.1}s", results.len(), bad.len(), elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_02_exponential_identity() {
    let mut results = Vec::new();
    for sc in suite(2000, 5, |i| 3 + 2 * i as usize, |_| 3) {
        let sc = sc.with_replications(100_000);
        let d = idsup_core::metric::compute_dinf(&sc);
        for (t, lambda) in exp_identity_cases(&sc).into_iter().take(4) {
            assert!(lambda.abs() * d.get(t, sc.family.zero_index()) <= 1.0 + 1e-12);
            results.push(check_exp_identity(&sc, t, lambda).unwrap());
        }
    }
    let worst = results.iter().map(|r| r.slack_or_constant).fold(0.0, f64::max);
    verdict(
        2,
        "exponential moment identity",
        results.len() == 20 && worst <= 0.05,
        format!("{} pairs, worst relative error {worst:.4}", results.len()),
    );
}

#[test]
fn criterion_03_concentration() {
    let mut results = Vec::new();
    for sc in suite(3000, 10, |i| 4 + i as usize, |_| 4) {
        let sc = sc.with_replications(20_000);
        let triples = concentration_triples(&sc, 0.5, 20.0);
        results.extend(check_concentration_many(&sc, &triples).unwrap());
    }
    let bad = failures(&results);
    verdict(
        3,
        "concentration bound",
        results.len() >= 100 && bad.is_empty(),
        format!("{} triples, {} violations", results.len(), bad.len()),
    );
}

#[test]
fn criterion_04_gine_zinn() {
    let results: Vec<CheckResult> = suite(4000, 100, |i| 2 + i as usize % 15, |i| 2 + i as usize % 6)
        .into_iter()
        .map(|sc| check_gine_zinn(&sc.with_replications(4000)).unwrap())
        .collect();
    let bad = failures(&results);
    verdict(4, "Giné-Zinn inequality", bad.is_empty(), format!("{} scenarios, {} failures", results.len(), bad.len()));
}

#[test]
fn criterion_05_partition_invariants() {
    let start = Instant::now();
    let results: Vec<CheckResult> = suite(5000, 100, |i| 3 + i as usize % 12, |i| 2 + i as usize % 9)
        .iter()
        .map(|sc| check_partition(sc, None).unwrap())
        .collect();
    let elapsed = start.elapsed();
    let bad = failures(&results);
    let worst = results.iter().map(|r| r.slack_or_constant).fold(0.0, f64::max);
    verdict(
        5,
        "partition invariants",
        bad.is_empty() && elapsed < Duration::from_secs(30),
        format!("{} trees, {} failures, max constant {worst:.3}, {:.1}s", results.len(), bad.len(), elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_06_mixing() {
    let results: Vec<CheckResult> = suite(6000, 10, |i| 4 + i as usize, |i| 3 + i as usize % 4)
        .iter()
        .map(|sc| check_mixing(sc, 20).unwrap())
        .collect();
    let bad = failures(&results);
    verdict(6, "mixing ball-mass bound", bad.is_empty(), format!("200 mixtures, {} failing scenarios", bad.len()));
}

#[test]
fn criterion_07_gamma_oracle() {
    let mut rng = stream_rng(7, 0x9A, 0);
    let mut worst = 1.0f64;
    let mut bad = 0;
    for _ in 0..500 {
        let m = rng.random_range(2..=5);
        let d = rng.random_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0) * 4f64.powi(rng.random_range(-1..2))).collect()).collect();
        let masses: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..3.0)).collect();
        for (kind, alpha) in [(DistanceKind::D2, 2), (DistanceKind::Dinf, 1), (DistanceKind::D2, 1), (DistanceKind::Dinf, 2)] {
            let dm = DistanceMatrix::from_rows(&rows, &masses, kind);
            let exact = gamma_exact(&dm, alpha).unwrap().value;
            let greedy = gamma_greedy(&dm, alpha, None).value;
            if !(greedy >= exact - 1e-12 * exact && greedy <= 5.0 * exact + 1e-12) {
                bad += 1;
            }
            if exact > 0.0 {
                worst = worst.max(greedy / exact);
            }
        }
    }
    let delta = 0.731;
    let two = DistanceMatrix::from_fn(2, DistanceKind::Custom, |s, t| if s == t { 0.0 } else { delta });
    let two_point = (gamma_exact(&two, 2).unwrap().value - delta).abs();
    verdict(
        7,
        "greedy versus exact gamma",
        bad == 0 && two_point <= 1e-12,
        format!("500 instances x 4, {bad} violations, worst ratio {worst:.3}, two-point error {two_point:e}"),
    );
}

#[test]
fn criterion_08_joty() {
    let mut results = Vec::new();
    let mut used = 0;
    let mut seed = 8000;
    while used < 20 {
        let sc = random_scenario(seed, 12, 4, 1.0).unwrap().with_replications(2000);
        seed += 1;
        let phi = PhiFamily::new(&sc);
        let mu = joty_measure(sc.n_points(), sc.family.zero_index());
        let finite = (0..sc.n_points()).any(|t| compute_jn(&phi, &mu, t, 3).is_finite());
        if !finite {
            continue;
        }
        used += 1;
        results.extend(check_joty(&sc, &mu).unwrap());
    }
    let bad = failures(&results);
    let worst = results.iter().map(|r| r.lhs).fold(1.0, f64::min);
    verdict(
        8,
        "random label lower bounds",
        bad.is_empty(),
        format!("{used} scenarios, {} records, {} failures, lowest frequency {worst:.3}", results.len(), bad.len()),
    );
}

#[test]
fn criterion_09_roadmap() {
    let mut results = Vec::new();
    for sc in suite(9000, 50, |i| 3 + i as usize % 8, |i| 2 + i as usize % 6) {
        results.extend(check_roadmap(&sc.with_replications(4000)).unwrap());
    }
    let bad = failures(&results);
    let extreme = |prefix: &str| {
        results
            .iter()
            .filter(|r| r.name == prefix)
            .map(|r| r.slack_or_constant)
            .fold(0.0, f64::max)
    };
    let detail = format!(
        "{} links, {} failures; max tree/prime {:.3}, prime/double {:.3}, double/esup {:.3}, esup/upper {:.3}",
        results.len(),
        bad.len(),
        extreme("roadmap_tree_prime"),
        extreme("roadmap_prime_double_prime"),
        extreme("roadmap_double_prime_esup"),
        extreme("roadmap_esup_upper"),
    );
    for r in &bad {
        println!("  failing link: {r:?}");
    }
    let mut golden = serde_json::json!({
        "budgets": {"tree": TREE_BUDGET, "sup": SUP_BUDGET},
        "extremes": {
            "tree_prime": extreme("roadmap_tree_prime"),
            "prime_double_prime": extreme("roadmap_prime_double_prime"),
            "double_prime_esup": extreme("roadmap_double_prime_esup"),
            "esup_upper": extreme("roadmap_esup_upper"),
        },
    })
    .to_string();
    golden.push('\n');
    for r in &results {
        golden.push_str(&serde_json::to_string(r).unwrap());
        golden.push('\n');
    }
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/roadmap_suite.jsonl");
    if std::env::var_os("IDSUP_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &golden).unwrap();
    }
    let frozen = std::fs::read_to_string(&path).unwrap_or_default();
    let matches = frozen == golden;
    verdict(9, "roadmap chain", bad.is_empty() && matches, format!("{detail}; golden report {}", if matches { "matches" } else { "differs" }));
}

#[test]
fn criterion_10_example_ex() {
    let results = check_example_ex(&ExampleExParams::default()).unwrap();
    let detail = results
        .iter()
        .map(|r| format!("{}={:.4}{}", r.name, r.lhs, if r.passed { "" } else { "!" }))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(10, "divergence example", failures(&results).is_empty(), detail);
}

fn report_lines(sc: &ScenarioConfig) -> String {
    let mut out = String::new();
    for name in CHECK_NAMES {
        for r in run_named(name, sc).unwrap() {
            out.push_str(&serde_json::to_string(&r).unwrap());
            out.push('\n');
        }
    }
    out
}

#[test]
fn criterion_11_determinism() {
    let sc = random_scenario(11, 5, 4, 1.0).unwrap().with_replications(1000);
    let (a, b) = (report_lines(&sc), report_lines(&sc));
    verdict(
        11,
        "byte-identical reports",
        a == b && !a.is_empty(),
        format!("{} lines, {} bytes", a.lines().count(), a.len()),
    );
}
