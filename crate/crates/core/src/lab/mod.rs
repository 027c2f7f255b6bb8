//! Empirical verification of the inequality chain.
//!
//! Every check returns [`CheckResult`] records. Monte Carlo comparisons
//! state their margin as a multiple of the standard error; constant-bearing
//! inequalities report the measured constant and compare it to a fixed
//! budget.

mod bernoulli;
mod checks;
mod example_ex;
mod sandwich;

use serde::Serialize;

use crate::error::LabError;
use crate::scenario::ScenarioConfig;

pub use bernoulli::{bernoulli_witness, check_bernoulli_b2, BernoulliWitness};
pub use checks::{
    check_bern_upper, check_campbell, check_concentration, check_concentration_many,
    check_exp_identity, check_gine_zinn, check_gora, check_id2, check_independence, check_joty,
    check_mixing, check_partition, check_pois1, check_symmetrization, check_tail,
    concentration_triples, default_campbell_f, exp_identity_cases, joty_measure,
};
pub use example_ex::{check_example_ex, run_example_ex_sweep, ExampleExParams, SweepRow, SweepTable};
pub use sandwich::{check_roadmap, run_sandwich, Decomposition, SandwichReport, CLIP_GRID_DEPTH};

/// Budget for constants of partition-based links.
pub const TREE_BUDGET: f64 = 16.0;
/// Budget for constants linking functionals to Monte Carlo suprema.
pub const SUP_BUDGET: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Measured constant or statistical margin, depending on the check.
    pub slack_or_constant: f64,
    pub passed: bool,
    /// `k` in the `k·σ` margin, 0 for exact comparisons.
    pub std_errors_used: f64,
    pub replications: usize,
    /// Empty unless the check needs to explain a verdict.
    pub note: String,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64, passed: bool) -> CheckResult {
        CheckResult {
            name: name.into(),
            lhs,
            rhs,
            slack_or_constant: slack,
            passed,
            std_errors_used: 0.0,
            replications: 0,
            note: String::new(),
        }
    }

    pub fn with_mc(mut self, std_errors: f64, replications: usize) -> CheckResult {
        self.std_errors_used = std_errors;
        self.replications = replications;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> CheckResult {
        self.note = note.into();
        self
    }
}

/// `lhs / rhs`, with `0/0 = 0` and `x/0 = ∞`.
pub fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 0.0 {
        0.0
    } else if rhs <= 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Checks runnable on a single scenario, in registry order.
pub const CHECK_NAMES: &[&str] = &[
    "campbell",
    "exp_identity",
    "independence",
    "tail",
    "gine_zinn",
    "gora",
    "bern_upper",
    "concentration",
    "partition",
    "mixing",
    "id2",
    "joty",
    "pois1",
    "symmetrization",
    "roadmap",
    "sandwich",
];

pub fn is_known_check(name: &str) -> bool {
    CHECK_NAMES.contains(&name)
}

/// Runs one registry check on a scenario.
pub fn run_named(name: &str, scenario: &ScenarioConfig) -> Result<Vec<CheckResult>, LabError> {
    let one = |r: CheckResult| Ok(vec![r]);
    match name {
        "campbell" => one(check_campbell(scenario, &default_campbell_f(scenario))?),
        "exp_identity" => exp_identity_cases(scenario)
            .into_iter()
            .map(|(t, lambda)| check_exp_identity(scenario, t, lambda))
            .collect(),
        "independence" => one(check_independence(scenario)?),
        "tail" => check_tail(scenario),
        "gine_zinn" => one(check_gine_zinn(scenario)?),
        "gora" => one(check_gora(scenario)?),
        "bern_upper" => one(check_bern_upper(scenario)?),
        "concentration" => {
            let triples = concentration_triples(scenario, 0.5, 20.0);
            check_concentration_many(scenario, &triples)
        }
        "partition" => one(check_partition(scenario, None)?),
        "mixing" => one(check_mixing(scenario, 20)?),
        "id2" => one(check_id2(scenario)?),
        "joty" => check_joty(scenario, &joty_measure(scenario.n_points(), scenario.family.zero_index())),
        "pois1" => (0..scenario.n_points())
            .filter(|&t| t != scenario.family.zero_index())
            .map(|t| match check_pois1(scenario, t) {
                Err(LabError::Precondition(msg)) => Ok(CheckResult::new("pois1", 0.0, 0.0, 0.0, true)
                    .with_note(format!("not applicable to {}: {msg}", scenario.family.ids()[t]))),
                other => other,
            })
            .collect(),
        "symmetrization" => check_symmetrization(scenario),
        "roadmap" => check_roadmap(scenario),
        "sandwich" => Ok(run_sandwich(scenario)?.to_checks()),
        other => Err(LabError::Precondition(format!("unknown check {other}"))),
    }
}
