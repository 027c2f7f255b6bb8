//! Two-sided comparison of `E sup X_t` with the decomposition bound and the
//! lower chain `β(tree) ≲ β′ ≲ β″ ≲ E sup X_t`.
//!
//! The decomposition is threshold clipping `t₁ = (t ∧ c) ∨ (−c)`,
//! `t₂ = t − t₁`, with `c` taken from the grid `{∞, 0, M·2^(−k) : k ⩽ CLIP_GRID_DEPTH}`
//! (`M = max |t|`) to minimize the upper sum. One Monte Carlo pass, on the
//! same configurations as the signed supremum estimate, serves every `c`.

use serde::Serialize;

use super::checks::{distances_of_rows, gamma_value};
use super::{ratio, CheckResult, SUP_BUDGET, TREE_BUDGET};
use crate::error::LabError;
use crate::majorizing::{beta_bounds, DEFAULT_LEVELS};
use crate::metric::PhiFamily;
use crate::partition::build_partition_tree;
use crate::poisson_mc::{eval_process, replicate, sup_of};
use crate::scenario::ScenarioConfig;
use crate::stats::McEstimate;

/// Number of halvings of the largest value in the clipping grid.
pub const CLIP_GRID_DEPTH: usize = 10;

/// Candidate measures profiled when bounding `β′` and `β″`.
const MEASURE_BUDGET: usize = 2500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    /// Clipping level; `None` means no clipping (`T₂ = {0}`).
    pub clip: Option<f64>,
    pub description: String,
}

impl Decomposition {
    fn new(clip: Option<f64>) -> Decomposition {
        let description = match clip {
            None => "T1 = T, T2 = {0}".to_string(),
            Some(c) => format!("T1 = t clipped to [-{c:e}, {c:e}], T2 = t - T1"),
        };
        Decomposition { clip, description }
    }

    fn split(&self, rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let Some(c) = self.clip else {
            return (rows.to_vec(), rows.iter().map(|r| vec![0.0; r.len()]).collect());
        };
        let t1: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v.clamp(-c, c)).collect()).collect();
        let t2 = rows
            .iter()
            .zip(&t1)
            .map(|(r, s)| r.iter().zip(s).map(|(a, b)| a - b).collect())
            .collect();
        (t1, t2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub esup_mc: McEstimate,
    /// `E sup_t |X_t|`, same configurations as `esup_mc`.
    pub abs_of_sup: McEstimate,
    /// `E[sup|X_t| − 3 sup X_t]` per replication.
    pub zero_gap: McEstimate,
    pub gamma2_t1: f64,
    pub gamma1_t1: f64,
    pub abs_t2: McEstimate,
    pub beta_double_prime: f64,
    pub beta_prime: f64,
    pub beta_tree: f64,
    pub decomposition: Decomposition,
    /// `esup / (γ₂(T₁,d₂) + γ₁(T₁,d∞) + E sup_{T₂}|X|_t)`.
    pub measured_ratio_up: f64,
    /// `β(tree) / esup`.
    pub measured_ratio_down: f64,
}

impl SandwichReport {
    pub fn upper_sum(&self) -> f64 {
        self.gamma2_t1 + self.gamma1_t1 + self.abs_t2.mean
    }

    pub fn to_checks(&self) -> Vec<CheckResult> {
        let reps = self.esup_mc.replications;
        let up = self.measured_ratio_up;
        let zero_ok = self.zero_gap.mean <= 3.0 * self.zero_gap.std_error + 1e-12;
        vec![
            CheckResult::new("sandwich_up", self.esup_mc.mean, self.upper_sum(), up, up <= SUP_BUDGET && (up == 0.0 || up >= 1.0 / SUP_BUDGET))
                .with_mc(0.0, reps)
                .with_note(self.decomposition.description.clone()),
            CheckResult::new("sandwich_down", self.beta_tree, self.esup_mc.mean, self.measured_ratio_down, self.measured_ratio_down <= SUP_BUDGET)
                .with_mc(0.0, reps),
            CheckResult::new("sandwich_zero", self.abs_of_sup.mean, 3.0 * self.esup_mc.mean, self.zero_gap.mean, zero_ok)
                .with_mc(3.0, reps),
        ]
    }
}

fn clip_grid(rows: &[Vec<f64>]) -> Vec<Decomposition> {
    let m = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut grid = vec![Decomposition::new(None)];
    if m > 0.0 {
        grid.push(Decomposition::new(Some(0.0)));
        grid.extend((0..=CLIP_GRID_DEPTH).map(|k| Decomposition::new(Some(m * 0.5f64.powi(k as i32)))));
    }
    grid
}

/// Builds the clipping decomposition with the smallest upper sum and the lower chain.
pub fn run_sandwich(scenario: &ScenarioConfig) -> Result<SandwichReport, LabError> {
    let reps = scenario.replications;
    if reps < 2 {
        return Err(crate::error::McError::TooFewReplications(reps).into());
    }
    let rows = scenario.family.rows();
    let grid = clip_grid(rows);
    let splits: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = grid.iter().map(|d| d.split(rows)).collect();
    let abs_rows: Vec<Vec<Vec<f64>>> = splits
        .iter()
        .map(|(_, t2)| t2.iter().map(|r| r.iter().map(|v| v.abs()).collect()).collect())
        .collect();
    let fam = &scenario.family;
    // salt 0: the same configurations as `estimate_esup`
    let per_rep = replicate(scenario, 0, reps, |c, _| {
        let x = eval_process(c, fam).expect("same space");
        let signed = sup_of(&x);
        let abs = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let t2: Vec<f64> = abs_rows
            .iter()
            .map(|rs| rs.iter().map(|r| c.sum_over_points(|k| r[k])).fold(0.0, f64::max))
            .collect();
        (signed, abs, t2)
    });
    let column = |f: &dyn Fn(&(f64, f64, Vec<f64>)) -> f64| McEstimate::from_samples(&per_rep.iter().map(f).collect::<Vec<_>>());
    let esup = column(&|p| p.0);
    let abs_of_sup = column(&|p| p.1);
    let zero_gap = column(&|p| p.1 - 3.0 * p.0);

    let mut best: Option<(usize, f64, f64, McEstimate)> = None;
    for (i, (t1, _)) in splits.iter().enumerate() {
        let (d2, dinf) = distances_of_rows(scenario, t1);
        let (g2, g1) = (gamma_value(&d2, 2), gamma_value(&dinf, 1));
        let abs_t2 = column(&|p| p.2[i]);
        let total = g2 + g1 + abs_t2.mean;
        if best.as_ref().is_none_or(|b| total < b.1 + b.2 + b.3.mean) {
            best = Some((i, g2, g1, abs_t2));
        }
    }
    let (i, gamma2_t1, gamma1_t1, abs_t2) = best.expect("grid is never empty");

    let phi = PhiFamily::new(scenario);
    let bounds = beta_bounds(&phi, MEASURE_BUDGET, DEFAULT_LEVELS);
    let built = build_partition_tree(&phi, &bounds.beta_prime_witness, None)?;
    let beta_tree = (0..scenario.n_points()).map(|t| built.tree.chain_sum(t)).fold(0.0, f64::max);

    let upper = gamma2_t1 + gamma1_t1 + abs_t2.mean;
    Ok(SandwichReport {
        measured_ratio_up: ratio(esup.mean, upper),
        measured_ratio_down: ratio(beta_tree, esup.mean),
        esup_mc: esup,
        abs_of_sup,
        zero_gap,
        gamma2_t1,
        gamma1_t1,
        abs_t2,
        beta_double_prime: bounds.beta_double_prime,
        beta_prime: bounds.beta_prime,
        beta_tree,
        decomposition: grid[i].clone(),
    })
}

/// Every link of the lower chain within 16, and `E sup X_t` within a factor
/// 64 of the decomposition bound in both directions.
pub fn check_roadmap(scenario: &ScenarioConfig) -> Result<Vec<CheckResult>, LabError> {
    let rep = run_sandwich(scenario)?;
    let link = |name: &str, lhs: f64, rhs: f64, budget: f64| {
        let l = ratio(lhs, rhs);
        CheckResult::new(name, lhs, rhs, l, l <= budget)
    };
    let reps = rep.esup_mc.replications;
    let up = rep.measured_ratio_up;
    let inverse = ratio(rep.upper_sum(), rep.esup_mc.mean);
    Ok(vec![
        link("roadmap_tree_prime", rep.beta_tree, rep.beta_prime, TREE_BUDGET),
        link("roadmap_prime_double_prime", rep.beta_prime, rep.beta_double_prime, TREE_BUDGET),
        link("roadmap_double_prime_esup", rep.beta_double_prime, rep.esup_mc.mean, TREE_BUDGET).with_mc(0.0, reps),
        CheckResult::new("roadmap_esup_upper", rep.esup_mc.mean, rep.upper_sum(), up, up <= SUP_BUDGET && inverse <= SUP_BUDGET)
            .with_mc(0.0, reps)
            .with_note(format!("upper/esup = {inverse:.4}; {}", rep.decomposition.description)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{random_scenario, Atom, FunctionFamily, MeasureSpace};

    #[test]
    fn zero_family_is_all_zero() {
        let measure = MeasureSpace::new(vec![Atom { id: "a".into(), mass: 2.0 }]).unwrap();
        let family = FunctionFamily::new(vec!["0".into()], vec![vec![0.0]], 0, 1).unwrap();
        let sc = ScenarioConfig::new(measure, family, 4, 1, 100).unwrap();
        let rep = run_sandwich(&sc).unwrap();
        assert_eq!(rep.esup_mc.mean, 0.0);
        assert_eq!(rep.upper_sum(), 0.0);
        assert_eq!((rep.beta_prime, rep.beta_double_prime, rep.beta_tree), (0.0, 0.0, 0.0));
        assert!(rep.to_checks().iter().all(|c| c.passed));
    }

    #[test]
    fn symmetric_single_atom() {
        // T = {0, t, −t}, t = c on one atom of mass 1: E sup X = c·E|S_N|
        let c = 1.5;
        let measure = MeasureSpace::new(vec![Atom { id: "a".into(), mass: 1.0 }]).unwrap();
        let family = FunctionFamily::new(
            vec!["0".into(), "t".into(), "-t".into()],
            vec![vec![0.0], vec![c], vec![-c]],
            0,
            1,
        )
        .unwrap();
        let sc = ScenarioConfig::new(measure, family, 4, 3, 40_000).unwrap();
        let rep = run_sandwich(&sc).unwrap();
        let mut p = (-1.0f64).exp();
        let mut exact = 0.0;
        for n in 0..40u32 {
            let mut binom = 1.0f64;
            let mut abs = 0.0;
            for k in 0..=n {
                abs += binom * (2.0 * k as f64 - n as f64).abs();
                binom = binom * (n - k) as f64 / (k + 1) as f64;
            }
            exact += p * c * abs / 2f64.powi(n as i32);
            p /= (n + 1) as f64;
        }
        assert!((rep.esup_mc.mean - exact).abs() < 4.0 * rep.esup_mc.std_error);
        assert!(rep.measured_ratio_up.is_finite() && rep.measured_ratio_up > 0.0);
        assert!(rep.measured_ratio_down.is_finite());
    }

    #[test]
    fn grid_contains_both_extremes() {
        let rows = vec![vec![0.0, 0.0], vec![3.0, -1.0]];
        let grid = clip_grid(&rows);
        assert_eq!(grid.len(), CLIP_GRID_DEPTH + 3);
        let (t1, t2) = grid[0].split(&rows);
        assert_eq!(t1, rows);
        assert!(t2.iter().flatten().all(|&v| v == 0.0));
        let (t1, t2) = grid[1].split(&rows);
        assert!(t1.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(t2, rows);
        let (t1, t2) = grid[3].split(&rows);
        assert_eq!(t1[1], vec![1.5, -1.0]);
        assert_eq!(t2[1], vec![1.5, 0.0]);
    }

    #[test]
    fn random_scenarios_within_budgets() {
        for seed in 0..4 {
            let sc = random_scenario(seed, 6, 4, 1.0).unwrap().with_replications(2000);
            let checks = check_roadmap(&sc).unwrap();
            assert!(checks.iter().all(|c| c.passed), "{checks:?}");
        }
    }
}
