//! The family `{0, t, −t}`, `t(x) = x^(−2)`, under Lebesgue measure.
//!
//! `ν(|t| ⩾ u) = u^(−1/2)` on `(0, ∞)`, so `u·ν(|t| ⩾ u) = √u` is unbounded
//! while `∫ t² ∧ 1 dν` stays finite. Discretized versions on `[x_min, x_max]`
//! show the supremum estimate growing without bound as `x_min → 0`.

use serde::Serialize;

use super::CheckResult;
use crate::error::LabError;
use crate::poisson_mc::replicate;
use crate::scenario::{make_example_ex, ScenarioConfig};
use crate::stats::McEstimate;

const SALT_EX: u64 = 0xEE;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleExParams {
    /// Decreasing lower endpoints for the divergence sweep.
    pub x_min_sweep: Vec<f64>,
    pub x_max: f64,
    pub replications: usize,
    pub seed: u64,
    /// Atoms per unit of `x_min`: the cell width is `x_min / cells_per_x_min`.
    pub cells_per_x_min: usize,
    /// Fine discretization for the tail identity.
    pub tail_x_min: f64,
    pub tail_x_max: f64,
    pub tail_atoms: usize,
}

impl Default for ExampleExParams {
    fn default() -> ExampleExParams {
        ExampleExParams {
            x_min_sweep: vec![0.5, 0.2, 0.1, 0.05, 0.02],
            x_max: 10.0,
            replications: 20_000,
            seed: 0,
            cells_per_x_min: 20,
            tail_x_min: 1e-5,
            tail_x_max: 2.0,
            tail_atoms: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x_min: f64,
    pub x_max: f64,
    pub n_atoms: usize,
    /// `E sup_{0,t,−t} X = E|X_t|`.
    pub esup_mean: f64,
    pub esup_se: f64,
    /// `E (Σ_i t(Z_i)²)^(1/2)`.
    pub esqrt_mean: f64,
    pub esqrt_se: f64,
    /// `Σ mass·(t² ∧ 1)` over all atoms.
    pub phi_sum: f64,
    /// The same sum over atoms in `[1, x_max]`.
    pub phi_sum_tail: f64,
    /// `sup_u u·ν(|t| ⩾ u)`.
    pub khintchine_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Fitted slope of `log(u·ν(|t| ⩾ u))` against `log u`, `u ∈ [1, 10³]`.
    pub slope: f64,
    /// Largest relative error of `ν(|t| ⩾ u)` against `u^(−1/2) − x_min`, same range.
    pub tail_rel_error: f64,
}

/// `ν(|t| ⩾ u)` on the atoms of a discretized scenario.
fn tail_mass(sc: &ScenarioConfig, u: f64) -> f64 {
    let row = sc.family.row(1);
    sc.measure.integrate(|k| if row[k].abs() >= u { 1.0 } else { 0.0 })
}

fn tail_grid() -> Vec<f64> {
    (0..=12).map(|k| 10f64.powf(k as f64 / 4.0)).collect()
}

/// Least-squares slope of `ys` on `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn sweep_row(params: &ExampleExParams, x_min: f64) -> Result<SweepRow, LabError> {
    let width = x_min / params.cells_per_x_min as f64;
    let n_atoms = ((params.x_max - x_min) / width).ceil() as usize;
    let sc = make_example_ex(x_min, params.x_max, n_atoms)?
        .with_seed(params.seed)
        .with_replications(params.replications);
    let t = sc.family.row(1);
    let samples = replicate(&sc, SALT_EX, params.replications, |c, _| {
        let x: f64 = c.net_signs().map(|(k, n)| n as f64 * t[k]).sum();
        let sq = c.sum_over_points(|k| t[k] * t[k]);
        (x.abs(), sq.sqrt())
    });
    let esup = McEstimate::from_samples(&samples.iter().map(|s| s.0).collect::<Vec<_>>());
    let esqrt = McEstimate::from_samples(&samples.iter().map(|s| s.1).collect::<Vec<_>>());
    let mids: Vec<f64> = crate::scenario::example_ex_midpoints(x_min, params.x_max, n_atoms);
    let phi_sum = sc.measure.integrate(|k| (t[k] * t[k]).min(1.0));
    let phi_sum_tail = sc.measure.integrate(|k| if mids[k] >= 1.0 { (t[k] * t[k]).min(1.0) } else { 0.0 });
    // atoms are sorted by x, so |t| decreases with k
    let w = sc.measure.mass(0);
    let khintchine_proxy = (0..n_atoms).map(|k| t[k] * (k + 1) as f64 * w).fold(0.0, f64::max);
    Ok(SweepRow {
        x_min,
        x_max: params.x_max,
        n_atoms,
        esup_mean: esup.mean,
        esup_se: esup.std_error,
        esqrt_mean: esqrt.mean,
        esqrt_se: esqrt.std_error,
        phi_sum,
        phi_sum_tail,
        khintchine_proxy,
    })
}

/// Runs the `x_min` sweep and the tail fit.
pub fn run_example_ex_sweep(params: &ExampleExParams) -> Result<SweepTable, LabError> {
    if params.x_min_sweep.is_empty() {
        return Err(LabError::Precondition("empty x_min sweep".into()));
    }
    let rows = params
        .x_min_sweep
        .iter()
        .map(|&x| sweep_row(params, x))
        .collect::<Result<Vec<_>, _>>()?;
    let fine = make_example_ex(params.tail_x_min, params.tail_x_max, params.tail_atoms)?;
    let us = tail_grid();
    let masses: Vec<f64> = us.iter().map(|&u| tail_mass(&fine, u)).collect();
    let tail_rel_error = us
        .iter()
        .zip(&masses)
        .map(|(&u, &m)| {
            let exact = u.powf(-0.5) - params.tail_x_min;
            (m / exact - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let xs: Vec<f64> = us.iter().map(|u| u.ln()).collect();
    let ys: Vec<f64> = us.iter().zip(&masses).map(|(u, m)| (u * m).ln()).collect();
    Ok(SweepTable {
        rows,
        slope: slope(&xs, &ys),
        tail_rel_error,
    })
}

fn strictly_increasing(values: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.collect();
    v.windows(2).all(|w| w[1] > w[0])
}

/// Tail identity within 1%, slope `1/2 ± 0.05`, strictly increasing
/// `E|X_t|` and `E(Σ t(Z_i)²)^(1/2)` along the sweep, and bounded `Σ mass·(t² ∧ 1)`.
pub fn check_example_ex(params: &ExampleExParams) -> Result<Vec<CheckResult>, LabError> {
    let table = run_example_ex_sweep(params)?;
    let reps = params.replications;
    let first = &table.rows[0];
    let last = table.rows.last().unwrap();
    let limit_tail = (1.0 - params.x_max.powi(-3)) / 3.0;
    let worst_tail = table
        .rows
        .iter()
        .map(|r| r.phi_sum_tail / limit_tail)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), q| (lo.min(q), hi.max(q)));
    let worst_total = table
        .rows
        .iter()
        .map(|r| r.phi_sum / (1.0 - r.x_min + limit_tail))
        .fold(0.0f64, f64::max);
    Ok(vec![
        CheckResult::new("example_ex_tail", table.tail_rel_error, 0.01, table.tail_rel_error, table.tail_rel_error < 0.01),
        CheckResult::new("example_ex_slope", table.slope, 0.5, (table.slope - 0.5).abs(), (table.slope - 0.5).abs() <= 0.05),
        CheckResult::new(
            "example_ex_esup_increasing",
            last.esup_mean,
            first.esup_mean,
            last.esup_mean / first.esup_mean,
            strictly_increasing(table.rows.iter().map(|r| r.esup_mean)),
        )
        .with_mc(0.0, reps),
        CheckResult::new(
            "example_ex_esqrt_increasing",
            last.esqrt_mean,
            first.esqrt_mean,
            last.esqrt_mean / first.esqrt_mean,
            strictly_increasing(table.rows.iter().map(|r| r.esqrt_mean)),
        )
        .with_mc(0.0, reps),
        CheckResult::new(
            "example_ex_bounded_tail_part",
            worst_tail.1,
            limit_tail,
            worst_tail.1,
            worst_tail.0 >= 0.5 && worst_tail.1 <= 2.0,
        )
        .with_note(format!("ratio to limit in [{:.4}, {:.4}]", worst_tail.0, worst_tail.1)),
        CheckResult::new("example_ex_bounded_total", worst_total, 2.0, worst_total, worst_total <= 2.0),
    ])
}
