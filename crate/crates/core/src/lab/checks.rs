use std::collections::HashMap;

use rand::Rng;

use super::{ratio, CheckResult, SUP_BUDGET, TREE_BUDGET};
use crate::error::{LabError, McError};
use crate::majorizing::{
    compute_j0, compute_jn, mix_measures, sup_all_pairs, LabelProfile, MeasureOnT, DEFAULT_LEVELS,
};
use crate::metric::{compute_d2, compute_dinf, DistanceKind, DistanceMatrix, PhiFamily, ScaleDistance};
use crate::partition::{build_partition_tree, gamma_exact, gamma_greedy, EXACT_CAP};
use crate::poisson_mc::{
    empirical_tails, eval_abs_process, eval_process, estimate_esup, fit_tail_constant, replicate,
    sup_of, EsupMode, PppSampler,
};
use crate::scale::Scale;
use crate::scenario::ScenarioConfig;
use crate::stats::{binomial_std_error, stream_rng, McEstimate};

const SALT_CAMPBELL: u64 = 0xCA;
const SALT_EXP: u64 = 0xE1;
const SALT_INDEP: u64 = 0x1D;
const SALT_GZ: u64 = 0x62;
const SALT_GORA: u64 = 0x60;
const SALT_CONC: u64 = 0xC0;
const SALT_MIX: u64 = 0x31;
const SALT_JOTY: u64 = 0x70;
const SALT_SYM: u64 = 0x5E;

/// Largest fitted constant accepted by the two-regime tail bound.
pub const TAIL_BUDGET: f64 = 8.0;

fn need_replications(scenario: &ScenarioConfig) -> Result<usize, McError> {
    match scenario.replications {
        n if n < 2 => Err(McError::TooFewReplications(n)),
        n => Ok(n),
    }
}

/// Passes `mean(D) ⩽ bound + k·SE(D)`.
fn within(mean: f64, se: f64, bound: f64, k: f64) -> bool {
    mean <= bound + k * se + 1e-12 * bound.abs().max(mean.abs()).max(1.0)
}

/// `f(ω_k) = max_t |t(ω_k)| ∧ 1 + 1/2`.
pub fn default_campbell_f(scenario: &ScenarioConfig) -> Vec<f64> {
    (0..scenario.n_atoms())
        .map(|k| {
            let m = (0..scenario.n_points()).fold(0.0f64, |m, t| m.max(scenario.family.value(t, k).abs()));
            m.min(1.0) + 0.5
        })
        .collect()
}

/// `E Σ_i f(Z_i) = ∫ f dν`, within four standard errors.
pub fn check_campbell(scenario: &ScenarioConfig, f: &[f64]) -> Result<CheckResult, LabError> {
    let reps = need_replications(scenario)?;
    if f.len() != scenario.n_atoms() {
        return Err(McError::DimensionMismatch {
            config: scenario.n_atoms(),
            family: f.len(),
        }
        .into());
    }
    let exact = scenario.measure.integrate(|k| f[k]);
    let samples = replicate(scenario, SALT_CAMPBELL, reps, |c, _| c.sum_over_points(|k| f[k]));
    let est = McEstimate::from_samples(&samples);
    let gap = (est.mean - exact).abs();
    let passed = within(gap, est.std_error, 0.0, 4.0);
    Ok(CheckResult::new("campbell", est.mean, exact, ratio(gap, est.std_error), passed).with_mc(4.0, reps))
}

/// `(t, λ)` pairs with `λ = ±c / max(d∞(t,0), d₂(t,0))`, `c ∈ {1/2, 1}`, for up to five `t`.
pub fn exp_identity_cases(scenario: &ScenarioConfig) -> Vec<(usize, f64)> {
    let zero = scenario.family.zero_index();
    let masses: Vec<f64> = scenario.measure.masses().collect();
    let mut out = Vec::new();
    for t in (0..scenario.n_points()).filter(|&t| t != zero).take(5) {
        let row = scenario.family.row(t);
        let dinf = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let d2 = row.iter().zip(&masses).map(|(v, m)| m * v * v).sum::<f64>().sqrt();
        let scale = dinf.max(d2);
        for c in [0.5, 1.0] {
            for sign in [1.0, -1.0] {
                out.push((t, sign * c / scale));
            }
        }
    }
    out
}

/// `E exp(λX_t) = exp(∫ (cosh(λt) − 1) dν)` within 5% relative error or, when
/// the estimate is noisier than that, within four standard errors.
pub fn check_exp_identity(scenario: &ScenarioConfig, t: usize, lambda: f64) -> Result<CheckResult, LabError> {
    let reps = need_replications(scenario)?;
    let row = scenario.family.row(t);
    let exact = scenario.measure.integrate(|k| (lambda * row[k]).cosh() - 1.0).exp();
    let samples = replicate(scenario, SALT_EXP, reps, |c, _| {
        (lambda * c.net_signs().map(|(k, n)| n as f64 * row[k]).sum::<f64>()).exp()
    });
    let est = McEstimate::from_samples(&samples);
    let rel = (est.mean / exact - 1.0).abs();
    // at small replication counts the 5% band can be narrower than the noise
    let passed = rel <= 0.05 || (est.mean - exact).abs() <= 4.0 * est.std_error;
    Ok(CheckResult::new("exp_identity", est.mean, exact, rel, passed)
        .with_mc(4.0, reps)
        .with_note(format!("t={} lambda={lambda:e}", scenario.family.ids()[t])))
}

/// Counts on even and odd atoms are uncorrelated: `|ρ| ⩽ max(0.02, 6.33/√R)`.
pub fn check_independence(scenario: &ScenarioConfig) -> Result<CheckResult, LabError> {
    let reps = need_replications(scenario)?;
    let limit = 0.02f64.max(6.33 / (reps as f64).sqrt());
    if scenario.n_atoms() < 2 {
        return Ok(CheckResult::new("independence", 0.0, limit, 0.0, true)
            .with_mc(0.0, reps)
            .with_note("fewer than two atoms"));
    }
    let pairs = replicate(scenario, SALT_INDEP, reps, |c, _| {
        c.occupied().iter().fold((0.0, 0.0), |(a, b), &(k, n)| {
            if k % 2 == 0 {
                (a + n as f64, b)
            } else {
                (a, b + n as f64)
            }
        })
    });
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (mx, my) = (McEstimate::from_samples(&xs).mean, McEstimate::from_samples(&ys).mean);
    let cov: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let vx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let vy: Vec<f64> = ys.iter().map(|y| (y - my) * (y - my)).collect();
    let (c, sx, sy) = (
        McEstimate::from_samples(&cov).mean,
        McEstimate::from_samples(&vx).mean,
        McEstimate::from_samples(&vy).mean,
    );
    let rho = if sx > 0.0 && sy > 0.0 { c / (sx * sy).sqrt() } else { 0.0 };
    Ok(CheckResult::new("independence", rho.abs(), limit, rho, rho.abs() <= limit).with_mc(0.0, reps))
}

/// Fitted constant of `P(|X_t − X_0| ⩾ v) ⩽ 2exp(−min(v²/d₂², v/d∞)/L)` per `t`.
///
/// Thresholds `v = max(d₂, d∞)·2^k`, `k = −2..3`; frequencies below
/// `10/R` are too noisy and are left out of the fit.
pub fn check_tail(scenario: &ScenarioConfig) -> Result<Vec<CheckResult>, LabError> {
    let reps = need_replications(scenario)?;
    let zero = scenario.family.zero_index();
    let (d2, dinf) = (compute_d2(scenario), compute_dinf(scenario));
    let mut out = Vec::new();
    for t in (0..scenario.n_points()).filter(|&t| t != zero) {
        let (a, b) = (d2.get(t, zero), dinf.get(t, zero));
        let vs: Vec<f64> = (-2..=3).map(|k| a.max(b) * 2f64.powi(k)).collect();
        let probs = empirical_tails(scenario, t, zero, &vs)?;
        let floor = 10.0 / reps as f64;
        let (fv, fp): (Vec<f64>, Vec<f64>) = vs.iter().zip(&probs).filter(|(_, &p)| p >= floor).unzip();
        let fitted = fit_tail_constant(&fv, &fp, a, b);
        out.push(
            CheckResult::new("tail", fitted, TAIL_BUDGET, fitted, fitted <= TAIL_BUDGET)
                .with_mc(0.0, reps)
                .with_note(format!("t={}", scenario.family.ids()[t])),
        );
    }
    Ok(out)
}

/// `E sup|X|_t ⩽ sup_t ∫|t|dν + 4 E sup_t |X_t|`, paired per replication, 4σ margin.
pub fn check_gine_zinn(scenario: &ScenarioConfig) -> Result<CheckResult, LabError> {
    let reps = need_replications(scenario)?;
    let fam = &scenario.family;
    let integral = (0..fam.len())
        .map(|t| scenario.measure.integrate(|k| fam.value(t, k).abs()))
        .fold(0.0, f64::max);
    let pairs = replicate(scenario, SALT_GZ, reps, |c, _| {
        let a = sup_of(&eval_abs_process(c, fam).expect("same space"));
        let b = eval_process(c, fam).expect("same space").iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (a, b)
    });
    let lhs = McEstimate::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let sup_abs = McEstimate::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let diff = McEstimate::from_samples(&pairs.iter().map(|p| p.0 - 4.0 * p.1).collect::<Vec<_>>());
    let rhs = integral + 4.0 * sup_abs.mean;
    let passed = within(diff.mean, diff.std_error, integral, 4.0);
    Ok(CheckResult::new("gine_zinn", lhs.mean, rhs, rhs - lhs.mean, passed).with_mc(4.0, reps))
}

/// `E sup X_t ⩽ E sup |X|_t`, paired per replication, 3σ margin.
pub fn check_gora(scenario: &ScenarioConfig) -> Result<CheckResult, LabError> {
    let reps = need_replications(scenario)?;
    let fam = &scenario.family;
    let pairs = replicate(scenario, SALT_GORA, reps, |c, _| {
        (
            sup_of(&eval_process(c, fam).expect("same space")),
            sup_of(&eval_abs_process(c, fam).expect("same space")),
        )
    });
    let lhs = McEstimate::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let rhs = McEstimate::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let diff = McEstimate::from_samples(&pairs.iter().map(|p| p.0 - p.1).collect::<Vec<_>>());
    let passed = within(diff.mean, diff.std_error, 0.0, 3.0);
    Ok(CheckResult::new("gora", lhs.mean, rhs.mean, rhs.mean - lhs.mean, passed).with_mc(3.0, reps))
}

/// `γ_α` by exhaustive search when `|T| ⩽ 6`, otherwise the greedy upper bound.
pub fn gamma_value(d: &DistanceMatrix, alpha: u8) -> f64 {
    if d.len() <= EXACT_CAP {
        gamma_exact(d, alpha).expect("within cap").value
    } else {
        gamma_greedy(d, alpha, None).value
    }
}

/// Measured `L` in `E sup X_t ⩽ L(γ₂(T,d₂) + γ₁(T,d∞))`.
pub fn check_bern_upper(scenario: &ScenarioConfig) -> Result<CheckResult, LabError> {
    let esup = estimate_esup(scenario, EsupMode::Signed)?;
    let chain = gamma_value(&compute_d2(scenario), 2) + gamma_value(&compute_dinf(scenario), 1);
    let l = ratio(esup.mean, chain);
    Ok(CheckResult::new("bern_upper", esup.mean, chain, l, l <= SUP_BUDGET).with_mc(0.0, esup.replications))
}

/// All `(s, t, j)` with `s < t`, `j` in the scale window and `φ_j(s,t) ∈ [lo, hi]`.
pub fn concentration_triples(scenario: &ScenarioConfig, lo: f64, hi: f64) -> Vec<(usize, usize, i32)> {
    let phi = PhiFamily::new(scenario);
    let Some(w) = phi.window() else {
        return Vec::new();
    };
    let n = scenario.n_points();
    let mut out = Vec::new();
    for s in 0..n {
        for t in s + 1..n {
            for j in w.linear..=w.saturated {
                let v = phi.phi(Scale::Finite(j), s, t);
                if (lo..=hi).contains(&v) {
                    out.push((s, t, j));
                }
            }
        }
    }
    out
}

/// `P(φ̃_{j,Z}(s,t) ⩽ φ_j(s,t)/4) ⩽ exp(−φ_j(s,t)/4)` with a 3σ binomial margin.
pub fn check_concentration(scenario: &ScenarioConfig, s: usize, t: usize, j: i32) -> Result<CheckResult, LabError> {
    Ok(check_concentration_many(scenario, &[(s, t, j)])?.remove(0))
}

/// [`check_concentration`] for many triples from one Monte Carlo run.
pub fn check_concentration_many(
    scenario: &ScenarioConfig,
    triples: &[(usize, usize, i32)],
) -> Result<Vec<CheckResult>, LabError> {
    let reps = need_replications(scenario)?;
    let n = scenario.n_points();
    for &(s, t, _) in triples {
        for index in [s, t] {
            if index >= n {
                return Err(McError::IndexOutOfRange { index, len: n }.into());
            }
        }
    }
    let r = scenario.r();
    let fam = &scenario.family;
    let targets: Vec<f64> = triples
        .iter()
        .map(|&(s, t, j)| crate::metric::phi(scenario, j, s, t))
        .collect();
    let hits = replicate(scenario, SALT_CONC, reps, |c, _| {
        triples
            .iter()
            .zip(&targets)
            .map(|(&(s, t, j), &target)| {
                let f = r.powi(2 * j);
                let (a, b) = (fam.row(s), fam.row(t));
                let v = c.sum_over_points(|k| {
                    let d = (a[k] - b[k]) * (a[k] - b[k]);
                    if d > 0.0 {
                        (f * d).min(1.0)
                    } else {
                        0.0
                    }
                });
                v <= target / 4.0
            })
            .collect::<Vec<bool>>()
    });
    Ok(triples
        .iter()
        .enumerate()
        .map(|(i, &(s, t, j))| {
            let freq = hits.iter().filter(|h| h[i]).count() as f64 / reps as f64;
            let bound = (-targets[i] / 4.0).exp();
            let margin = 3.0 * binomial_std_error(bound, reps);
            CheckResult::new("concentration", freq, bound, bound + margin - freq, freq <= bound + margin)
                .with_mc(3.0, reps)
                .with_note(format!("s={s} t={t} j={j} phi={:.6}", targets[i]))
        })
        .collect())
}

/// Tree from `mu` (default: uniform) passes the validator, the index shift
/// `j_n(A_n(t)) = j̃_{n−2}(t)` for `n ⩾ 3`, and `L_meas ⩽ 16`.
pub fn check_partition(scenario: &ScenarioConfig, mu: Option<&MeasureOnT>) -> Result<CheckResult, LabError> {
    let phi = PhiFamily::new(scenario);
    let n = scenario.n_points();
    let mu = mu.cloned().unwrap_or_else(|| MeasureOnT::uniform(n));
    let built = match build_partition_tree(&phi, &mu, None) {
        Ok(b) => b,
        Err(e) => {
            return Ok(CheckResult::new("partition", f64::NAN, f64::NAN, f64::NAN, false).with_note(e.to_string()))
        }
    };
    let beta = (0..n).map(|t| built.tree.chain_sum(t)).fold(0.0, f64::max);
    let top = built.tree.n_max();
    let refined = (0..n)
        .map(|t| crate::majorizing::chain_sum(&built.profile.refined_column(t)[..=top], phi.r()))
        .fold(0.0, f64::max);
    let mut note = String::new();
    if let Err(e) = built.tree.validate(&phi) {
        note = e.to_string();
    }
    let shifted = (0..n).all(|t| {
        let labels = built.tree.labels_of(t);
        (3..labels.len()).all(|k| labels[k] == built.profile.refined[k - 2][t])
    });
    if !shifted && note.is_empty() {
        note = "tree labels do not follow the refined profile".into();
    }
    let l = built.measured_constant;
    Ok(
        CheckResult::new("partition", beta, refined, l, note.is_empty() && l <= TREE_BUDGET)
            .with_note(note),
    )
}

fn random_measure(rng: &mut impl Rng, n: usize) -> MeasureOnT {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.7) { -rng.random::<f64>().ln_1p_neg() } else { 0.0 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let s: f64 = w.iter().sum();
    w[0] += 1.0 - s;
    MeasureOnT::new(w.into_iter().map(|x| x.max(0.0)).collect()).expect("normalized")
}

trait LnOneMinus {
    fn ln_1p_neg(self) -> f64;
}

impl LnOneMinus for f64 {
    /// `ln(1 − x)`, so `−ln(1 − U)` is a unit exponential draw.
    fn ln_1p_neg(self) -> f64 {
        (-self).ln_1p()
    }
}

/// Mixtures `Σ α_i μ_i` of five random measures keep
/// `μ(B_{j_n(t)}(t, 2^n)) ⩾ (2/3)/N_n` at every level with a finite label.
pub fn check_mixing(scenario: &ScenarioConfig, mixtures: usize) -> Result<CheckResult, LabError> {
    let phi = PhiFamily::new(scenario);
    let n = scenario.n_points();
    let mut rng = stream_rng(scenario.rng_seed, SALT_MIX, 0);
    let mut worst_constant = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    let mut failures = 0usize;
    for _ in 0..mixtures {
        let mus: Vec<MeasureOnT> = (0..5).map(|_| random_measure(&mut rng, n)).collect();
        let raw: Vec<f64> = (0..5).map(|_| -(rng.random::<f64>()).ln_1p_neg()).collect();
        let total: f64 = raw.iter().sum();
        let alphas: Vec<f64> = raw.iter().map(|a| a / total).collect();
        for t in 0..n {
            let rec = mix_measures(&phi, &alphas, &mus, t, DEFAULT_LEVELS)?;
            if !rec.ball_bound_holds {
                failures += 1;
            }
            worst_constant = worst_constant.max(rec.constant);
            for (k, &m) in rec.ball_masses.iter().enumerate().skip(1) {
                if rec.labels[k].is_finite() {
                    min_ratio = min_ratio.min(m * crate::majorizing::admissible_size(k) as f64);
                }
            }
        }
    }
    let lhs = if min_ratio.is_finite() { min_ratio } else { 1.0 };
    Ok(CheckResult::new("mixing", lhs, 2.0 / 3.0, worst_constant, failures == 0)
        .with_note(format!("{mixtures} mixtures, min N_n·μ(ball) = {lhs:.4}")))
}

/// Measured `L` in `∫ J_μ dμ ⩽ L·E sup X_t` for the uniform measure.
pub fn check_id2(scenario: &ScenarioConfig) -> Result<CheckResult, LabError> {
    let phi = PhiFamily::new(scenario);
    let profile = LabelProfile::compute(&phi, &MeasureOnT::uniform(scenario.n_points()), DEFAULT_LEVELS);
    let lhs = profile.integral();
    let esup = estimate_esup(scenario, EsupMode::Signed)?;
    let l = ratio(lhs, esup.mean);
    Ok(CheckResult::new("id2", lhs, esup.mean, l, l <= SUP_BUDGET).with_mc(0.0, esup.replications))
}

/// Mass `1 − 10⁻⁷(|T| − 1)` on `zero` and `10⁻⁷` elsewhere, which makes
/// `j_n(t)` finite up to `n = 4` wherever `φ_∞(0,t) > 2^n`.
pub fn joty_measure(n: usize, zero: usize) -> MeasureOnT {
    let eps = 1e-7;
    let mut w = vec![eps; n];
    w[zero] = 1.0 - eps * (n as f64 - 1.0);
    MeasureOnT::new(w).expect("normalized")
}

/// `P(k₀^Z ⩽ j₀) ⩾ 1/2` and `P(k_{n−3}^Z(t) ⩽ j_n(t)) ⩾ 1/2` for `n ⩾ 3`,
/// each with a 3σ margin at `p = 1/2`. One record for `k₀` and one per
/// level `n`, reporting the smallest frequency over points with finite `j_n(t)`.
pub fn check_joty(scenario: &ScenarioConfig, mu: &MeasureOnT) -> Result<Vec<CheckResult>, LabError> {
    let reps = need_replications(scenario)?;
    let phi = PhiFamily::new(scenario);
    let n = scenario.n_points();
    let j0 = compute_j0(&phi);
    let needed: Vec<(usize, usize, i32)> = (3..=DEFAULT_LEVELS)
        .flat_map(|lvl| (0..n).map(move |t| (lvl, t)))
        .filter_map(|(lvl, t)| compute_jn(&phi, mu, t, lvl).finite().map(|j| (lvl, t, j)))
        .collect();
    let margin = 3.0 * binomial_std_error(0.5, reps);
    let threshold = 0.5 - margin;
    let fam = &scenario.family;
    let r = scenario.r();
    let outcomes = replicate(scenario, SALT_JOTY, reps, |c, _| {
        let phi_z = PhiFamily::random(c, fam, r);
        let k0 = sup_all_pairs(&phi_z, 1.0);
        let mut cache: HashMap<(usize, usize), Scale> = HashMap::new();
        let shifted: Vec<bool> = needed
            .iter()
            .map(|&(lvl, t, j)| {
                let m = lvl - 3;
                let k = if m == 0 {
                    k0
                } else {
                    *cache.entry((m, t)).or_insert_with(|| compute_jn(&phi_z, mu, t, m))
                };
                k <= Scale::Finite(j)
            })
            .collect();
        (k0 <= j0, shifted)
    });
    let mut out = Vec::new();
    if j0.is_finite() {
        let freq = outcomes.iter().filter(|o| o.0).count() as f64 / reps as f64;
        out.push(
            CheckResult::new("joty_k0", freq, threshold, freq - threshold, freq >= threshold).with_mc(3.0, reps),
        );
    } else {
        out.push(
            CheckResult::new("joty_k0", 1.0, threshold, 0.0, true)
                .with_mc(3.0, reps)
                .with_note("j0 infinite"),
        );
    }
    for lvl in 3..=DEFAULT_LEVELS {
        let idx: Vec<usize> = (0..needed.len()).filter(|&i| needed[i].0 == lvl).collect();
        if idx.is_empty() {
            continue;
        }
        let (worst, freq) = idx
            .iter()
            .map(|&i| (i, outcomes.iter().filter(|o| o.1[i]).count() as f64 / reps as f64))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        out.push(
            CheckResult::new(format!("joty_n{lvl}"), freq, threshold, freq - threshold, freq >= threshold)
                .with_mc(3.0, reps)
                .with_note(format!("{} points, worst t={}", idx.len(), fam.ids()[needed[worst].1])),
        );
    }
    if out.len() == 1 {
        out[0].note = format!("{}; no finite j_n(t) for n >= 3", out[0].note).trim_start_matches("; ").to_string();
    }
    Ok(out)
}

/// `∫|t| 1{2|t| ⩾ r^(−j₀(t))} dν ⩽ 64·E sup X_s`, with `j₀(t)` taken over the pair `{0, t}`.
pub fn check_pois1(scenario: &ScenarioConfig, t: usize) -> Result<CheckResult, LabError> {
    let n = scenario.n_points();
    if t >= n {
        return Err(McError::IndexOutOfRange { index: t, len: n }.into());
    }
    let zero = scenario.family.zero_index();
    let row = scenario.family.row(t);
    if t == zero || row.iter().all(|&v| v == 0.0) {
        return Ok(CheckResult::new("pois1", 0.0, 0.0, 0.0, true).with_note("t is the zero function"));
    }
    let pair = PhiFamily::from_parts(
        scenario.r(),
        scenario.measure.masses().collect(),
        &[scenario.family.row(zero).to_vec(), row.to_vec()],
        false,
    );
    let Scale::Finite(j0) = compute_j0(&pair) else {
        return Err(LabError::Precondition(format!(
            "j0 of {{0, {}}} is not finite",
            scenario.family.ids()[t]
        )));
    };
    let cut = scenario.r().powi(-j0);
    let lhs = scenario.measure.integrate(|k| {
        let v = row[k].abs();
        if 2.0 * v >= cut {
            v
        } else {
            0.0
        }
    });
    let esup = estimate_esup(scenario, EsupMode::Signed)?;
    if esup.mean <= 0.0 && lhs > 0.0 {
        return Err(LabError::Degenerate(format!(
            "E sup X estimated as {} while the truncated integral is {lhs}",
            esup.mean
        )));
    }
    let l = ratio(lhs, esup.mean);
    Ok(CheckResult::new("pois1", lhs, esup.mean, l, l <= SUP_BUDGET)
        .with_mc(0.0, esup.replications)
        .with_note(format!("t={} j0={j0}", scenario.family.ids()[t])))
}

/// With an independent copy `X′`, `A = E sup(X_t − X′_t)` and `B = E sup|X_t|`
/// satisfy `A ⩽ 2B` and `B ⩽ 2A`, each paired per replication with a 4σ margin.
pub fn check_symmetrization(scenario: &ScenarioConfig) -> Result<Vec<CheckResult>, LabError> {
    let reps = need_replications(scenario)?;
    let fam = &scenario.family;
    let sampler = PppSampler::new(&scenario.measure);
    let pairs = replicate(scenario, SALT_SYM, reps, |c, rng| {
        let copy = sampler.sample(rng);
        let x = eval_process(c, fam).expect("same space");
        let y = eval_process(&copy, fam).expect("same space");
        let a = x.iter().zip(&y).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        let b = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (a, b)
    });
    let a = McEstimate::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let b = McEstimate::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let upper = McEstimate::from_samples(&pairs.iter().map(|p| p.0 - 2.0 * p.1).collect::<Vec<_>>());
    let lower = McEstimate::from_samples(&pairs.iter().map(|p| p.1 - 2.0 * p.0).collect::<Vec<_>>());
    Ok(vec![
        CheckResult::new("symmetrization_upper", a.mean, 2.0 * b.mean, 2.0 * b.mean - a.mean, within(upper.mean, upper.std_error, 0.0, 4.0))
            .with_mc(4.0, reps),
        CheckResult::new("symmetrization_lower", b.mean, 2.0 * a.mean, 2.0 * a.mean - b.mean, within(lower.mean, lower.std_error, 0.0, 4.0))
            .with_mc(4.0, reps),
    ])
}

/// Distances between arbitrary rows under the scenario's atom masses.
pub(crate) fn distances_of_rows(scenario: &ScenarioConfig, rows: &[Vec<f64>]) -> (DistanceMatrix, DistanceMatrix) {
    let masses: Vec<f64> = scenario.measure.masses().collect();
    (
        DistanceMatrix::from_rows(rows, &masses, DistanceKind::D2),
        DistanceMatrix::from_rows(rows, &masses, DistanceKind::Dinf),
    )
}
