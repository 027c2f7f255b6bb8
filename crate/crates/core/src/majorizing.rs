//! Measure-indexed chaining functionals.
//!
//! For a probability measure `μ` on `T` the labels are
//! `j₀ = sup{j : φ_j(s,t) ⩽ 4 ∀s,t}` and, for `n ⩾ 1`,
//! `j_n^μ(t) = sup{j : μ(B_j(t, 2^n)) ⩾ 1/N_n}` with `N_n = 2^(2^n)`.
//! `J_μ(t) = Σ_n 2^n r^(−j_n^μ(t))`. The same definitions over the random
//! family `φ̃_{j,Z}` give `k_n^Z(t)` and `I_{μ,Z}(t)`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::MeasureError;
use crate::metric::{PhiFamily, ScaleDistance};
use crate::poisson_mc::PointConfiguration;
use crate::scale::{sup_scale, Scale};
use crate::scenario::ScenarioConfig;

/// Number of levels `0..=DEFAULT_LEVELS` used for label profiles.
pub const DEFAULT_LEVELS: usize = 6;

const MASS_RTOL: f64 = 1e-12;

/// `N_n = 2^(2^n)` for `n ⩾ 1`, `N₀ = 1`, saturating at `u64::MAX`.
pub fn admissible_size(n: usize) -> u64 {
    match n {
        0 => 1,
        n if n >= 6 => u64::MAX,
        n => 1u64 << (1u32 << n),
    }
}

/// `1/N_n` as a float (exact powers of two down to subnormals).
pub fn inverse_size(n: usize) -> f64 {
    if n == 0 {
        1.0
    } else if n >= 11 {
        0.0
    } else {
        0.5f64.powi(1 << n)
    }
}

/// Probability weights over the index set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureOnT {
    weights: Vec<f64>,
}

impl MeasureOnT {
    pub fn new(weights: Vec<f64>) -> Result<MeasureOnT, MeasureError> {
        for (index, &value) in weights.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(MeasureError::BadWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MeasureError::NotNormalized(sum));
        }
        Ok(MeasureOnT { weights })
    }

    /// Checks the length against the index set.
    pub fn for_points(weights: Vec<f64>, n: usize) -> Result<MeasureOnT, MeasureError> {
        if weights.len() != n {
            return Err(MeasureError::WrongLength {
                expected: n,
                got: weights.len(),
            });
        }
        MeasureOnT::new(weights)
    }

    pub fn uniform(n: usize) -> MeasureOnT {
        MeasureOnT {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, t: usize) -> MeasureOnT {
        let mut weights = vec![0.0; n];
        weights[t] = 1.0;
        MeasureOnT { weights }
    }

    pub fn uniform_on(n: usize, support: &[usize]) -> MeasureOnT {
        let mut weights = vec![0.0; n];
        for &t in support {
            weights[t] = 1.0 / support.len() as f64;
        }
        MeasureOnT { weights }
    }

    /// `Σ α_i μ_i`.
    pub fn mixture(alphas: &[f64], mus: &[MeasureOnT]) -> Result<MeasureOnT, MeasureError> {
        let sum: f64 = alphas.iter().sum();
        if alphas.len() != mus.len()
            || mus.is_empty()
            || alphas.iter().any(|a| !(*a >= 0.0))
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(MeasureError::BadMixture);
        }
        let n = mus[0].len();
        if mus.iter().any(|m| m.len() != n) {
            return Err(MeasureError::BadMixture);
        }
        let weights = (0..n)
            .map(|t| alphas.iter().zip(mus).map(|(a, m)| a * m.weights[t]).sum::<f64>() / sum)
            .collect();
        Ok(MeasureOnT { weights })
    }

    /// `½μ + ½·uniform`, which puts mass at least `1/(2|T|)` on every point.
    pub fn floored(&self) -> MeasureOnT {
        let n = self.len() as f64;
        MeasureOnT {
            weights: self.weights.iter().map(|w| 0.5 * w + 0.5 / n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, t: usize) -> f64 {
        self.weights[t]
    }

    pub fn mass_of(&self, points: impl IntoIterator<Item = usize>) -> f64 {
        points.into_iter().map(|t| self.weights[t]).sum()
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, v)| w * v)
            .sum()
    }
}

fn mass_at_least(mass: f64, threshold: f64) -> bool {
    mass >= threshold * (1.0 - MASS_RTOL)
}

/// `sup{j : φ_j(s,t) ⩽ threshold for all s, t}`.
pub fn sup_all_pairs(phi: &impl ScaleDistance, threshold: f64) -> Scale {
    let n = phi.n_points();
    sup_scale(phi.window(), |j| {
        (0..n).all(|s| (s + 1..n).all(|t| phi.phi(j, s, t) <= threshold))
    })
}

/// `sup{j : μ(B_j(t, radius)) ⩾ mass}`.
pub fn sup_ball(phi: &impl ScaleDistance, mu: &MeasureOnT, t: usize, radius: f64, mass: f64) -> Scale {
    let n = phi.n_points();
    sup_scale(phi.window(), |j| {
        let m = mu.mass_of((0..n).filter(|&s| phi.phi(j, s, t) <= radius));
        mass_at_least(m, mass)
    })
}

/// `j₀` with the threshold 4.
pub fn compute_j0(phi: &impl ScaleDistance) -> Scale {
    sup_all_pairs(phi, 4.0)
}

pub fn compute_j0_for(scenario: &ScenarioConfig) -> Scale {
    compute_j0(&PhiFamily::new(scenario))
}

/// `j_n^μ(t)` for `n ⩾ 1`.
pub fn compute_jn(phi: &impl ScaleDistance, mu: &MeasureOnT, t: usize, n: usize) -> Scale {
    assert!(n >= 1, "level must be at least 1");
    sup_ball(phi, mu, t, 2f64.powi(n as i32), inverse_size(n))
}

/// Random label `k_n^Z(t)`: for `n = 0` the global
/// `sup{j : φ̃_{j,Z}(s,t) ⩽ 1 ∀ s,t}`, otherwise the ball definition with `φ̃_{j,Z}`.
pub fn compute_kn(phi_z: &impl ScaleDistance, mu: &MeasureOnT, t: usize, n: usize) -> Scale {
    if n == 0 {
        sup_all_pairs(phi_z, 1.0)
    } else {
        compute_jn(phi_z, mu, t, n)
    }
}

pub fn compute_kn_random(
    config: &PointConfiguration,
    scenario: &ScenarioConfig,
    mu: &MeasureOnT,
    t: usize,
    n: usize,
) -> Scale {
    let phi_z = PhiFamily::random(config, &scenario.family, scenario.r());
    compute_kn(&phi_z, mu, t, n)
}

/// `Σ_{n ⩽ levels} 2^n r^(−labels[n])`, with `+∞` labels contributing 0.
pub fn chain_sum(labels: &[Scale], r: f64) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(n, j)| {
            let w = j.weight(r);
            if w == 0.0 {
                0.0
            } else {
                2f64.powi(n as i32) * w
            }
        })
        .sum()
}

/// `I_{μ,Z}(t) = Σ_n 2^n r^(−k_n^Z(t))` over `0..=levels`.
pub fn i_mu_random(
    config: &PointConfiguration,
    scenario: &ScenarioConfig,
    mu: &MeasureOnT,
    t: usize,
    levels: usize,
) -> f64 {
    let phi_z = PhiFamily::random(config, &scenario.family, scenario.r());
    let k0 = sup_all_pairs(&phi_z, 1.0);
    let labels: Vec<Scale> = std::iter::once(k0)
        .chain((1..=levels).map(|n| compute_jn(&phi_z, mu, t, n)))
        .collect();
    chain_sum(&labels, scenario.r())
}

/// Refined labels `j̃_n = max(j₀, min_{0⩽p⩽n}(j_p + n − p))` from raw labels
/// `raw[0] = j₀, raw[1], …`.
///
/// The floor at `j₀` keeps `j̃₀ ⩽ j̃₁ ⩽ j̃₀ + 1` even when `j₁^μ(t) < j₀`,
/// which happens once `μ({t})` is small and the radius-2 ball is a singleton.
pub fn refine_labels(raw: &[Scale]) -> Vec<Scale> {
    let Some(&j0) = raw.first() else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(raw.len());
    let mut running = Scale::PosInf;
    for (n, &j) in raw.iter().enumerate() {
        // min_{p⩽n}(j_p + n − p) = min(previous + 1, j_n)
        running = if n == 0 { j } else { running.shift(1).min(j) };
        out.push(running.max(j0));
    }
    out
}

/// Raw and refined labels of every point for one measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelProfile {
    pub j0: Scale,
    /// `raw[n][t] = j_n^μ(t)`, `raw[0][t] = j₀`.
    pub raw: Vec<Vec<Scale>>,
    /// `refined[n][t] = j̃_n^μ(t)`.
    pub refined: Vec<Vec<Scale>>,
    pub r: f64,
    pub source_measure: MeasureOnT,
}

impl LabelProfile {
    pub fn compute(phi: &impl ScaleDistance, mu: &MeasureOnT, levels: usize) -> LabelProfile {
        let j0 = compute_j0(phi);
        Self::compute_with_j0(phi, mu, levels, j0)
    }

    pub fn compute_with_j0(
        phi: &impl ScaleDistance,
        mu: &MeasureOnT,
        levels: usize,
        j0: Scale,
    ) -> LabelProfile {
        let n_points = phi.n_points();
        let mut raw = vec![vec![j0; n_points]];
        for n in 1..=levels {
            raw.push((0..n_points).map(|t| compute_jn(phi, mu, t, n)).collect());
        }
        let mut refined = vec![Vec::with_capacity(n_points); levels + 1];
        for t in 0..n_points {
            let column: Vec<Scale> = raw.iter().map(|level| level[t]).collect();
            for (n, j) in refine_labels(&column).into_iter().enumerate() {
                refined[n].push(j);
            }
        }
        LabelProfile {
            j0,
            raw,
            refined,
            r: phi.r(),
            source_measure: mu.clone(),
        }
    }

    pub fn levels(&self) -> usize {
        self.raw.len() - 1
    }

    pub fn n_points(&self) -> usize {
        self.raw[0].len()
    }

    pub fn raw_column(&self, t: usize) -> Vec<Scale> {
        self.raw.iter().map(|l| l[t]).collect()
    }

    pub fn refined_column(&self, t: usize) -> Vec<Scale> {
        self.refined.iter().map(|l| l[t]).collect()
    }

    /// `J_μ(t)` truncated to the computed levels.
    pub fn j_mu(&self, t: usize) -> f64 {
        chain_sum(&self.raw_column(t), self.r)
    }

    pub fn j_mu_all(&self) -> Vec<f64> {
        (0..self.n_points()).map(|t| self.j_mu(t)).collect()
    }

    pub fn refined_sum(&self, t: usize) -> f64 {
        chain_sum(&self.refined_column(t), self.r)
    }

    pub fn sup_j_mu(&self) -> f64 {
        self.j_mu_all().into_iter().fold(0.0, f64::max)
    }

    /// `∫ J_μ dμ` for the profile's own measure.
    pub fn integral(&self) -> f64 {
        self.source_measure.integrate(&self.j_mu_all())
    }
}

/// `J_μ(t)` over levels `0..=levels`.
pub fn j_mu(phi: &impl ScaleDistance, mu: &MeasureOnT, t: usize, levels: usize) -> f64 {
    let j0 = compute_j0(phi);
    let labels: Vec<Scale> = std::iter::once(j0)
        .chain((1..=levels).map(|n| compute_jn(phi, mu, t, n)))
        .collect();
    chain_sum(&labels, phi.r())
}

/// Outcome of mixing measures at one point.
#[derive(Debug, Clone, Serialize)]
pub struct MixRecord {
    pub mixture: MeasureOnT,
    /// `j_n(t)` from `r^(−j_n−1) < Σ α_i r^(−j_n^{μ_i}(t)) ⩽ r^(−j_n)`, `labels[0] = j₀`.
    pub labels: Vec<Scale>,
    /// `μ(B_{j_n(t)}(t, 2^n))` for `n ⩾ 1` (index 0 unused, set to 1).
    pub ball_masses: Vec<f64>,
    /// Ball-mass bound `⩾ (2/3)/N_n` at every level with a finite label.
    pub ball_bound_holds: bool,
    pub mixed_sum: f64,
    pub averaged_j: f64,
    /// `mixed_sum / averaged_j` (0 when both vanish).
    pub constant: f64,
}

/// Label of a positive sum `S`: the integer `j` with `r^(−j−1) < S ⩽ r^(−j)`.
pub fn label_of_sum(sum: f64, r: f64) -> Scale {
    if sum <= 0.0 {
        return Scale::PosInf;
    }
    if !sum.is_finite() {
        return Scale::NegInf;
    }
    let mut j = (-(sum.ln()) / r.ln()).floor() as i32;
    while r.powi(-j) < sum {
        j -= 1;
    }
    while r.powi(-j - 1) >= sum {
        j += 1;
    }
    Scale::Finite(j)
}

pub fn mix_measures(
    phi: &impl ScaleDistance,
    alphas: &[f64],
    mus: &[MeasureOnT],
    t: usize,
    levels: usize,
) -> Result<MixRecord, MeasureError> {
    let mixture = MeasureOnT::mixture(alphas, mus)?;
    let r = phi.r();
    let j0 = compute_j0(phi);
    let profiles: Vec<Vec<Scale>> = mus
        .iter()
        .map(|mu| {
            std::iter::once(j0)
                .chain((1..=levels).map(|n| compute_jn(phi, mu, t, n)))
                .collect()
        })
        .collect();
    let mut labels = vec![j0];
    let mut ball_masses = vec![1.0];
    let mut holds = true;
    for n in 1..=levels {
        let sum: f64 = alphas
            .iter()
            .zip(&profiles)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, p)| a * p[n].weight(r))
            .sum();
        let j = label_of_sum(sum, r);
        let radius = 2f64.powi(n as i32);
        let mass = mixture.mass_of((0..phi.n_points()).filter(|&s| phi.phi(j, s, t) <= radius));
        if j.is_finite() && !mass_at_least(mass, (2.0 / 3.0) * inverse_size(n)) {
            holds = false;
        }
        labels.push(j);
        ball_masses.push(mass);
    }
    let mixed_sum = chain_sum(&labels, r);
    let averaged_j: f64 = alphas
        .iter()
        .zip(&profiles)
        .map(|(a, p)| a * chain_sum(p, r))
        .sum();
    let constant = if mixed_sum == 0.0 {
        0.0
    } else {
        mixed_sum / averaged_j
    };
    Ok(MixRecord {
        mixture,
        labels,
        ball_masses,
        ball_bound_holds: holds,
        mixed_sum,
        averaged_j,
        constant,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Mu0Result {
    pub measure: MeasureOnT,
    /// `sup_t J_{μ₀}(t)`.
    pub sup_j: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Every iterate visited, in order (used as β″ candidates).
    #[serde(skip)]
    pub iterates: Vec<MeasureOnT>,
}

const STABLE_ROUNDS: usize = 5;

/// Best-response search for a measure with small `sup_t J_μ(t)`.
///
/// Starting from the uniform measure, each round finds the worst point
/// `t* = argmax_t J_μ(t)` (smallest index on ties) and moves to
/// `(1−α)μ + α·floor(δ_{t*})` with `α = 2/(k+2)`. Every iterate keeps the
/// floor `μ({t}) ⩾ 1/(2|T|)`. Stops once `sup_t J` has moved by at most
/// `tolerance` (relative) for five consecutive rounds; returns the best
/// iterate seen.
pub fn find_mu0(phi: &impl ScaleDistance, tolerance: f64, max_iters: usize, levels: usize) -> Mu0Result {
    let n = phi.n_points();
    let j0 = compute_j0(phi);
    let mut mu = MeasureOnT::uniform(n);
    let mut profile = LabelProfile::compute_with_j0(phi, &mu, levels, j0);
    let mut current = profile.sup_j_mu();
    let mut best = (mu.clone(), current);
    let mut iterates = vec![mu.clone()];
    let mut stable = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let js = profile.j_mu_all();
        let worst = js
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (t, &v)| if v > acc.1 { (t, v) } else { acc })
            .0;
        let alpha = 2.0 / (iterations as f64 + 2.0);
        let target = MeasureOnT::point_mass(n, worst).floored();
        mu = MeasureOnT::mixture(&[1.0 - alpha, alpha], &[mu, target]).expect("valid mixture");
        profile = LabelProfile::compute_with_j0(phi, &mu, levels, j0);
        let next = profile.sup_j_mu();
        iterates.push(mu.clone());
        if next < best.1 {
            best = (mu.clone(), next);
        }
        if (next - current).abs() <= tolerance * current.abs().max(f64::MIN_POSITIVE) {
            stable += 1;
        } else {
            stable = 0;
        }
        current = next;
        if stable >= STABLE_ROUNDS {
            converged = true;
            break;
        }
    }
    Mu0Result {
        measure: best.0,
        sup_j: best.1,
        iterations,
        converged,
        iterates,
    }
}

/// Bounds on the measure functionals of the deterministic family.
#[derive(Debug, Clone, Serialize)]
pub struct BetaBounds {
    /// Upper bound on `β′ = inf_μ sup_t J_μ(t)`.
    pub beta_prime: f64,
    pub beta_prime_witness: MeasureOnT,
    /// Lower bound on `β″ = sup_μ ∫ J_μ dμ`.
    pub beta_double_prime: f64,
    pub beta_double_prime_witness: MeasureOnT,
    pub candidates_evaluated: usize,
    /// The candidate family was cut short by the budget.
    pub budget_exhausted: bool,
    pub mu0_converged: bool,
}

const EXHAUSTIVE_SUBSETS_UP_TO: usize = 10;

/// Searches measures for `β′` (upper bound) and `β″` (lower bound).
///
/// Candidates: the `find_mu0` iterates, the uniform measure, point masses,
/// uniform measures on subsets (all subsets of size ⩾ 2 when `|T| ⩽ 10`,
/// otherwise contiguous windows of a farthest-first ordering), then a
/// weight-transfer hill climb from the best `β″` candidate. At most `budget`
/// candidate measures are profiled.
pub fn beta_bounds(phi: &impl ScaleDistance, budget: usize, levels: usize) -> BetaBounds {
    let n = phi.n_points();
    let j0 = compute_j0(phi);
    let mu0 = find_mu0(phi, 1e-9, 200, levels);

    let mut planned: Vec<MeasureOnT> = Vec::new();
    planned.push(MeasureOnT::uniform(n));
    planned.extend(mu0.iterates.iter().cloned());
    planned.extend((0..n).map(|t| MeasureOnT::point_mass(n, t)));
    if n <= EXHAUSTIVE_SUBSETS_UP_TO {
        for mask in 1u32..(1 << n) {
            if mask.count_ones() >= 2 && mask.count_ones() < n as u32 {
                let support: Vec<usize> = (0..n).filter(|&t| mask & (1 << t) != 0).collect();
                planned.push(MeasureOnT::uniform_on(n, &support));
            }
        }
    } else {
        for size in 2..n {
            for start in 0..n {
                let support: Vec<usize> = (0..size).map(|i| (start + i) % n).collect();
                planned.push(MeasureOnT::uniform_on(n, &support));
            }
        }
    }

    let mut evaluated = 0;
    let mut exhausted = false;
    let mut best_upper = (mu0.measure.clone(), mu0.sup_j);
    let mut best_lower = (mu0.measure.clone(), f64::NEG_INFINITY);
    let mut seen = BTreeSet::new();
    let mut consider = |mu: &MeasureOnT,
                        evaluated: &mut usize,
                        best_upper: &mut (MeasureOnT, f64),
                        best_lower: &mut (MeasureOnT, f64)|
     -> Option<f64> {
        let key: Vec<u64> = mu.weights().iter().map(|w| w.to_bits()).collect();
        if !seen.insert(key) {
            return None;
        }
        *evaluated += 1;
        let profile = LabelProfile::compute_with_j0(phi, mu, levels, j0);
        let sup = profile.sup_j_mu();
        let integral = profile.integral();
        if sup < best_upper.1 {
            *best_upper = (mu.clone(), sup);
        }
        if integral > best_lower.1 {
            *best_lower = (mu.clone(), integral);
        }
        Some(integral)
    };

    for mu in &planned {
        if evaluated >= budget {
            exhausted = true;
            break;
        }
        consider(mu, &mut evaluated, &mut best_upper, &mut best_lower);
    }

    // hill climb on ∫ J_μ dμ by moving a quarter of one point's mass to another
    if !exhausted && n >= 2 {
        let mut improved = true;
        while improved && !exhausted {
            improved = false;
            let base = best_lower.clone();
            'moves: for from in 0..n {
                if base.0.weight(from) <= 0.0 {
                    continue;
                }
                for to in 0..n {
                    if to == from {
                        continue;
                    }
                    if evaluated >= budget {
                        exhausted = true;
                        break 'moves;
                    }
                    let mut w = base.0.weights().to_vec();
                    let moved = 0.25 * w[from];
                    w[from] -= moved;
                    w[to] += moved;
                    let total: f64 = w.iter().sum();
                    w.iter_mut().for_each(|x| *x /= total);
                    let mu = MeasureOnT { weights: w };
                    if let Some(v) = consider(&mu, &mut evaluated, &mut best_upper, &mut best_lower) {
                        if v > base.1 * (1.0 + 1e-12) {
                            improved = true;
                        }
                    }
                }
            }
        }
    }

    let lower = if best_lower.1.is_finite() { best_lower.1 } else { 0.0 };
    BetaBounds {
        beta_prime: best_upper.1,
        beta_prime_witness: best_upper.0,
        beta_double_prime: lower,
        beta_double_prime_witness: best_lower.0,
        candidates_evaluated: evaluated,
        budget_exhausted: exhausted,
        mu0_converged: mu0.converged,
    }
}
