//! Poisson point process sampling over an atomic measure, the series
//! representation `X_t = Σ_i ε_i t(Z_i)`, and Monte Carlo estimators built on it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::McError;
use crate::scenario::{FunctionFamily, MeasureSpace, ScenarioConfig};
use crate::stats::{stream_rng, McEstimate};

/// One realization of the point process with its Rademacher signs.
///
/// Only occupied atoms are stored. `signs` lists the sign of every point,
/// grouped by atom in increasing atom order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    n_atoms: usize,
    occupied: Vec<(usize, u32)>,
    signs: Vec<i8>,
    net: Vec<i32>,
}

impl PointConfiguration {
    /// Builds a configuration from `(atom, count)` pairs and one sign per point.
    pub fn new(n_atoms: usize, mut occupied: Vec<(usize, u32)>, signs: Vec<i8>) -> PointConfiguration {
        occupied.retain(|&(_, c)| c > 0);
        occupied.sort_unstable_by_key(|&(k, _)| k);
        assert!(
            occupied.windows(2).all(|w| w[0].0 < w[1].0),
            "atoms listed twice"
        );
        assert!(occupied.iter().all(|&(k, _)| k < n_atoms), "atom out of range");
        let total: usize = occupied.iter().map(|&(_, c)| c as usize).sum();
        assert_eq!(total, signs.len(), "one sign per point");
        assert!(signs.iter().all(|&s| s == 1 || s == -1), "signs are ±1");
        let mut net = Vec::with_capacity(occupied.len());
        let mut pos = 0;
        for &(_, c) in &occupied {
            let c = c as usize;
            net.push(signs[pos..pos + c].iter().map(|&s| s as i32).sum());
            pos += c;
        }
        PointConfiguration {
            n_atoms,
            occupied,
            signs,
            net,
        }
    }

    pub fn empty(n_atoms: usize) -> PointConfiguration {
        PointConfiguration::new(n_atoms, Vec::new(), Vec::new())
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_points(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `(atom, multiplicity)` for every occupied atom.
    pub fn occupied(&self) -> &[(usize, u32)] {
        &self.occupied
    }

    pub fn count(&self, atom: usize) -> u32 {
        self.occupied
            .binary_search_by_key(&atom, |&(k, _)| k)
            .map_or(0, |i| self.occupied[i].1)
    }

    pub fn counts_dense(&self) -> Vec<u32> {
        let mut out = vec![0; self.n_atoms];
        for &(k, c) in &self.occupied {
            out[k] = c;
        }
        out
    }

    /// `Σ_i f(Z_i)` over the realized points.
    pub fn sum_over_points(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.occupied.iter().map(|&(k, c)| c as f64 * f(k)).sum()
    }

    /// Occupied atoms with their net sign sums `Σ_{i: Z_i = ω_k} ε_i`.
    pub fn net_signs(&self) -> impl Iterator<Item = (usize, i32)> + '_ {
        self.occupied.iter().zip(&self.net).map(|(&(k, _), &n)| (k, n))
    }

    fn check(&self, family: &FunctionFamily) -> Result<(), McError> {
        if !family.is_empty() && family.n_atoms() != self.n_atoms {
            return Err(McError::DimensionMismatch {
                config: self.n_atoms,
                family: family.n_atoms(),
            });
        }
        Ok(())
    }
}

const PER_ATOM_LIMIT: usize = 256;

/// Exact sampler for the point process of an atomic intensity.
///
/// Small measure spaces draw an independent Poisson count per atom. Large
/// ones draw the total count `Poisson(ν(Ω))` and place each point i.i.d.
/// according to `ν/ν(Ω)`, which has the same law and costs `O(N log K)`.
#[derive(Debug, Clone)]
pub struct PppSampler {
    n_atoms: usize,
    mode: SamplerMode,
}

#[derive(Debug, Clone)]
enum SamplerMode {
    PerAtom(Vec<Poisson<f64>>),
    Grouped {
        total: Option<Poisson<f64>>,
        cumulative: Vec<f64>,
    },
}

impl PppSampler {
    pub fn new(measure: &MeasureSpace) -> PppSampler {
        Self::with_mode(measure, measure.len() <= PER_ATOM_LIMIT)
    }

    /// Forces the per-atom (`true`) or grouped (`false`) strategy.
    pub fn with_mode(measure: &MeasureSpace, per_atom: bool) -> PppSampler {
        let mode = if per_atom {
            SamplerMode::PerAtom(
                measure
                    .masses()
                    .map(|m| Poisson::new(m).expect("masses are positive and finite"))
                    .collect(),
            )
        } else {
            let mut acc = 0.0;
            let cumulative = measure
                .masses()
                .map(|m| {
                    acc += m;
                    acc
                })
                .collect();
            SamplerMode::Grouped {
                total: (measure.total_mass() > 0.0)
                    .then(|| Poisson::new(measure.total_mass()).expect("finite total mass")),
                cumulative,
            }
        };
        PppSampler {
            n_atoms: measure.len(),
            mode,
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> PointConfiguration {
        let occupied = match &self.mode {
            SamplerMode::PerAtom(dists) => dists
                .iter()
                .enumerate()
                .filter_map(|(k, d)| {
                    let c = d.sample(rng) as u32;
                    (c > 0).then_some((k, c))
                })
                .collect(),
            SamplerMode::Grouped { total, cumulative } => {
                let n = total.as_ref().map_or(0, |d| d.sample(rng) as usize);
                let top = *cumulative.last().unwrap_or(&0.0);
                let mut atoms: Vec<usize> = (0..n)
                    .map(|_| {
                        let u = rng.random::<f64>() * top;
                        cumulative
                            .partition_point(|&c| c <= u)
                            .min(cumulative.len() - 1)
                    })
                    .collect();
                atoms.sort_unstable();
                let mut occupied: Vec<(usize, u32)> = Vec::new();
                for k in atoms {
                    match occupied.last_mut() {
                        Some((last, c)) if *last == k => *c += 1,
                        _ => occupied.push((k, 1)),
                    }
                }
                occupied
            }
        };
        let n_points: u32 = occupied.iter().map(|&(_, c)| c).sum();
        let signs = (0..n_points)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        PointConfiguration::new(self.n_atoms, occupied, signs)
    }
}

pub fn sample_ppp(scenario: &ScenarioConfig, rng: &mut ChaCha8Rng) -> PointConfiguration {
    PppSampler::new(&scenario.measure).sample(rng)
}

/// `X_t = Σ_i ε_i t(Z_i)` for every `t` in the family.
pub fn eval_process(config: &PointConfiguration, family: &FunctionFamily) -> Result<Vec<f64>, McError> {
    config.check(family)?;
    Ok(family
        .rows()
        .iter()
        .map(|row| config.net_signs().map(|(k, n)| n as f64 * row[k]).sum())
        .collect())
}

/// `|X|_t = Σ_i |t(Z_i)|` for every `t` in the family.
pub fn eval_abs_process(
    config: &PointConfiguration,
    family: &FunctionFamily,
) -> Result<Vec<f64>, McError> {
    config.check(family)?;
    Ok(family
        .rows()
        .iter()
        .map(|row| config.sum_over_points(|k| row[k].abs()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EsupMode {
    /// `E sup_t X_t`
    Signed,
    /// `E sup_t |X|_t`
    AbsoluteProcess,
    /// `E sup_t |X_t|`
    AbsOfSup,
}

/// Runs `f` on independent point configurations, one stream per replication.
///
/// Replications run in parallel; results come back in replication order so
/// every downstream reduction is deterministic.
pub fn replicate<T, F>(scenario: &ScenarioConfig, salt: u64, replications: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&PointConfiguration, &mut ChaCha8Rng) -> T + Sync,
{
    let sampler = PppSampler::new(&scenario.measure);
    (0..replications as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(scenario.rng_seed, salt, i);
            let config = sampler.sample(&mut rng);
            f(&config, &mut rng)
        })
        .collect()
}

pub fn sup_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Per-replication value of the supremum selected by `mode`.
pub fn sup_statistic(config: &PointConfiguration, family: &FunctionFamily, mode: EsupMode) -> f64 {
    match mode {
        EsupMode::Signed => sup_of(&eval_process(config, family).expect("same space")),
        EsupMode::AbsoluteProcess => sup_of(&eval_abs_process(config, family).expect("same space")),
        EsupMode::AbsOfSup => eval_process(config, family)
            .expect("same space")
            .iter()
            .fold(0.0, |m, x| m.max(x.abs())),
    }
}

pub fn estimate_esup(scenario: &ScenarioConfig, mode: EsupMode) -> Result<McEstimate, McError> {
    if scenario.replications < 2 {
        return Err(McError::TooFewReplications(scenario.replications));
    }
    let samples = replicate(scenario, 0, scenario.replications, |c, _| {
        sup_statistic(c, &scenario.family, mode)
    });
    Ok(McEstimate::from_samples(&samples))
}

/// Monte Carlo `P(|X_s − X_t| ⩾ v)` for each threshold in `vs`, from one run.
pub fn empirical_tails(
    scenario: &ScenarioConfig,
    s: usize,
    t: usize,
    vs: &[f64],
) -> Result<Vec<f64>, McError> {
    let n = scenario.n_points();
    for index in [s, t] {
        if index >= n {
            return Err(McError::IndexOutOfRange { index, len: n });
        }
    }
    let (rs, rt) = (scenario.family.row(s), scenario.family.row(t));
    let diffs = replicate(scenario, 0, scenario.replications, |c, _| {
        c.net_signs()
            .map(|(k, net)| net as f64 * (rs[k] - rt[k]))
            .sum::<f64>()
            .abs()
    });
    let reps = diffs.len() as f64;
    Ok(vs
        .iter()
        .map(|&v| diffs.iter().filter(|&&d| d >= v).count() as f64 / reps)
        .collect())
}

pub fn empirical_tail(scenario: &ScenarioConfig, s: usize, t: usize, v: f64) -> Result<f64, McError> {
    Ok(empirical_tails(scenario, s, t, &[v])?[0])
}

/// Smallest `L` with `p(v) ≤ 2 exp(−min(v²/d₂², v/d∞)/L)` at every tested `v`.
///
/// Returns 0 when no tested threshold has positive frequency.
pub fn fit_tail_constant(vs: &[f64], probs: &[f64], d2: f64, dinf: f64) -> f64 {
    vs.iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&v, &p)| {
            let exponent = (v * v / (d2 * d2)).min(v / dinf);
            exponent / (2.0 / p).ln()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{random_scenario, Atom, MeasureSpace};

    fn single_atom_scenario(mass: f64) -> ScenarioConfig {
        let measure = MeasureSpace::new(vec![Atom {
            id: "a".into(),
            mass,
        }])
        .unwrap();
        let family = FunctionFamily::new(
            vec!["0".into(), "t".into()],
            vec![vec![0.0], vec![1.0]],
            0,
            1,
        )
        .unwrap();
        ScenarioConfig::new(measure, family, 4, 5, 1000).unwrap()
    }

    #[test]
    fn poisson_moments_per_atom() {
        let scenario = single_atom_scenario(3.0);
        let counts = replicate(&scenario, 0, 100_000, |c, _| c.count(0) as f64);
        let est = McEstimate::from_samples(&counts);
        assert!((est.mean - 3.0).abs() <= 3.0 * est.std_error, "{est:?}");
        let var: f64 = counts.iter().map(|x| (x - est.mean).powi(2)).sum::<f64>() / 99_999.0;
        // Var of the sample variance for Poisson(λ) is ≈ (λ + 2λ²)/n.
        let se_var = ((3.0 + 2.0 * 9.0) / 100_000.0f64).sqrt();
        assert!((var - 3.0).abs() <= 3.0 * se_var, "var {var}");
    }

    #[test]
    fn empty_measure_space_gives_empty_configuration() {
        let measure = MeasureSpace::new(vec![]).unwrap();
        let sampler = PppSampler::new(&measure);
        let c = sampler.sample(&mut stream_rng(1, 0, 0));
        assert_eq!(c.n_points(), 0);
        assert!(c.signs().is_empty());
        let grouped = PppSampler::with_mode(&measure, false);
        assert_eq!(grouped.sample(&mut stream_rng(1, 0, 0)).n_points(), 0);
    }

    #[test]
    fn grouped_sampler_has_poisson_marginals() {
        let measure = MeasureSpace::new(
            (0..4)
                .map(|k| Atom {
                    id: format!("a{k}"),
                    mass: 0.5 * (k + 1) as f64,
                })
                .collect(),
        )
        .unwrap();
        let sampler = PppSampler::with_mode(&measure, false);
        let n = 60_000;
        let mut sums = [0.0f64; 4];
        for i in 0..n {
            let c = sampler.sample(&mut stream_rng(9, 0, i));
            for (k, s) in sums.iter_mut().enumerate() {
                *s += c.count(k) as f64;
            }
        }
        for (k, s) in sums.iter().enumerate() {
            let mass = 0.5 * (k + 1) as f64;
            let se = (mass / n as f64).sqrt();
            assert!((s / n as f64 - mass).abs() <= 4.0 * se, "atom {k}");
        }
    }

    #[test]
    fn process_on_hand_built_configurations() {
        let scenario = random_scenario(2, 3, 4, 1.0).unwrap();
        let fam = &scenario.family;
        let empty = PointConfiguration::empty(3);
        assert!(eval_process(&empty, fam).unwrap().iter().all(|&x| x == 0.0));
        assert!(eval_abs_process(&empty, fam).unwrap().iter().all(|&x| x == 0.0));

        let one = PointConfiguration::new(3, vec![(1, 1)], vec![1]);
        let x = eval_process(&one, fam).unwrap();
        let ax = eval_abs_process(&one, fam).unwrap();
        for i in 0..fam.len() {
            assert_eq!(x[i], fam.value(i, 1));
            assert_eq!(ax[i], fam.value(i, 1).abs());
        }
        assert_eq!(x[fam.zero_index()], 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let scenario = random_scenario(2, 3, 4, 1.0).unwrap();
        let wrong = PointConfiguration::empty(5);
        assert_eq!(
            eval_process(&wrong, &scenario.family),
            Err(McError::DimensionMismatch { config: 5, family: 3 })
        );
        assert!(eval_abs_process(&wrong, &scenario.family).is_err());
    }

    #[test]
    fn net_signs_cancel() {
        let c = PointConfiguration::new(2, vec![(0, 3)], vec![1, -1, 1]);
        assert_eq!(c.net_signs().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(c.counts_dense(), vec![3, 0]);
    }

    #[test]
    fn sup_over_zero_is_zero() {
        let measure = MeasureSpace::new(vec![Atom {
            id: "a".into(),
            mass: 2.0,
        }])
        .unwrap();
        let family = FunctionFamily::new(vec!["0".into()], vec![vec![0.0]], 0, 1).unwrap();
        let scenario = ScenarioConfig::new(measure, family, 4, 1, 50).unwrap();
        for mode in [EsupMode::Signed, EsupMode::AbsoluteProcess, EsupMode::AbsOfSup] {
            let est = estimate_esup(&scenario, mode).unwrap();
            assert_eq!(est.mean, 0.0);
            assert_eq!(est.std_error, 0.0);
        }
    }

    #[test]
    fn too_few_replications() {
        let scenario = single_atom_scenario(1.0).with_replications(1);
        assert_eq!(
            estimate_esup(&scenario, EsupMode::Signed),
            Err(McError::TooFewReplications(1))
        );
    }

    #[test]
    fn symmetric_family_sup_is_absolute_value() {
        let base = random_scenario(21, 4, 2, 1.0).unwrap().with_replications(3000);
        let t = base.family.row(1).to_vec();
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        let sym = base.with_rows(vec![vec![0.0; 4], t, neg]).unwrap();
        let with_neg = estimate_esup(&sym, EsupMode::Signed).unwrap();
        let abs = estimate_esup(&base, EsupMode::AbsOfSup).unwrap();
        let plain = estimate_esup(&base, EsupMode::Signed).unwrap();
        // same streams, so these agree pathwise
        assert!((with_neg.mean - abs.mean).abs() < 1e-12);
        assert!(with_neg.mean >= plain.mean);
    }

    #[test]
    fn tails_at_extremes() {
        let scenario = random_scenario(5, 6, 3, 1.0).unwrap().with_replications(2000);
        assert_eq!(empirical_tail(&scenario, 1, 2, 0.0).unwrap(), 1.0);
        assert_eq!(empirical_tail(&scenario, 1, 2, 1e9).unwrap(), 0.0);
        assert!(empirical_tail(&scenario, 1, 9, 1.0).is_err());
    }

    #[test]
    fn fitted_constant_recovers_exponent() {
        // p = 2 exp(-m/L) with L = 3
        let vs = [1.0, 2.0];
        let (d2, dinf) = (1.0, 1.0);
        let probs: Vec<f64> = vs.iter().map(|&v: &f64| 2.0 * (-(v.min(v * v)) / 3.0).exp()).collect();
        let l = fit_tail_constant(&vs, &probs, d2, dinf);
        assert!((l - 3.0).abs() < 1e-12);
        assert_eq!(fit_tail_constant(&vs, &[0.0, 0.0], d2, dinf), 0.0);
    }
}
