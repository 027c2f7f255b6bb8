//! Distances on the index set: `d₂`, `d∞` and the scale family
//! `φ_j(s,t) = ∫ (r^{2j}|s−t|² ∧ 1) dν`, deterministic or over a realized
//! point configuration.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::Serialize;

use crate::poisson_mc::PointConfiguration;
use crate::scale::{Scale, ScaleWindow};
use crate::scenario::{FunctionFamily, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    D2,
    Dinf,
    Custom,
}

/// Symmetric matrix of pairwise distances over `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    kind: DistanceKind,
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, kind: DistanceKind, f: impl Fn(usize, usize) -> f64) -> DistanceMatrix {
        let mut values = vec![0.0; n * n];
        for s in 0..n {
            for t in s + 1..n {
                let d = f(s, t);
                values[s * n + t] = d;
                values[t * n + s] = d;
            }
        }
        DistanceMatrix { kind, n, values }
    }

    /// `d₂` or `d∞` between arbitrary rows under atom weights `masses`.
    pub fn from_rows(rows: &[Vec<f64>], masses: &[f64], kind: DistanceKind) -> DistanceMatrix {
        DistanceMatrix::from_fn(rows.len(), kind, |s, t| {
            let pairs = rows[s].iter().zip(&rows[t]).zip(masses);
            match kind {
                DistanceKind::Dinf => pairs.fold(0.0, |m, ((a, b), _)| m.max((a - b).abs())),
                _ => pairs.map(|((a, b), w)| w * (a - b) * (a - b)).sum::<f64>().sqrt(),
            }
        })
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.values[s * self.n + t]
    }

    /// Restriction to the listed points, in the listed order.
    pub fn restrict(&self, points: &[usize]) -> DistanceMatrix {
        DistanceMatrix::from_fn(points.len(), self.kind, |a, b| self.get(points[a], points[b]))
    }

    pub fn diameter(&self, cell: &[usize]) -> f64 {
        let mut d: f64 = 0.0;
        for (i, &s) in cell.iter().enumerate() {
            for &t in &cell[i + 1..] {
                d = d.max(self.get(s, t));
            }
        }
        d
    }

    /// Zero diagonal, symmetry, nonnegativity and the triangle inequality
    /// (up to a relative tolerance).
    pub fn is_pseudometric(&self, rel_tol: f64) -> bool {
        let n = self.n;
        for s in 0..n {
            if self.get(s, s) != 0.0 {
                return false;
            }
            for t in 0..n {
                let d = self.get(s, t);
                if d < 0.0 || d != self.get(t, s) {
                    return false;
                }
                for x in 0..n {
                    let bound = self.get(s, x) + self.get(x, t);
                    if d > bound * (1.0 + rel_tol) + rel_tol {
                        return false;
                    }
                }
            }
        }
        true
    }
}

pub fn compute_d2(scenario: &ScenarioConfig) -> DistanceMatrix {
    let masses: Vec<f64> = scenario.measure.masses().collect();
    DistanceMatrix::from_rows(scenario.family.rows(), &masses, DistanceKind::D2)
}

/// `d∞` is the largest coordinate difference: every atom carries positive
/// mass, so the essential supremum is a plain maximum.
pub fn compute_dinf(scenario: &ScenarioConfig) -> DistanceMatrix {
    let masses: Vec<f64> = scenario.measure.masses().collect();
    DistanceMatrix::from_rows(scenario.family.rows(), &masses, DistanceKind::Dinf)
}

/// Anything that behaves like a scale family `j ↦ φ_j(s,t)`: nonnegative,
/// symmetric, zero on the diagonal, nondecreasing in `j` and constant for
/// `j ⩾ window().saturated`.
pub trait ScaleDistance: Sync {
    fn n_points(&self) -> usize;
    fn r(&self) -> f64;
    fn window(&self) -> Option<ScaleWindow>;
    fn phi(&self, j: Scale, s: usize, t: usize) -> f64;
}

/// `Σ_k w_k (r^{2j} δ_k² ∧ 1)` over weighted atoms, with memoized lookups.
#[derive(Debug)]
pub struct PhiFamily {
    r: f64,
    n: usize,
    weights: Vec<f64>,
    // squared differences per unordered pair, row-major over s < t
    sq_diffs: Vec<Vec<f64>>,
    window: Option<ScaleWindow>,
    memo: Option<RwLock<HashMap<(Scale, u32, u32), f64>>>,
}

impl PhiFamily {
    /// Family over arbitrary weighted rows. Rows are indexed by point, columns by atom.
    pub fn from_parts(r: f64, weights: Vec<f64>, rows: &[Vec<f64>], memoize: bool) -> PhiFamily {
        let n = rows.len();
        let mut sq_diffs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let mut min_nz = f64::INFINITY;
        let mut max = 0.0f64;
        for s in 0..n {
            for t in s + 1..n {
                let d: Vec<f64> = rows[s]
                    .iter()
                    .zip(&rows[t])
                    .map(|(a, b)| {
                        let diff = (a - b).abs();
                        if diff > 0.0 {
                            min_nz = min_nz.min(diff);
                            max = max.max(diff);
                        }
                        diff * diff
                    })
                    .collect();
                sq_diffs.push(d);
            }
        }
        let window = ScaleWindow::from_diff_range(r, min_nz, max);
        PhiFamily {
            r,
            n,
            weights,
            sq_diffs,
            window,
            memo: memoize.then(|| RwLock::new(HashMap::new())),
        }
    }

    /// Deterministic family `φ_j` of a scenario.
    pub fn new(scenario: &ScenarioConfig) -> PhiFamily {
        PhiFamily::from_parts(
            scenario.r(),
            scenario.measure.masses().collect(),
            scenario.family.rows(),
            true,
        )
    }

    /// Random family `φ̃_{j,Z}`: the same sum over realized points with multiplicity.
    pub fn random(config: &PointConfiguration, family: &FunctionFamily, r: f64) -> PhiFamily {
        let occupied = config.occupied();
        let weights = occupied.iter().map(|&(_, c)| c as f64).collect();
        let rows: Vec<Vec<f64>> = family
            .rows()
            .iter()
            .map(|row| occupied.iter().map(|&(k, _)| row[k]).collect())
            .collect();
        PhiFamily::from_parts(r, weights, &rows, false)
    }

    fn pair_index(&self, s: usize, t: usize) -> usize {
        // s < t
        s * (2 * self.n - s - 1) / 2 + (t - s - 1)
    }

    fn compute(&self, j: Scale, s: usize, t: usize) -> f64 {
        let d = &self.sq_diffs[self.pair_index(s, t)];
        match j {
            Scale::NegInf => 0.0,
            Scale::PosInf => d
                .iter()
                .zip(&self.weights)
                .filter(|(&x, _)| x > 0.0)
                .map(|(_, w)| w)
                .sum(),
            Scale::Finite(j) => {
                let f = self.r.powi(2 * j);
                d.iter()
                    .zip(&self.weights)
                    .filter(|(&x, _)| x > 0.0)
                    .map(|(&x, &w)| w * (f * x).min(1.0))
                    .sum()
            }
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl ScaleDistance for PhiFamily {
    fn n_points(&self) -> usize {
        self.n
    }

    fn r(&self) -> f64 {
        self.r
    }

    fn window(&self) -> Option<ScaleWindow> {
        self.window
    }

    fn phi(&self, j: Scale, s: usize, t: usize) -> f64 {
        if s == t {
            return 0.0;
        }
        let (s, t) = if s < t { (s, t) } else { (t, s) };
        let Some(memo) = &self.memo else {
            return self.compute(j, s, t);
        };
        let key = (j, s as u32, t as u32);
        if let Some(&v) = memo.read().expect("memo lock").get(&key) {
            return v;
        }
        let v = self.compute(j, s, t);
        memo.write().expect("memo lock").insert(key, v);
        v
    }
}

/// `φ_j(s,t)` for a scenario, computed directly.
pub fn phi(scenario: &ScenarioConfig, j: i32, s: usize, t: usize) -> f64 {
    let r2j = scenario.r().powi(2 * j);
    let (a, b) = (scenario.family.row(s), scenario.family.row(t));
    scenario.measure.integrate(|k| {
        let d = (a[k] - b[k]).powi(2);
        if d > 0.0 {
            (r2j * d).min(1.0)
        } else {
            0.0
        }
    })
}

/// `φ̃_{j,Z}(s,t)` over the realized points of `config`.
pub fn phi_random(
    config: &PointConfiguration,
    family: &FunctionFamily,
    r: f64,
    j: i32,
    s: usize,
    t: usize,
) -> Result<f64, crate::error::McError> {
    if !family.is_empty() && family.n_atoms() != config.n_atoms() {
        return Err(crate::error::McError::DimensionMismatch {
            config: config.n_atoms(),
            family: family.n_atoms(),
        });
    }
    let r2j = r.powi(2 * j);
    let (a, b) = (family.row(s), family.row(t));
    Ok(config.sum_over_points(|k| {
        let d = (a[k] - b[k]).powi(2);
        if d > 0.0 {
            (r2j * d).min(1.0)
        } else {
            0.0
        }
    }))
}

/// Members of the ball `B_j(t, radius) = {s : φ_j(s,t) ⩽ radius}`.
pub fn ball(phi: &impl ScaleDistance, j: Scale, t: usize, radius: f64) -> Vec<usize> {
    (0..phi.n_points())
        .filter(|&s| phi.phi(j, s, t) <= radius)
        .collect()
}
