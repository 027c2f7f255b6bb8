use serde::Serialize;

use crate::error::PartitionError;
use crate::majorizing::admissible_size;
use crate::metric::DistanceMatrix;

/// Largest index set accepted by [`gamma_exact`].
pub const EXACT_CAP: usize = 6;

/// `sup_t Σ_n 2^(n/α) Δ(A_n(t))` for the witness sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaValue {
    pub value: f64,
    pub alpha: u8,
    /// `witness[n]` is the partition `𝒜_n`, cells sorted by smallest member.
    pub witness: Vec<Vec<Vec<usize>>>,
}

/// Value of an admissible sequence; levels past the last one are taken as singletons.
pub fn sequence_value(d: &DistanceMatrix, alpha: u8, seq: &[Vec<Vec<usize>>]) -> f64 {
    let mut per_point = vec![0.0; d.len()];
    for (n, level) in seq.iter().enumerate() {
        let w = 2f64.powf(n as f64 / alpha as f64);
        for cell in level {
            let diam = d.diameter(cell);
            for &t in cell {
                per_point[t] += w * diam;
            }
        }
    }
    per_point.into_iter().fold(0.0, f64::max)
}

/// Upper bound on `γ_α(T, d)` from nested farthest-first splits.
///
/// Each cell of `𝒜_{n−1}` is split among `⌊N_n / |𝒜_{n−1}|⌋` centers: the
/// first is the cell's 1-center (smallest eccentricity), later ones the
/// farthest point from the chosen centers. Ties go to the smallest index and
/// points join their nearest center (earliest on ties). Construction stops
/// once every cell has zero diameter or after level `n_max`.
pub fn gamma_greedy(d: &DistanceMatrix, alpha: u8, n_max: Option<usize>) -> GammaValue {
    let n = d.len();
    if n == 0 {
        return GammaValue {
            value: 0.0,
            alpha,
            witness: Vec::new(),
        };
    }
    let mut witness = vec![vec![(0..n).collect::<Vec<usize>>()]];
    while witness.last().unwrap().iter().any(|c| d.diameter(c) > 0.0)
        && n_max.is_none_or(|m| witness.len() <= m)
    {
        let level = witness.len();
        let parent = witness.last().unwrap();
        let budget = (admissible_size(level) / parent.len() as u64).max(1);
        let mut next: Vec<Vec<usize>> = parent
            .iter()
            .flat_map(|cell| split_farthest_first(d, cell, budget))
            .collect();
        next.sort_by_key(|c| c[0]);
        witness.push(next);
    }
    GammaValue {
        value: sequence_value(d, alpha, &witness),
        alpha,
        witness,
    }
}

fn split_farthest_first(d: &DistanceMatrix, cell: &[usize], budget: u64) -> Vec<Vec<usize>> {
    if cell.len() == 1 || budget == 1 {
        return vec![cell.to_vec()];
    }
    let k = (budget.min(cell.len() as u64)) as usize;
    let eccentricity = |s: usize| cell.iter().map(|&t| d.get(s, t)).fold(0.0, f64::max);
    let first = cell
        .iter()
        .copied()
        .min_by(|&a, &b| eccentricity(a).total_cmp(&eccentricity(b)).then(a.cmp(&b)))
        .unwrap();
    let mut centers = vec![first];
    let mut nearest: Vec<f64> = cell.iter().map(|&t| d.get(first, t)).collect();
    while centers.len() < k {
        let (i, &far) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(cell[b.0].cmp(&cell[a.0])))
            .unwrap();
        if far <= 0.0 {
            break;
        }
        let c = cell[i];
        centers.push(c);
        for (j, &t) in cell.iter().enumerate() {
            nearest[j] = nearest[j].min(d.get(c, t));
        }
    }
    let mut parts = vec![Vec::new(); centers.len()];
    for &t in cell {
        let home = centers.iter().position(|&c| c == t).unwrap_or_else(|| {
            (0..centers.len())
                .min_by(|&a, &b| d.get(centers[a], t).total_cmp(&d.get(centers[b], t)).then(a.cmp(&b)))
                .unwrap()
        });
        parts[home].push(t);
    }
    parts
}

/// Exact `γ_α(T, d)` for `|T| ⩽ 6`.
///
/// Since `N_2 = 16 ⩾ |T|`, an optimal sequence is singletons from level 2
/// on, and refining a level never increases any term. The infimum is
/// therefore over partitions `𝒜_1` with at most four blocks.
pub fn gamma_exact(d: &DistanceMatrix, alpha: u8) -> Result<GammaValue, PartitionError> {
    let n = d.len();
    if n > EXACT_CAP {
        return Err(PartitionError::SizeCap {
            cap: EXACT_CAP,
            got: n,
        });
    }
    if n == 0 {
        return Ok(GammaValue {
            value: 0.0,
            alpha,
            witness: Vec::new(),
        });
    }
    let root = vec![(0..n).collect::<Vec<usize>>()];
    let singletons: Vec<Vec<usize>> = (0..n).map(|t| vec![t]).collect();
    let mut best: Option<GammaValue> = None;
    for blocks in set_partitions(n, admissible_size(1) as usize) {
        let seq = vec![root.clone(), blocks, singletons.clone()];
        let value = sequence_value(d, alpha, &seq);
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(GammaValue {
                value,
                alpha,
                witness: seq,
            });
        }
    }
    Ok(best.expect("at least one partition"))
}

/// All partitions of `0..n` into at most `max_blocks` blocks, via restricted growth strings.
pub fn set_partitions(n: usize, max_blocks: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, max_blocks: usize, rgs: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let blocks = rgs.iter().max().map_or(0, |m| m + 1);
            let mut parts = vec![Vec::new(); blocks];
            for (t, &b) in rgs.iter().enumerate() {
                parts[b].push(t);
            }
            out.push(parts);
            return;
        }
        let used = rgs.iter().max().map_or(0, |m| m + 1);
        for b in 0..=used.min(max_blocks - 1) {
            rgs.push(b);
            rec(i + 1, n, max_blocks, rgs, out);
            rgs.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 && max_blocks > 0 {
        rec(0, n, max_blocks, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::DistanceKind;

    fn line(points: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_fn(points.len(), DistanceKind::Custom, |s, t| (points[s] - points[t]).abs())
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=6).map(|n| set_partitions(n, n).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52, 203]);
        // Stirling numbers S(5,k), k ⩽ 4: 1 + 15 + 25 + 10
        assert_eq!(set_partitions(5, 4).len(), 51);
    }

    #[test]
    fn singleton_is_zero() {
        let d = line(&[3.0]);
        assert_eq!(gamma_exact(&d, 2).unwrap().value, 0.0);
        assert_eq!(gamma_greedy(&d, 2, None).value, 0.0);
    }

    #[test]
    fn two_points() {
        let d = line(&[0.0, 0.37]);
        for alpha in [1, 2] {
            assert!((gamma_exact(&d, alpha).unwrap().value - 0.37).abs() < 1e-12);
            assert!((gamma_greedy(&d, alpha, None).value - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn equilateral_triangle() {
        let d = DistanceMatrix::from_fn(3, DistanceKind::Custom, |_, _| 2.5);
        assert!((gamma_exact(&d, 2).unwrap().value - 2.5).abs() < 1e-12);
    }

    #[test]
    fn five_points_on_a_line() {
        // optimal 𝒜_1 pairs two neighbours: Δ = 4, level-1 term √2·1
        let d = line(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let exact = gamma_exact(&d, 2).unwrap().value;
        assert!((exact - (4.0 + 2f64.sqrt())).abs() < 1e-12);
        let greedy = gamma_greedy(&d, 2, None).value;
        assert!(greedy >= exact - 1e-12 && greedy <= 5.0 * exact);
    }

    #[test]
    fn size_cap() {
        let d = line(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(
            gamma_exact(&d, 1),
            Err(PartitionError::SizeCap { cap: 6, got: 7 })
        );
    }

    #[test]
    fn greedy_witness_is_admissible_and_nested() {
        let pts: Vec<f64> = (0..40).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let d = line(&pts);
        let g = gamma_greedy(&d, 1, None);
        for (n, level) in g.witness.iter().enumerate() {
            assert!(level.len() as u64 <= admissible_size(n));
            if n > 0 {
                for cell in level {
                    assert!(g.witness[n - 1].iter().any(|p| cell.iter().all(|t| p.contains(t))));
                }
            }
        }
        assert!(g.witness.last().unwrap().iter().all(|c| c.len() == 1));
    }

    #[test]
    fn greedy_stops_on_repeated_points() {
        let d = line(&[1.0; 9]);
        let g = gamma_greedy(&d, 2, None);
        assert_eq!((g.value, g.witness.len()), (0.0, 1));
        let d = line(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        assert!((gamma_greedy(&d, 1, None).value - 2.0).abs() < 1e-12);
    }
}
