//! Labelled admissible partition sequences built from a majorizing measure.
//!
//! A [`PartitionTree`] holds nested partitions `𝒜_0, …, 𝒜_{n_max}` of the
//! index set with an integer scale `j_n(A)` per cell, subject to
//!
//! * `|𝒜_0| = 1`, `|𝒜_n| ⩽ N_n`;
//! * `A ⊂ C ∈ 𝒜_{n−1}` implies `j_{n−1}(C) ⩽ j_n(A) ⩽ j_{n−1}(C) + 1`;
//! * `s, t ∈ A ∈ 𝒜_n` implies `φ_{j_n(A)}(s,t) ⩽ 2^(n+2)`.

mod gamma;

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::PartitionError;
use crate::majorizing::{admissible_size, chain_sum, LabelProfile, MeasureOnT, DEFAULT_LEVELS};
use crate::metric::ScaleDistance;
use crate::scale::Scale;

pub use gamma::{gamma_exact, gamma_greedy, sequence_value, set_partitions, GammaValue, EXACT_CAP};

/// Deepest level built when cells never become singletons.
pub const MAX_DEFAULT_LEVEL: usize = 6;

const PAR2_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    /// Sorted member indices.
    pub members: Vec<usize>,
    pub label: Scale,
    /// Index of the containing cell one level up.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionTree {
    pub r: f64,
    pub n_points: usize,
    pub levels: Vec<Vec<Cell>>,
}

impl PartitionTree {
    pub fn n_max(&self) -> usize {
        self.levels.len() - 1
    }

    /// Index of the cell of level `n` containing `t`.
    pub fn cell_of(&self, n: usize, t: usize) -> usize {
        self.levels[n]
            .iter()
            .position(|c| c.members.binary_search(&t).is_ok())
            .expect("levels cover every point")
    }

    /// `(j_n(A_n(t)))_{n ⩽ n_max}`.
    pub fn labels_of(&self, t: usize) -> Vec<Scale> {
        (0..self.levels.len())
            .map(|n| self.levels[n][self.cell_of(n, t)].label)
            .collect()
    }

    /// `Σ_n 2^n r^(−j_n(A_n(t)))` over the stored levels.
    pub fn chain_sum(&self, t: usize) -> f64 {
        chain_sum(&self.labels_of(t), self.r)
    }

    /// Checks admissibility, nesting, the label step condition and the
    /// diameter condition exhaustively.
    pub fn validate(&self, phi: &impl ScaleDistance) -> Result<(), PartitionError> {
        let invalid = |msg: String| Err(PartitionError::InvalidTree(msg));
        if self.levels.is_empty() {
            return invalid("no levels".into());
        }
        if self.levels[0].len() != 1 {
            return invalid(format!("level 0 has {} cells", self.levels[0].len()));
        }
        if phi.n_points() != self.n_points {
            return invalid("tree and distance disagree on the index set".into());
        }
        for (n, level) in self.levels.iter().enumerate() {
            if level.len() as u64 > admissible_size(n) {
                return invalid(format!("level {n} has {} cells, limit {}", level.len(), admissible_size(n)));
            }
            let mut seen = vec![false; self.n_points];
            for cell in level {
                if cell.members.is_empty() {
                    return invalid(format!("empty cell at level {n}"));
                }
                for &t in &cell.members {
                    if t >= self.n_points || std::mem::replace(&mut seen[t], true) {
                        return invalid(format!("point {t} misplaced at level {n}"));
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                return invalid(format!("level {n} does not cover the index set"));
            }
            let radius = 2f64.powi(n as i32 + 2) * (1.0 + PAR2_RTOL);
            for cell in level {
                for (a, &s) in cell.members.iter().enumerate() {
                    for &t in &cell.members[a + 1..] {
                        let v = phi.phi(cell.label, s, t);
                        if v > radius {
                            return invalid(format!(
                                "level {n}: φ_{}({s},{t}) = {v} exceeds 2^{}",
                                cell.label,
                                n + 2
                            ));
                        }
                    }
                }
                if n == 0 {
                    continue;
                }
                let Some(p) = cell.parent else {
                    return invalid(format!("cell at level {n} has no parent"));
                };
                let Some(parent) = self.levels[n - 1].get(p) else {
                    return invalid(format!("dangling parent at level {n}"));
                };
                if cell.members.iter().any(|t| parent.members.binary_search(t).is_err()) {
                    return invalid(format!("level {n} is not nested in level {}", n - 1));
                }
                if !(parent.label <= cell.label && cell.label <= parent.label.shift(1)) {
                    return invalid(format!(
                        "level {n}: label {} does not follow parent label {}",
                        cell.label, parent.label
                    ));
                }
            }
        }
        Ok(())
    }

    /// One line per cell: `level <n> label <j> members <i> <i> …`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, level) in self.levels.iter().enumerate() {
            for cell in level {
                let members: Vec<String> = cell.members.iter().map(|m| m.to_string()).collect();
                writeln!(out, "level {n} label {} members {}", cell.label, members.join(" ")).unwrap();
            }
        }
        out
    }
}

/// `sup_t Σ_n 2^n r^(−j_n(A_n(t)))` for a valid tree.
pub fn beta_functional(phi: &impl ScaleDistance, tree: &PartitionTree) -> Result<f64, PartitionError> {
    tree.validate(phi)?;
    Ok((0..tree.n_points).map(|t| tree.chain_sum(t)).fold(0.0, f64::max))
}

/// One cell of a greedy cover with its designated center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverCell {
    pub center: usize,
    pub members: Vec<usize>,
}

/// Covers `subset` by balls `B_{label(x)}(x, 2^(n+2))` around a maximal
/// separated set of centers, then makes the balls disjoint by sequential
/// differences in the order the centers were picked.
///
/// `labels` is indexed by global point. Centers are picked smallest label
/// first, then farthest from the centers already chosen, then smallest
/// index; two centers `s, t` satisfy `φ_{min(label)}(s,t) > 2^(n+2)`.
pub fn greedy_cover(
    phi: &impl ScaleDistance,
    subset: &[usize],
    n: usize,
    labels: &[Scale],
) -> Result<Vec<CoverCell>, PartitionError> {
    let threshold = 2f64.powi(n as i32 + 2);
    let mut remaining: Vec<usize> = subset.to_vec();
    remaining.sort_unstable();
    remaining.dedup();
    let all = remaining.clone();
    let mut nearest = vec![f64::INFINITY; remaining.len()];
    let mut centers: Vec<usize> = Vec::new();
    while !remaining.is_empty() {
        let pick = (0..remaining.len())
            .min_by(|&a, &b| {
                labels[remaining[a]]
                    .cmp(&labels[remaining[b]])
                    .then(nearest[b].total_cmp(&nearest[a]))
                    .then(remaining[a].cmp(&remaining[b]))
            })
            .expect("nonempty");
        let c = remaining[pick];
        centers.push(c);
        let mut keep = Vec::with_capacity(remaining.len());
        let mut keep_near = Vec::with_capacity(remaining.len());
        for (i, &a) in remaining.iter().enumerate() {
            if a == c {
                continue;
            }
            let v = phi.phi(labels[a].min(labels[c]), a, c);
            if v > threshold {
                keep.push(a);
                keep_near.push(nearest[i].min(v));
            }
        }
        remaining = keep;
        nearest = keep_near;
    }
    let limit = admissible_size(n);
    if centers.len() as u64 > limit {
        return Err(PartitionError::CoverFailure {
            level: n,
            centers: centers.len(),
            limit,
        });
    }
    let mut assigned = vec![false; all.len()];
    let mut cells = Vec::with_capacity(centers.len());
    for &c in &centers {
        let members: Vec<usize> = all
            .iter()
            .enumerate()
            .filter(|&(i, &a)| !assigned[i] && phi.phi(labels[c], a, c) <= threshold)
            .map(|(_, &a)| a)
            .collect();
        for (i, a) in all.iter().enumerate() {
            if members.binary_search(a).is_ok() {
                assigned[i] = true;
            }
        }
        cells.push(CoverCell { center: c, members });
    }
    if let Some(i) = assigned.iter().position(|a| !a) {
        return Err(PartitionError::InvalidTree(format!(
            "point {} escaped the cover at level {n}",
            all[i]
        )));
    }
    Ok(cells)
}

/// A tree together with the labels it was built from.
#[derive(Debug, Clone, Serialize)]
pub struct BuiltTree {
    pub tree: PartitionTree,
    pub profile: LabelProfile,
    /// `max_t Σ_n 2^n r^(−j_n(A_n(t))) / Σ_n 2^n r^(−j̃_n(t))`, both sums over `n ⩽ n_max`.
    pub measured_constant: f64,
}

/// Builds the labelled partition tree from the refined labels of `mu`.
///
/// Levels 0, 1, 2 are `{T}` with label `j₀`. A cell `A ∈ 𝒜_n` (`n ⩾ 2`)
/// whose members share `j̃_{n−2} = j_n(A)` splits by `j̃_{n−1} ∈ {j, j+1}`;
/// each half is covered by [`greedy_cover`] at level `n − 1` and the
/// children inherit `j̃_{n−1}`. Without an explicit `n_max` the tree stops
/// one level after every cell is a singleton, or at level 6.
pub fn build_partition_tree(
    phi: &impl ScaleDistance,
    mu: &MeasureOnT,
    n_max: Option<usize>,
) -> Result<BuiltTree, PartitionError> {
    let n_points = phi.n_points();
    if n_points == 0 {
        return Err(PartitionError::Empty);
    }
    if mu.len() != n_points {
        return Err(PartitionError::InvalidTree(format!(
            "measure has {} weights for {n_points} points",
            mu.len()
        )));
    }
    let depth = n_max.unwrap_or(MAX_DEFAULT_LEVEL);
    let profile = LabelProfile::compute(phi, mu, depth.max(DEFAULT_LEVELS));
    let j0 = profile.j0;
    let root = Cell {
        members: (0..n_points).collect(),
        label: j0,
        parent: None,
    };
    let mut levels = vec![vec![root]];
    let mut target = n_max;
    if target.is_none() && n_points == 1 {
        target = Some(1);
    }
    while levels.len() <= target.unwrap_or(MAX_DEFAULT_LEVEL) {
        let n = levels.len() - 1;
        let next = if n < 2 {
            levels[n]
                .iter()
                .enumerate()
                .map(|(p, c)| Cell {
                    members: c.members.clone(),
                    label: c.label,
                    parent: Some(p),
                })
                .collect()
        } else {
            split_level(phi, &profile, &levels[n], n)?
        };
        levels.push(next);
        if target.is_none() && levels.last().unwrap().iter().all(|c| c.members.len() == 1) {
            target = Some((levels.len()).min(MAX_DEFAULT_LEVEL));
        }
    }
    let tree = PartitionTree {
        r: phi.r(),
        n_points,
        levels,
    };
    let n_top = tree.n_max();
    let measured_constant = (0..n_points)
        .map(|t| {
            let lhs = tree.chain_sum(t);
            let rhs = chain_sum(&profile.refined_column(t)[..=n_top], profile.r);
            if lhs == 0.0 {
                0.0
            } else {
                lhs / rhs
            }
        })
        .fold(0.0, f64::max);
    Ok(BuiltTree {
        tree,
        profile,
        measured_constant,
    })
}

fn split_level(
    phi: &impl ScaleDistance,
    profile: &LabelProfile,
    level: &[Cell],
    n: usize,
) -> Result<Vec<Cell>, PartitionError> {
    let labels = &profile.refined[n - 1];
    let mut next = Vec::new();
    for (p, cell) in level.iter().enumerate() {
        let j = cell.label;
        let (low, high): (Vec<usize>, Vec<usize>) =
            cell.members.iter().partition(|&&t| labels[t] == j);
        if high.iter().any(|&t| labels[t] != j.shift(1)) {
            return Err(PartitionError::InvalidTree(format!(
                "labels at level {} leave the range {{{j}, {j}+1}}",
                n - 1
            )));
        }
        for (half, label) in [(low, j), (high, j.shift(1))] {
            if half.is_empty() {
                continue;
            }
            for c in greedy_cover(phi, &half, n - 1, labels)? {
                next.push(Cell {
                    members: c.members,
                    label,
                    parent: Some(p),
                });
            }
        }
    }
    next.sort_by_key(|c| c.members[0]);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorizing::refine_labels;
    use crate::metric::PhiFamily;
    use crate::scenario::random_scenario;

    fn family(seed: u64, atoms: usize, points: usize) -> PhiFamily {
        PhiFamily::new(&random_scenario(seed, atoms, points, 1.0).unwrap())
    }

    #[test]
    fn singleton_tree() {
        let fam = family(1, 3, 2);
        // restrict to one point via a one-row family
        let one = PhiFamily::from_parts(4.0, vec![1.0, 2.0], &[vec![0.0, 0.0]], true);
        let built = build_partition_tree(&one, &MeasureOnT::uniform(1), None).unwrap();
        assert!(built.tree.levels.iter().all(|l| l.len() == 1));
        assert_eq!(beta_functional(&one, &built.tree).unwrap(), 0.0);
        let built = build_partition_tree(&fam, &MeasureOnT::uniform(2), None).unwrap();
        built.tree.validate(&fam).unwrap();
    }

    #[test]
    fn beta_of_constant_labels() {
        let fam = family(4, 5, 4);
        let j0 = crate::majorizing::compute_j0(&fam);
        let tree = PartitionTree {
            r: 4.0,
            n_points: 4,
            levels: (0..3)
                .map(|n| {
                    vec![Cell {
                        members: vec![0, 1, 2, 3],
                        label: j0,
                        parent: (n > 0).then_some(0),
                    }]
                })
                .collect(),
        };
        if let Ok(beta) = beta_functional(&fam, &tree) {
            assert!((beta - 7.0 * j0.weight(4.0)).abs() <= 1e-12 * beta.max(1.0));
        }
        assert!((tree.chain_sum(0) - 7.0 * j0.weight(4.0)).abs() <= 1e-12 * tree.chain_sum(0).max(1.0));
    }

    #[test]
    fn cover_of_one_point() {
        let fam = family(2, 4, 5);
        let labels = vec![Scale::Finite(0); 5];
        let cells = greedy_cover(&fam, &[3], 2, &labels).unwrap();
        assert_eq!(cells, vec![CoverCell { center: 3, members: vec![3] }]);
    }

    #[test]
    fn cover_of_tight_set_is_one_cell() {
        let fam = family(2, 4, 6);
        let labels = vec![Scale::NegInf; 6];
        let cells = greedy_cover(&fam, &[0, 1, 2, 3, 4, 5], 1, &labels).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].members, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn cover_cells_and_packing() {
        for seed in 0..30 {
            let fam = family(seed, 8, 12);
            let mu = MeasureOnT::uniform(12).floored();
            let profile = LabelProfile::compute(&fam, &mu, 4);
            for n in 1..=3 {
                let labels = &profile.refined[n];
                let all: Vec<usize> = (0..12).collect();
                let cells = match greedy_cover(&fam, &all, n, labels) {
                    Ok(c) => c,
                    Err(PartitionError::CoverFailure { .. }) => continue,
                    Err(e) => panic!("{e}"),
                };
                let bound = 2f64.powi(n as i32 + 4) * (1.0 + 1e-9);
                for c in &cells {
                    assert!(c.members.contains(&c.center));
                    for &s in &c.members {
                        for &t in &c.members {
                            assert!(fam.phi(labels[c.center], s, t) <= bound);
                        }
                    }
                }
                // balls B_{j̃(x)}(x, 2^n) around centers are disjoint
                let radius = 2f64.powi(n as i32);
                for (a, ca) in cells.iter().enumerate() {
                    for cb in &cells[a + 1..] {
                        let ba = crate::metric::ball(&fam, labels[ca.center], ca.center, radius);
                        let bb = crate::metric::ball(&fam, labels[cb.center], cb.center, radius);
                        assert!(ba.iter().all(|x| !bb.contains(x)), "seed {seed} n {n}");
                    }
                }
            }
        }
    }

    #[test]
    fn tree_labels_follow_refined_profile() {
        for seed in 0..20 {
            let fam = family(seed, 6, 9);
            let mu = MeasureOnT::uniform(9).floored();
            let built = build_partition_tree(&fam, &mu, None).unwrap();
            built.tree.validate(&fam).unwrap();
            for t in 0..9 {
                let labels = built.tree.labels_of(t);
                let refined = refine_labels(&built.profile.raw_column(t));
                for n in 0..labels.len() {
                    if n <= 2 {
                        assert_eq!(labels[n], built.profile.j0);
                    } else {
                        assert_eq!(labels[n], refined[n - 2], "seed {seed} t {t} n {n}");
                    }
                }
            }
            assert!(built.measured_constant <= 16.0);
        }
    }

    #[test]
    fn text_format() {
        let fam = family(7, 3, 4);
        let built = build_partition_tree(&fam, &MeasureOnT::uniform(4), Some(3)).unwrap();
        let text = built.tree.to_text();
        assert!(text.starts_with("level 0 label "));
        assert!(text.lines().next().unwrap().ends_with("members 0 1 2 3"));
        assert_eq!(text.lines().filter(|l| l.starts_with("level 3 ")).count(), built.tree.levels[3].len());
    }

    #[test]
    fn validator_rejects_broken_trees() {
        let fam = family(7, 3, 4);
        let built = build_partition_tree(&fam, &MeasureOnT::uniform(4), Some(3)).unwrap();
        let mut tree = built.tree.clone();
        tree.levels[1][0].members.pop();
        assert!(tree.validate(&fam).is_err());
        let mut tree = built.tree.clone();
        tree.levels[2][0].label = Scale::Finite(-1000);
        assert!(tree.validate(&fam).is_err());
    }
}
