//! Scenario data model: a finite atomic Lévy measure, a finite family of
//! functions on its atoms, and run parameters.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::stats::stream_rng;

pub const DEFAULT_R: u32 = 4;
pub const DEFAULT_REPLICATIONS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub id: String,
    pub mass: f64,
}

/// Finite atomic measure `ν = Σ_k mass_k δ_{ω_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpace {
    atoms: Vec<Atom>,
    total_mass: f64,
}

impl MeasureSpace {
    pub fn new(atoms: Vec<Atom>) -> Result<MeasureSpace, ScenarioError> {
        for atom in &atoms {
            if !(atom.mass > 0.0) || !atom.mass.is_finite() {
                return Err(ScenarioError::Validation(format!(
                    "atom {:?} has nonpositive or non-finite mass {}",
                    atom.id, atom.mass
                )));
            }
        }
        let total_mass = atoms.iter().map(|a| a.mass).sum();
        Ok(MeasureSpace { atoms, total_mass })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.atoms[k].mass
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.mass)
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `∫ f dν` for `f` given by its atom values.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.len()).map(|k| self.atoms[k].mass * f(k)).sum()
    }
}

/// The index set `T` as a value matrix `values[i][k] = t_i(ω_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFamily {
    ids: Vec<String>,
    values: Vec<Vec<f64>>,
    zero_index: usize,
}

impl FunctionFamily {
    pub fn new(
        ids: Vec<String>,
        values: Vec<Vec<f64>>,
        zero_index: usize,
        n_atoms: usize,
    ) -> Result<FunctionFamily, ScenarioError> {
        if ids.len() != values.len() {
            return Err(ScenarioError::Validation(
                "function ids and value rows differ in length".into(),
            ));
        }
        if zero_index >= values.len() {
            return Err(ScenarioError::Validation(
                "zero function is missing from the family".into(),
            ));
        }
        for (id, row) in ids.iter().zip(&values) {
            if row.len() != n_atoms {
                return Err(ScenarioError::Validation(format!(
                    "function {id:?} has {} values for {n_atoms} atoms",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(ScenarioError::Validation(format!(
                    "function {id:?} has non-finite value {v}"
                )));
            }
        }
        if values[zero_index].iter().any(|&v| v != 0.0) {
            return Err(ScenarioError::Validation(format!(
                "row {:?} designated as zero is not identically zero",
                ids[zero_index]
            )));
        }
        let mut seen_ids = HashSet::new();
        let mut seen_rows = HashSet::new();
        for (id, row) in ids.iter().zip(&values) {
            if !seen_ids.insert(id.as_str()) {
                return Err(ScenarioError::Validation(format!("duplicate function id {id:?}")));
            }
            // -0.0 and 0.0 denote the same function
            let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
            if !seen_rows.insert(key) {
                return Err(ScenarioError::Validation(format!(
                    "function {id:?} duplicates an earlier row"
                )));
            }
        }
        Ok(FunctionFamily {
            ids,
            values,
            zero_index,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i][k]
    }

    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    pub fn n_atoms(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub measure: MeasureSpace,
    pub family: FunctionFamily,
    pub r: u32,
    pub truncation_note: Option<String>,
    pub rng_seed: u64,
    pub replications: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct FunctionRecord {
    id: String,
    values: Vec<f64>,
}

/// On-disk scenario layout.
#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    atoms: Vec<Atom>,
    functions: Vec<FunctionRecord>,
    zero_id: String,
    r: u32,
    seed: u64,
    replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation_note: Option<String>,
}

impl ScenarioConfig {
    pub fn new(
        measure: MeasureSpace,
        family: FunctionFamily,
        r: u32,
        rng_seed: u64,
        replications: usize,
    ) -> Result<ScenarioConfig, ScenarioError> {
        if r < 4 {
            return Err(ScenarioError::Validation(format!("r must be at least 4, got {r}")));
        }
        if replications == 0 {
            return Err(ScenarioError::Validation("replications must be positive".into()));
        }
        if family.n_atoms() != measure.len() && !family.is_empty() {
            return Err(ScenarioError::Validation(
                "function rows are not aligned with the atoms".into(),
            ));
        }
        for i in 0..family.len() {
            let s: f64 = measure.integrate(|k| family.value(i, k).powi(2).min(1.0));
            if !s.is_finite() {
                return Err(ScenarioError::Validation(format!(
                    "integral of t^2 ∧ 1 diverges for {:?}",
                    family.ids()[i]
                )));
            }
        }
        Ok(ScenarioConfig {
            measure,
            family,
            r,
            truncation_note: None,
            rng_seed,
            replications,
        })
    }

    pub fn r(&self) -> f64 {
        self.r as f64
    }

    pub fn n_points(&self) -> usize {
        self.family.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.measure.len()
    }

    pub fn with_seed(mut self, seed: u64) -> ScenarioConfig {
        self.rng_seed = seed;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> ScenarioConfig {
        assert!(replications > 0, "replications must be positive");
        self.replications = replications;
        self
    }

    pub fn with_r(mut self, r: u32) -> Result<ScenarioConfig, ScenarioError> {
        if r < 4 {
            return Err(ScenarioError::Validation(format!("r must be at least 4, got {r}")));
        }
        self.r = r;
        Ok(self)
    }

    pub fn with_truncation_note(mut self, note: impl Into<String>) -> ScenarioConfig {
        self.truncation_note = Some(note.into());
        self
    }

    /// Same measure and parameters with a new index set (zero row first).
    pub fn with_rows(&self, rows: Vec<Vec<f64>>) -> Result<ScenarioConfig, ScenarioError> {
        let ids = (0..rows.len()).map(|i| format!("t{i}")).collect();
        let family = FunctionFamily::new(ids, rows, 0, self.n_atoms())?;
        let mut out = ScenarioConfig::new(
            self.measure.clone(),
            family,
            self.r,
            self.rng_seed,
            self.replications,
        )?;
        out.truncation_note = self.truncation_note.clone();
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        let measure = MeasureSpace::new(file.atoms)?;
        let zero_index = file
            .functions
            .iter()
            .position(|f| f.id == file.zero_id)
            .ok_or_else(|| {
                ScenarioError::Validation(format!("zero function {:?} not found", file.zero_id))
            })?;
        let (ids, values) = file
            .functions
            .into_iter()
            .map(|f| (f.id, f.values))
            .unzip();
        let family = FunctionFamily::new(ids, values, zero_index, measure.len())?;
        let mut cfg = ScenarioConfig::new(measure, family, file.r, file.seed, file.replications)?;
        cfg.truncation_note = file.truncation_note;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            atoms: self.measure.atoms().to_vec(),
            functions: self
                .family
                .ids()
                .iter()
                .zip(self.family.rows())
                .map(|(id, values)| FunctionRecord {
                    id: id.clone(),
                    values: values.clone(),
                })
                .collect(),
            zero_id: self.family.ids()[self.family.zero_index()].clone(),
            r: self.r,
            seed: self.rng_seed,
            replications: self.replications,
            truncation_note: self.truncation_note.clone(),
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioConfig::from_json(&text)
}

pub fn save_scenario(cfg: &ScenarioConfig, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    std::fs::write(path, cfg.to_json()).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Midpoint discretization of Lebesgue measure on `[x_min, x_max]` with the
/// family `{0, t, -t}`, `t(x) = x^-2`.
pub fn make_example_ex(
    x_min: f64,
    x_max: f64,
    n_atoms: usize,
) -> Result<ScenarioConfig, ScenarioError> {
    if !(x_min > 0.0) || !x_min.is_finite() {
        return Err(ScenarioError::Domain(format!("x_min must be positive, got {x_min}")));
    }
    if !(x_max > x_min) || !x_max.is_finite() {
        return Err(ScenarioError::Domain(format!(
            "need x_min < x_max, got [{x_min}, {x_max}]"
        )));
    }
    if n_atoms < 2 {
        return Err(ScenarioError::Domain("need at least two atoms".into()));
    }
    let width = (x_max - x_min) / n_atoms as f64;
    let mids: Vec<f64> = (0..n_atoms)
        .map(|k| x_min + (k as f64 + 0.5) * width)
        .collect();
    let atoms = mids
        .iter()
        .enumerate()
        .map(|(k, _)| Atom {
            id: format!("x{k}"),
            mass: width,
        })
        .collect();
    let t: Vec<f64> = mids.iter().map(|m| m.powi(-2)).collect();
    let neg: Vec<f64> = t.iter().map(|v| -v).collect();
    let measure = MeasureSpace::new(atoms)?;
    let family = FunctionFamily::new(
        vec!["0".into(), "t".into(), "-t".into()],
        vec![vec![0.0; n_atoms], t, neg],
        0,
        n_atoms,
    )?;
    let note = format!(
        "Lebesgue measure on [{x_min}, {x_max}] discretized into {n_atoms} cells of width {width}, atoms at cell midpoints"
    );
    Ok(ScenarioConfig::new(measure, family, DEFAULT_R, 0, DEFAULT_REPLICATIONS)?
        .with_truncation_note(note))
}

/// Atom midpoints of a scenario built by [`make_example_ex`].
pub fn example_ex_midpoints(x_min: f64, x_max: f64, n_atoms: usize) -> Vec<f64> {
    let width = (x_max - x_min) / n_atoms as f64;
    (0..n_atoms)
        .map(|k| x_min + (k as f64 + 0.5) * width)
        .collect()
}

/// Reproducible random scenario.
///
/// Masses are log-uniform on `[0.1, 10]`. Each nonzero function takes, per
/// atom, a centered normal value of scale `0.1·scale` with probability 0.7 or
/// `3·scale` otherwise, so both the `d₂`- and the `d∞`-dominated regimes show up.
pub fn random_scenario(
    seed: u64,
    n_atoms: usize,
    n_points: usize,
    scale: f64,
) -> Result<ScenarioConfig, ScenarioError> {
    if n_points < 2 {
        return Err(ScenarioError::Domain("need at least two points".into()));
    }
    if n_atoms == 0 {
        return Err(ScenarioError::Domain("need at least one atom".into()));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(ScenarioError::Domain(format!("scale must be positive, got {scale}")));
    }
    let mut rng = stream_rng(seed, 0x5CE7A210, 0);
    let (lo, hi) = (0.1f64.ln(), 10f64.ln());
    let atoms = (0..n_atoms)
        .map(|k| Atom {
            id: format!("w{k}"),
            mass: rng.random_range(lo..hi).exp(),
        })
        .collect();
    let narrow = Normal::new(0.0, 0.1 * scale).expect("valid normal");
    let wide = Normal::new(0.0, 3.0 * scale).expect("valid normal");
    let mut rows = vec![vec![0.0; n_atoms]];
    while rows.len() < n_points {
        let row: Vec<f64> = (0..n_atoms)
            .map(|_| {
                if rng.random_bool(0.7) {
                    narrow.sample(&mut rng)
                } else {
                    wide.sample(&mut rng)
                }
            })
            .collect();
        if !rows.contains(&row) {
            rows.push(row);
        }
    }
    let ids = (0..n_points).map(|i| format!("t{i}")).collect();
    let measure = MeasureSpace::new(atoms)?;
    let family = FunctionFamily::new(ids, rows, 0, n_atoms)?;
    ScenarioConfig::new(measure, family, DEFAULT_R, seed, DEFAULT_REPLICATIONS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atom_json(mass0: f64, with_zero: bool) -> String {
        let zero = if with_zero {
            r#"{"id": "zero", "values": [0, 0]},"#
        } else {
            ""
        };
        format!(
            r#"{{
  "atoms": [{{"id": "a", "mass": {mass0}}}, {{"id": "b", "mass": 2.5e0}}],
  "functions": [{zero} {{"id": "s", "values": [1.0, -2.0]}}, {{"id": "t", "values": [0.5, 3]}}],
  "zero_id": "zero",
  "r": 4,
  "seed": 11,
  "replications": 100
}}"#
        )
    }

    #[test]
    fn loads_valid_file() {
        let cfg = ScenarioConfig::from_json(&two_atom_json(1.5, true)).unwrap();
        assert_eq!(cfg.measure.total_mass(), 4.0);
        assert_eq!(cfg.n_points(), 3);
        assert_eq!(cfg.family.zero_index(), 0);
        assert_eq!(cfg.r, 4);
        assert_eq!(cfg.rng_seed, 11);
    }

    #[test]
    fn rejects_zero_mass() {
        let err = ScenarioConfig::from_json(&two_atom_json(0.0, true)).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(_)), "{err}");
    }

    #[test]
    fn rejects_missing_zero_row() {
        let err = ScenarioConfig::from_json(&two_atom_json(1.0, false)).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(_)), "{err}");
    }

    #[test]
    fn rejects_small_r_and_garbage() {
        let text = two_atom_json(1.0, true).replace("\"r\": 4", "\"r\": 3");
        assert!(matches!(
            ScenarioConfig::from_json(&text),
            Err(ScenarioError::Validation(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_json("{ not json"),
            Err(ScenarioError::Parse(_))
        ));
    }

    #[test]
    fn rejects_nonzero_zero_row_and_duplicates() {
        let text = two_atom_json(1.0, true).replace("[0, 0]", "[0, 1e-9]");
        assert!(ScenarioConfig::from_json(&text).is_err());
        let text = two_atom_json(1.0, true).replace("[0.5, 3]", "[1.0, -2.0]");
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn example_ex_rejects_bad_domains() {
        assert!(matches!(make_example_ex(0.0, 1.0, 10), Err(ScenarioError::Domain(_))));
        assert!(matches!(make_example_ex(2.0, 2.0, 10), Err(ScenarioError::Domain(_))));
        assert!(make_example_ex(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn example_ex_shape() {
        let cfg = make_example_ex(1.0, 3.0, 4).unwrap();
        assert_eq!(cfg.n_points(), 3);
        assert!((cfg.measure.total_mass() - 2.0).abs() < 1e-15);
        assert_eq!(cfg.family.value(1, 0), 1.25f64.powi(-2));
        assert_eq!(cfg.family.value(2, 3), -(2.75f64.powi(-2)));
        assert!(cfg.truncation_note.is_some());
    }

    #[test]
    fn random_scenario_is_deterministic() {
        let a = random_scenario(3, 5, 4, 1.0).unwrap();
        let b = random_scenario(3, 5, 4, 1.0).unwrap();
        assert_eq!(a, b);
        let c = random_scenario(4, 5, 4, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn minimal_random_family() {
        let cfg = random_scenario(9, 3, 2, 1.0).unwrap();
        assert_eq!(cfg.n_points(), 2);
        assert!(cfg.family.row(0).iter().all(|&v| v == 0.0));
        assert!(cfg.family.row(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn seed_seven_passes_validation() {
        let cfg = random_scenario(7, 3, 4, 1.0).unwrap();
        // rebuild through the validating constructors
        let family = FunctionFamily::new(
            cfg.family.ids().to_vec(),
            cfg.family.rows().to_vec(),
            cfg.family.zero_index(),
            3,
        );
        assert!(family.is_ok());
        assert!(MeasureSpace::new(cfg.measure.atoms().to_vec()).is_ok());
        assert_eq!(cfg.n_atoms(), 3);
        assert_eq!(cfg.n_points(), 4);
    }
}
