//! Solvent data model, CSV ingestion, and formulations over a library.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hsp::{self, HspVector, MaterialTarget};

/// Names that are always flagged prohibited unless the caller passes a different list.
/// Twenty common process solvents used by the demo configuration.
pub const DEMO_SUBSET: [&str; 20] = [
    "Acetone",
    "Ethanol",
    "2-Butanone (MEK)",
    "Methyl n-amyl ketone",
    "Anisole",
    "Ethyl acetate",
    "n-Butyl acetate",
    "Cyclohexanone",
    "Toluene",
    "Isopropanol (IPA)",
    "n-Butanol",
    "Tetrahydrofuran (THF)",
    "gamma-Butyrolactone",
    "Ethyl lactate",
    "Propylene glycol methyl ether",
    "Dimethyl sulfoxide (DMSO)",
    "PGMEA",
    "Diacetone alcohol",
    "Propylene carbonate",
    "n-Heptane",
];

pub const DEFAULT_PROHIBITED: &[&str] = &["Benzene", "Carbon Tetrachloride"];

/// Fixed leading columns of the library CSV. Any further columns are kept as
/// free-form qualitative fields.
pub const CSV_COLUMNS: [&str; 10] = [
    "name",
    "smiles",
    "delta_d",
    "delta_p",
    "delta_h",
    "molar_volume",
    "boiling_point",
    "flash_point",
    "roles",
    "safety_class",
];

const SHIPPED_CSV: &str = include_str!("../data/solvents.csv");

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },
    #[error("row {row}: duplicate solvent name {name:?}")]
    DuplicateName { row: u64, name: String },
    #[error("row {row}: invalid HSP for {name:?}: {detail}")]
    InvalidHsp { row: u64, name: String, detail: String },
    #[error("unknown solvent {0:?}")]
    UnknownSolvent(String),
    #[error("invalid formulation: {0}")]
    InvalidFormulation(String),
    #[error("reading library: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    FastPenetrant,
    HeavyModifier,
    Anchor,
    Aromatic,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::FastPenetrant, Role::HeavyModifier, Role::Anchor, Role::Aromatic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::FastPenetrant => "fast_penetrant",
            Role::HeavyModifier => "heavy_modifier",
            Role::Anchor => "anchor",
            Role::Aromatic => "aromatic",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s.trim())
            .ok_or_else(|| format!("unknown role tag {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyClass {
    Allowed,
    Warn,
    Prohibited,
}

impl std::str::FromStr for SafetyClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "" | "allowed" => Ok(SafetyClass::Allowed),
            "warn" => Ok(SafetyClass::Warn),
            "prohibited" => Ok(SafetyClass::Prohibited),
            other => Err(format!("unknown safety class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solvent {
    pub name: String,
    pub smiles: Option<String>,
    pub hsp: HspVector,
    /// cm³/mol
    pub molar_volume: Option<f64>,
    /// °C
    pub boiling_point: Option<f64>,
    /// °C
    pub flash_point: Option<f64>,
    pub role_tags: BTreeSet<Role>,
    pub safety_class: SafetyClass,
    pub qualitative_fields: BTreeMap<String, String>,
}

impl Solvent {
    /// Minimal solvent with only a name and HSP; handy for toy libraries.
    pub fn new(name: impl Into<String>, hsp: HspVector) -> Self {
        Self {
            name: name.into(),
            smiles: None,
            hsp,
            molar_volume: None,
            boiling_point: None,
            flash_point: None,
            role_tags: BTreeSet::new(),
            safety_class: SafetyClass::Allowed,
            qualitative_fields: BTreeMap::new(),
        }
    }

    pub fn with_boiling_point(mut self, bp: f64) -> Self {
        self.boiling_point = Some(bp);
        self
    }

    pub fn with_molar_volume(mut self, vm: f64) -> Self {
        self.molar_volume = Some(vm);
        self
    }

    pub fn with_roles(mut self, roles: impl IntoIterator<Item = Role>) -> Self {
        self.role_tags.extend(roles);
        self
    }

    pub fn with_safety(mut self, class: SafetyClass) -> Self {
        self.safety_class = class;
        self
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.role_tags.contains(&role)
    }

    pub fn is_prohibited(&self) -> bool {
        self.safety_class == SafetyClass::Prohibited
    }
}

/// Role tags derived from structure and boiling point.
///
/// * `aromatic`: the SMILES contains an aromatic (lower-case) atom
/// * `fast_penetrant`: boiling point below 100 °C
/// * `heavy_modifier`: boiling point at or above 180 °C
/// * `anchor`: the pure solvent sits inside `anchor_target`'s Hansen sphere (RED < 1)
pub fn suggest_roles(
    smiles: Option<&str>,
    boiling_point: Option<f64>,
    hsp: &HspVector,
    anchor_target: &MaterialTarget,
) -> BTreeSet<Role> {
    let mut roles = BTreeSet::new();
    if let Some(bp) = boiling_point {
        if bp < 100.0 {
            roles.insert(Role::FastPenetrant);
        }
        if bp >= 180.0 {
            roles.insert(Role::HeavyModifier);
        }
    }
    if hsp::red(hsp, anchor_target) < 1.0 {
        roles.insert(Role::Anchor);
    }
    if let Some(s) = smiles {
        let stripped = s.replace("Cl", "").replace("Br", "");
        if stripped.chars().any(|c| matches!(c, 'c' | 'n' | 'o' | 's')) {
            roles.insert(Role::Aromatic);
        }
    }
    roles
}

/// An ordered, name-indexed solvent collection. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolventLibrary {
    solvents: Vec<Solvent>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl SolventLibrary {
    /// Builds a library, applying the prohibited list: listed names become
    /// `prohibited`, and a `prohibited` class on an unlisted name is demoted to `warn`.
    pub fn new(solvents: Vec<Solvent>, prohibited: &[&str]) -> Result<Self, LibraryError> {
        let mut index = HashMap::with_capacity(solvents.len());
        let mut out = Vec::with_capacity(solvents.len());
        for (i, mut s) in solvents.into_iter().enumerate() {
            let row = i as u64 + 1;
            if s.name.trim().is_empty() {
                return Err(LibraryError::Parse { row, message: "empty solvent name".into() });
            }
            s.hsp
                .validate()
                .map_err(|e| LibraryError::InvalidHsp { row, name: s.name.clone(), detail: e.to_string() })?;
            validate_optional_fields(row, &s)?;
            apply_prohibited(&mut s, prohibited);
            if index.insert(s.name.clone(), out.len()).is_some() {
                return Err(LibraryError::DuplicateName { row, name: s.name });
            }
            out.push(s);
        }
        Ok(Self { solvents: out, index })
    }

    /// The bundled solvent table (66 rows, including the two default prohibited solvents).
    pub fn shipped() -> Self {
        Self::from_csv_reader(SHIPPED_CSV.as_bytes(), DEFAULT_PROHIBITED).expect("bundled library is valid")
    }

    pub fn shipped_csv() -> &'static str {
        SHIPPED_CSV
    }

    pub fn load(path: impl AsRef<Path>, prohibited: &[&str]) -> Result<Self, LibraryError> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, prohibited)
    }

    pub fn from_csv_reader<R: Read>(reader: R, prohibited: &[&str]) -> Result<Self, LibraryError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| LibraryError::Parse { row: 1, message: e.to_string() })?
            .clone();
        for (i, want) in CSV_COLUMNS.iter().enumerate() {
            match headers.get(i) {
                Some(h) if h == *want => {}
                got => {
                    return Err(LibraryError::Parse {
                        row: 1,
                        message: format!("header column {} must be {want:?}, found {:?}", i + 1, got.unwrap_or("")),
                    })
                }
            }
        }
        let extra: Vec<String> = headers.iter().skip(CSV_COLUMNS.len()).map(str::to_string).collect();

        let mut solvents = Vec::new();
        let mut seen: HashMap<String, u64> = HashMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| LibraryError::Parse {
                row: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let row = record.position().map(|p| p.line()).unwrap_or(0);
            let s = parse_row(row, &record, &extra)?;
            if seen.insert(s.name.clone(), row).is_some() {
                return Err(LibraryError::DuplicateName { row, name: s.name });
            }
            s.hsp
                .validate()
                .map_err(|e| LibraryError::InvalidHsp { row, name: s.name.clone(), detail: e.to_string() })?;
            validate_optional_fields(row, &s)?;
            solvents.push(s);
        }
        Self::new(solvents, prohibited)
    }

    pub fn len(&self) -> usize {
        self.solvents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solvents.is_empty()
    }

    pub fn solvents(&self) -> &[Solvent] {
        &self.solvents
    }

    pub fn iter(&self) -> impl Iterator<Item = &Solvent> {
        self.solvents.iter()
    }

    pub fn get(&self, name: &str) -> Option<&Solvent> {
        self.index.get(name).map(|&i| &self.solvents[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<&Solvent, LibraryError> {
        self.get(name).ok_or_else(|| LibraryError::UnknownSolvent(name.to_string()))
    }

    /// Exact lookup, falling back to a unique case-insensitive match.
    pub fn resolve_name(&self, name: &str) -> Option<&Solvent> {
        let name = name.trim();
        self.get(name).or_else(|| {
            let lower = name.to_lowercase();
            let mut hits = self.solvents.iter().filter(|s| s.name.to_lowercase() == lower);
            match (hits.next(), hits.next()) {
                (Some(s), None) => Some(s),
                _ => None,
            }
        })
    }

    /// A library restricted to `names`, kept in the given order.
    pub fn subset<S: AsRef<str>>(&self, names: &[S]) -> Result<Self, LibraryError> {
        let mut solvents = Vec::with_capacity(names.len());
        for n in names {
            solvents.push(self.require(n.as_ref())?.clone());
        }
        let prohibited: Vec<&str> =
            solvents.iter().filter(|s| s.is_prohibited()).map(|s| s.name.as_str()).collect();
        Self::new(solvents.clone(), &prohibited)
    }

    pub fn hsp_of(&self, names: &[String]) -> Result<Vec<HspVector>, LibraryError> {
        names.iter().map(|n| self.require(n).map(|s| s.hsp)).collect()
    }
}

fn apply_prohibited(s: &mut Solvent, prohibited: &[&str]) {
    let listed = prohibited.iter().any(|p| p.trim().eq_ignore_ascii_case(s.name.trim()));
    if listed {
        s.safety_class = SafetyClass::Prohibited;
    } else if s.safety_class == SafetyClass::Prohibited {
        s.safety_class = SafetyClass::Warn;
    }
}

fn validate_optional_fields(row: u64, s: &Solvent) -> Result<(), LibraryError> {
    let bad = |message: String| LibraryError::Parse { row, message };
    if let Some(vm) = s.molar_volume {
        if !vm.is_finite() || vm <= 0.0 {
            return Err(bad(format!("molar_volume must be > 0, got {vm}")));
        }
    }
    if let Some(bp) = s.boiling_point {
        if !bp.is_finite() || bp <= -100.0 {
            return Err(bad(format!("boiling_point must be > -100 °C, got {bp}")));
        }
    }
    if let Some(fp) = s.flash_point {
        if !fp.is_finite() {
            return Err(bad(format!("flash_point must be finite, got {fp}")));
        }
    }
    Ok(())
}

fn parse_row(row: u64, record: &csv::StringRecord, extra: &[String]) -> Result<Solvent, LibraryError> {
    let cell = |i: usize| record.get(i).unwrap_or("").trim();
    let err = |message: String| LibraryError::Parse { row, message };
    let required = |i: usize| -> Result<f64, LibraryError> {
        let raw = cell(i);
        if raw.is_empty() {
            return Err(err(format!("missing {}", CSV_COLUMNS[i])));
        }
        raw.parse::<f64>().map_err(|_| err(format!("{} is not a number: {raw:?}", CSV_COLUMNS[i])))
    };
    let optional = |i: usize| -> Result<Option<f64>, LibraryError> {
        let raw = cell(i);
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse::<f64>()
            .map(Some)
            .map_err(|_| err(format!("{} is not a number: {raw:?}", CSV_COLUMNS[i])))
    };

    let name = cell(0).to_string();
    if name.is_empty() {
        return Err(err("empty solvent name".into()));
    }
    let hsp = HspVector::new_unchecked(required(2)?, required(3)?, required(4)?);
    let mut role_tags = BTreeSet::new();
    for tag in cell(8).split('|').filter(|t| !t.trim().is_empty()) {
        role_tags.insert(tag.parse::<Role>().map_err(err)?);
    }
    let safety_class = cell(9).parse::<SafetyClass>().map_err(err)?;
    let smiles = Some(cell(1).to_string()).filter(|s| !s.is_empty());
    let mut qualitative_fields = BTreeMap::new();
    for (j, key) in extra.iter().enumerate() {
        let v = cell(CSV_COLUMNS.len() + j);
        if !v.is_empty() {
            qualitative_fields.insert(key.clone(), v.to_string());
        }
    }
    Ok(Solvent {
        name,
        smiles,
        hsp,
        molar_volume: optional(5)?,
        boiling_point: optional(6)?,
        flash_point: optional(7)?,
        role_tags,
        safety_class,
        qualitative_fields,
    })
}

/// A candidate recipe: component names with aligned volume fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formulation {
    pub components: Vec<String>,
    pub fractions: Vec<f64>,
}

/// Tolerance on `Σ φ = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;
pub const MIN_COMPONENTS: usize = 2;
pub const MAX_COMPONENTS: usize = 5;

impl Formulation {
    /// Checks the simplex invariant (positive fractions summing to one) and
    /// distinct names. The component-count bound is checked separately by
    /// [`Formulation::check_sparsity`] since intermediate states may be singletons.
    pub fn new(components: Vec<String>, fractions: Vec<f64>) -> Result<Self, LibraryError> {
        let f = Self { components, fractions };
        f.validate_simplex()?;
        Ok(f)
    }

    pub fn validate_simplex(&self) -> Result<(), LibraryError> {
        let bad = |m: String| Err(LibraryError::InvalidFormulation(m));
        if self.components.is_empty() {
            return bad("no components".into());
        }
        if self.components.len() != self.fractions.len() {
            return bad(format!("{} components but {} fractions", self.components.len(), self.fractions.len()));
        }
        if let Some(phi) = self.fractions.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return bad(format!("fraction {phi} is not strictly positive"));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return bad(format!("fractions sum to {sum}, not 1"));
        }
        let distinct: BTreeSet<&String> = self.components.iter().collect();
        if distinct.len() != self.components.len() {
            return bad("duplicate component".into());
        }
        Ok(())
    }

    pub fn check_sparsity(&self) -> bool {
        (MIN_COMPONENTS..=MAX_COMPONENTS).contains(&self.components.len())
    }

    pub fn validate_against(&self, library: &SolventLibrary) -> Result<(), LibraryError> {
        self.validate_simplex()?;
        for c in &self.components {
            library.require(c)?;
        }
        Ok(())
    }

    /// Unordered component set, the identity of a topology.
    pub fn topology(&self) -> BTreeSet<String> {
        self.components.iter().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.components.iter().map(String::as_str).zip(self.fractions.iter().copied())
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (name, phi)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{name} {:.1}%", phi * 100.0)?;
        }
        Ok(())
    }
}

/// Mixture HSP of a formulation resolved against `library`.
pub fn mix_hsp(formulation: &Formulation, library: &SolventLibrary) -> Result<HspVector, LibraryError> {
    let hsps = library.hsp_of(&formulation.components)?;
    Ok(hsp::mix_vectors(&hsps, &formulation.fractions))
}
