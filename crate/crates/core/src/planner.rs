//! Candidate memory and root-level plan synthesis.
//!
//! Records are appended to a [`MemoryStore`]; [`synthesize_plan`] partitions
//! them into score bands and usage statistics, and [`apply_strategy`] turns a
//! plan plus a strategy mode into directives the generators consume.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::library::{SafetyClass, SolventLibrary};

pub const MEMORY_SCHEMA: &str = "sds-memory";
pub const MEMORY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("memory I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid record: {0}")]
    Validation(String),
    #[error("memory file line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub run_id: String,
    pub iteration: usize,
    /// Component names, sorted.
    pub topology: Vec<String>,
    /// Discretized recipe as (name, fraction) in recipe order; empty when no
    /// recipe survived discretization.
    pub fractions: Vec<(String, f64)>,
    pub score_total: f64,
    pub pv_pass: bool,
    /// One `check:status` string per verdict.
    pub verdicts: Vec<String>,
}

impl CandidateRecord {
    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |m: &str| Err(StoreError::Validation(m.to_string()));
        if self.run_id.is_empty() {
            return bad("run_id is empty");
        }
        if self.topology.is_empty() {
            return bad("topology is empty");
        }
        if self.verdicts.is_empty() {
            return bad("verdicts are missing");
        }
        if !self.score_total.is_finite() {
            return bad("score_total is not finite");
        }
        if !self.fractions.is_empty() {
            let names: BTreeSet<&str> = self.fractions.iter().map(|(n, _)| n.as_str()).collect();
            let topo: BTreeSet<&str> = self.topology.iter().map(String::as_str).collect();
            // Simplification may prune components, never add them.
            if !names.is_subset(&topo) {
                return bad("fractions name a solvent outside the topology");
            }
        }
        Ok(())
    }
}

pub trait MemoryStore {
    fn store(&mut self, record: CandidateRecord) -> Result<(), StoreError>;
    fn records(&self) -> &[CandidateRecord];

    fn by_run(&self, run_id: &str) -> Vec<&CandidateRecord> {
        self.records().iter().filter(|r| r.run_id == run_id).collect()
    }

    /// Score descending, then run id, then iteration.
    fn by_score(&self) -> Vec<&CandidateRecord> {
        let mut v: Vec<&CandidateRecord> = self.records().iter().collect();
        v.sort_by(|a, b| record_order(a, b));
        v
    }
}

fn record_order(a: &CandidateRecord, b: &CandidateRecord) -> std::cmp::Ordering {
    b.score_total
        .total_cmp(&a.score_total)
        .then_with(|| a.run_id.cmp(&b.run_id))
        .then_with(|| a.iteration.cmp(&b.iteration))
}

#[derive(Debug, Clone, Default)]
pub struct InMemoryStore {
    records: Vec<CandidateRecord>,
}

impl InMemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl MemoryStore for InMemoryStore {
    fn store(&mut self, record: CandidateRecord) -> Result<(), StoreError> {
        record.validate()?;
        self.records.push(record);
        Ok(())
    }

    fn records(&self) -> &[CandidateRecord] {
        &self.records
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

/// Append-only JSON-lines file. Line 1 is a schema header; every further line
/// is one [`CandidateRecord`]. Existing files are loaded on open.
#[derive(Debug)]
pub struct JsonlMemoryStore {
    path: PathBuf,
    writer: BufWriter<File>,
    records: Vec<CandidateRecord>,
}

impl JsonlMemoryStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut records = Vec::new();
        let exists = path.exists() && std::fs::metadata(&path)?.len() > 0;
        if exists {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                let lineno = i + 1;
                if lineno == 1 {
                    let h: Header = serde_json::from_str(&line)
                        .map_err(|e| StoreError::Corrupt { line: 1, message: format!("bad header: {e}") })?;
                    if h.schema != MEMORY_SCHEMA || h.version != MEMORY_SCHEMA_VERSION {
                        return Err(StoreError::Corrupt {
                            line: 1,
                            message: format!("unsupported schema {} v{}", h.schema, h.version),
                        });
                    }
                    continue;
                }
                if line.trim().is_empty() {
                    continue;
                }
                let r: CandidateRecord = serde_json::from_str(&line)
                    .map_err(|e| StoreError::Corrupt { line: lineno, message: e.to_string() })?;
                records.push(r);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut writer = BufWriter::new(file);
        if !exists {
            let h = Header { schema: MEMORY_SCHEMA.into(), version: MEMORY_SCHEMA_VERSION };
            writeln!(writer, "{}", serde_json::to_string(&h).expect("header serializes"))?;
            writer.flush()?;
        }
        Ok(Self { path, writer, records })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl MemoryStore for JsonlMemoryStore {
    fn store(&mut self, record: CandidateRecord) -> Result<(), StoreError> {
        record.validate()?;
        let line = serde_json::to_string(&record).map_err(|e| StoreError::Validation(e.to_string()))?;
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        self.records.push(record);
        Ok(())
    }

    fn records(&self) -> &[CandidateRecord] {
        &self.records
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyMode {
    #[default]
    Balanced,
    Innovation,
    Green,
    Engineering,
}

impl StrategyMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyMode::Balanced => "balanced",
            StrategyMode::Innovation => "innovation",
            StrategyMode::Green => "green",
            StrategyMode::Engineering => "engineering",
        }
    }
}

impl std::str::FromStr for StrategyMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "balanced" => Ok(StrategyMode::Balanced),
            "innovation" => Ok(StrategyMode::Innovation),
            "green" => Ok(StrategyMode::Green),
            "engineering" => Ok(StrategyMode::Engineering),
            other => Err(format!("unknown strategy mode {other:?}")),
        }
    }
}

/// Score bands on the 0–100 total scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanThresholds {
    /// Champions: total ≥ this and PV pass.
    pub champion: f64,
    /// Yellow flags: total in [yellow, champion) and PV pass.
    pub yellow: f64,
    /// Kill list: total < this, or PV fail.
    pub kill: f64,
    /// Maximum entries per section.
    pub section_cap: usize,
}

impl Default for PlanThresholds {
    fn default() -> Self {
        Self { champion: 85.0, yellow: 75.0, kill: 60.0, section_cap: 10 }
    }
}

impl PlanThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.kill < self.yellow && self.yellow < self.champion) {
            return Err(format!(
                "need kill < yellow < champion, got {} / {} / {}",
                self.kill, self.yellow, self.champion
            ));
        }
        if self.section_cap == 0 {
            return Err("section_cap must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub topology: Vec<String>,
    pub fractions: Vec<(String, f64)>,
    pub score_total: f64,
    pub pv_pass: bool,
    pub run_id: String,
    pub iteration: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolventUsage {
    pub name: String,
    pub usage: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationVector {
    pub class: String,
    pub solvents: Vec<SolventUsage>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GlobalPlan {
    pub strategy_mode: StrategyMode,
    pub record_count: usize,
    pub champions: Vec<PlanEntry>,
    /// Components shared by every champion.
    pub champion_pattern: Vec<String>,
    pub kill_list: Vec<PlanEntry>,
    pub yellow_flags: Vec<PlanEntry>,
    pub exploration_vectors: Vec<ExplorationVector>,
    pub dominant_solvent: Option<String>,
    /// Component occurrences per library solvent (zeros included).
    pub usage: BTreeMap<String, usize>,
    pub prohibited: Vec<String>,
}

impl GlobalPlan {
    pub fn neutral(mode: StrategyMode) -> Self {
        Self { strategy_mode: mode, ..Self::default() }
    }

    pub fn is_neutral(&self) -> bool {
        self.record_count == 0
    }

    /// Plain-text rendering with the four plan sections.
    pub fn render(&self) -> String {
        let mut s = format!("Strategy mode: {}\n", self.strategy_mode.as_str());
        if let Some(d) = &self.dominant_solvent {
            s.push_str(&format!("Dominant solvent: {d}\n"));
        }
        let section = |s: &mut String, title: &str, entries: &[PlanEntry]| {
            s.push_str(&format!("{title}:\n"));
            if entries.is_empty() {
                s.push_str("  (none)\n");
            }
            for e in entries {
                s.push_str(&format!("  - {} | {:.1} | {}\n", e.topology.join(" + "), e.score_total, e.note));
            }
        };
        section(&mut s, "Proven champions", &self.champions);
        if !self.champion_pattern.is_empty() {
            s.push_str(&format!("  shared backbone: {}\n", self.champion_pattern.join(" + ")));
        }
        section(&mut s, "Kill list", &self.kill_list);
        section(&mut s, "Yellow flags", &self.yellow_flags);
        s.push_str("Exploration vectors:\n");
        if self.exploration_vectors.is_empty() {
            s.push_str("  (none)\n");
        }
        for v in &self.exploration_vectors {
            let names: Vec<String> = v.solvents.iter().map(|u| format!("{} ({})", u.name, u.usage)).collect();
            s.push_str(&format!("  - {}: {}\n", v.class, names.join(", ")));
        }
        if !self.prohibited.is_empty() {
            s.push_str(&format!("Prohibited: {}\n", self.prohibited.join(", ")));
        }
        s
    }
}

/// Keyword classifier for exploration grouping. Name keywords are tried
/// first, then a few SMILES fragments.
pub fn solvent_class(name: &str, smiles: Option<&str>) -> &'static str {
    const NAME_TABLE: &[(&str, &str)] = &[
        ("lactate", "lactate"),
        ("lactone", "lactone"),
        ("carbonate", "carbonate"),
        ("chlor", "halogenated"),
        ("brom", "halogenated"),
        ("acetate", "ester"),
        ("benzoate", "ester"),
        ("propionate", "ester"),
        ("butyrate", "ester"),
        ("levulinate", "ester"),
        ("pgmea", "ester"),
        ("ketone", "ketone"),
        ("anone", "ketone"),
        ("(mek)", "ketone"),
        ("acetone", "ketone"),
        ("ether", "ether"),
        ("glyme", "ether"),
        ("furan", "ether"),
        ("cellosolve", "ether"),
        ("anisole", "ether"),
        ("dioxane", "ether"),
        ("alcohol", "alcohol"),
        ("anol", "alcohol"),
        ("amine", "amine"),
        ("amide", "amide"),
        ("benzene", "aromatic"),
        ("xylene", "aromatic"),
        ("toluene", "aromatic"),
        ("ane", "alkane"),
    ];
    let lower = name.to_ascii_lowercase();
    if let Some((_, class)) = NAME_TABLE.iter().find(|(k, _)| lower.contains(k)) {
        return class;
    }
    if let Some(s) = smiles {
        if s.contains("C(=O)O") || s.contains("OC(=O)") || s.contains("(=O)OC") {
            return "ester";
        }
        if s.contains("=O") {
            return "ketone";
        }
        if s.contains('N') || s.contains('n') {
            return "nitrogenous";
        }
        if s.contains('O') {
            return "alcohol";
        }
    }
    "other"
}

fn entry(r: &CandidateRecord, note: String) -> PlanEntry {
    PlanEntry {
        topology: r.topology.clone(),
        fractions: r.fractions.clone(),
        score_total: r.score_total,
        pv_pass: r.pv_pass,
        run_id: r.run_id.clone(),
        iteration: r.iteration,
        note,
    }
}

fn first_failure(r: &CandidateRecord) -> Option<&str> {
    r.verdicts.iter().map(String::as_str).find(|v| v.ends_with(":fail"))
}

pub fn synthesize_plan(
    records: &[CandidateRecord],
    library: &SolventLibrary,
    mode: StrategyMode,
    thresholds: &PlanThresholds,
) -> GlobalPlan {
    let prohibited: Vec<String> = library.iter().filter(|s| s.is_prohibited()).map(|s| s.name.clone()).collect();
    if records.is_empty() {
        return GlobalPlan { prohibited, ..GlobalPlan::neutral(mode) };
    }
    let mut sorted: Vec<&CandidateRecord> = records.iter().collect();
    sorted.sort_by(|a, b| record_order(a, b));

    let cap = thresholds.section_cap.max(1);
    let mut champions = Vec::new();
    let mut yellow = Vec::new();
    let mut kill = Vec::new();
    let mut seen_champ = BTreeSet::new();
    let mut seen_yellow = BTreeSet::new();
    for r in &sorted {
        let topo = r.topology.clone();
        if r.pv_pass && r.score_total >= thresholds.champion {
            if seen_champ.insert(topo) && champions.len() < cap {
                champions.push(entry(r, format!("total {:.1}", r.score_total)));
            }
        } else if r.pv_pass && r.score_total >= thresholds.yellow {
            if seen_yellow.insert(topo) && yellow.len() < cap {
                let risk = r
                    .verdicts
                    .iter()
                    .find(|v| v.ends_with(":warn"))
                    .map_or_else(|| "below champion band".to_string(), |w| format!("risk {w}"));
                yellow.push(entry(r, risk));
            }
        }
    }
    // Kill entries come lowest-score first; a topology that also produced a
    // champion is never killed.
    let mut killed = BTreeSet::new();
    for r in sorted.iter().rev() {
        if kill.len() >= cap {
            break;
        }
        if (!r.pv_pass || r.score_total < thresholds.kill)
            && !seen_champ.contains(&r.topology)
            && killed.insert(r.topology.clone())
        {
            let why = match first_failure(r) {
                Some(f) => format!("failed {f}"),
                None => format!("total {:.1} below {}", r.score_total, thresholds.kill),
            };
            kill.push(entry(r, why));
        }
    }

    let champion_pattern = match champions.split_first() {
        None => Vec::new(),
        Some((first, rest)) => {
            let mut common: BTreeSet<&String> = first.topology.iter().collect();
            for c in rest {
                let t: BTreeSet<&String> = c.topology.iter().collect();
                common = common.intersection(&t).copied().collect();
            }
            common.into_iter().cloned().collect()
        }
    };

    let mut usage: BTreeMap<String, usize> = library.iter().map(|s| (s.name.clone(), 0)).collect();
    for r in records {
        for name in &r.topology {
            if let Some(c) = usage.get_mut(name) {
                *c += 1;
            }
        }
    }
    let dominant_solvent = usage
        .iter()
        .filter(|(_, &c)| c > 0)
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(n, _)| n.clone());

    let candidates: Vec<(&str, usize)> = library
        .iter()
        .filter(|s| !s.is_prohibited())
        .map(|s| (s.name.as_str(), usage[&s.name]))
        .collect();
    let mut counts: Vec<usize> = candidates.iter().map(|(_, c)| *c).collect();
    counts.sort_unstable();
    let decile = counts.get(counts.len() / 10).copied().unwrap_or(0);
    let mut groups: BTreeMap<&'static str, Vec<SolventUsage>> = BTreeMap::new();
    for (name, c) in candidates {
        if c == 0 || c <= decile {
            let s = library.get(name).expect("listed solvent");
            groups
                .entry(solvent_class(name, s.smiles.as_deref()))
                .or_default()
                .push(SolventUsage { name: name.to_string(), usage: c });
        }
    }
    let exploration_vectors = groups
        .into_iter()
        .map(|(class, mut solvents)| {
            solvents.sort_by(|a, b| a.usage.cmp(&b.usage).then_with(|| a.name.cmp(&b.name)));
            solvents.truncate(cap);
            ExplorationVector { class: class.to_string(), solvents }
        })
        .collect();

    GlobalPlan {
        strategy_mode: mode,
        record_count: records.len(),
        champions,
        champion_pattern,
        kill_list: kill,
        yellow_flags: yellow,
        exploration_vectors,
        dominant_solvent,
        usage,
        prohibited,
    }
}

/// Machine-readable generator constraints derived from a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDirectives {
    pub mode: StrategyMode,
    pub excluded_solvents: Vec<String>,
    /// A host solvent ranks first only if its own RED to the target is at most this.
    pub host_red_limit: f64,
    pub min_bp_spread: Option<f64>,
    pub min_red_post: Option<f64>,
    pub preferred_backbones: Vec<Vec<String>>,
    pub kill_topologies: Vec<Vec<String>>,
    pub exploration_solvents: Vec<String>,
    pub usage: BTreeMap<String, usize>,
}

impl Default for StrategyDirectives {
    fn default() -> Self {
        Self {
            mode: StrategyMode::Balanced,
            excluded_solvents: Vec::new(),
            host_red_limit: 0.7,
            min_bp_spread: None,
            min_red_post: None,
            preferred_backbones: Vec::new(),
            kill_topologies: Vec::new(),
            exploration_solvents: Vec::new(),
            usage: BTreeMap::new(),
        }
    }
}

impl StrategyDirectives {
    pub fn render(&self) -> String {
        let mut lines = vec![format!("mode: {}", self.mode.as_str())];
        if !self.excluded_solvents.is_empty() {
            lines.push(format!("do not use: {}", self.excluded_solvents.join(", ")));
        }
        lines.push(format!("host RED to target at most {}", self.host_red_limit));
        if let Some(s) = self.min_bp_spread {
            lines.push(format!("boiling-point spread at least {s} C"));
        }
        if let Some(r) = self.min_red_post {
            lines.push(format!("RED to protected layer above {r}"));
        }
        for b in &self.preferred_backbones {
            lines.push(format!("preferred backbone: {}", b.join(" + ")));
        }
        lines.join("\n")
    }
}

pub fn apply_strategy(plan: &GlobalPlan, mode: StrategyMode, library: &SolventLibrary) -> StrategyDirectives {
    let mut d = StrategyDirectives {
        mode,
        kill_topologies: plan.kill_list.iter().map(|e| e.topology.clone()).collect(),
        exploration_solvents: plan
            .exploration_vectors
            .iter()
            .flat_map(|v| v.solvents.iter().map(|u| u.name.clone()))
            .collect(),
        usage: plan.usage.clone(),
        ..StrategyDirectives::default()
    };
    match mode {
        StrategyMode::Balanced => {
            d.preferred_backbones = plan.champions.iter().map(|e| e.topology.clone()).collect();
        }
        StrategyMode::Innovation => {
            d.excluded_solvents.extend(plan.dominant_solvent.iter().cloned());
            d.host_red_limit = 0.8;
        }
        StrategyMode::Green => {
            d.excluded_solvents =
                library.iter().filter(|s| s.safety_class == SafetyClass::Warn).map(|s| s.name.clone()).collect();
        }
        StrategyMode::Engineering => {
            d.min_bp_spread = Some(30.0);
            d.min_red_post = Some(1.1);
        }
    }
    d
}
