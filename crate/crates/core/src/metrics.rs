//! Quality and diversity metrics over search traces, and the mode ablation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critic::Critic;
use crate::hsp::MaterialTarget;
use crate::library::SolventLibrary;
use crate::planner::InMemoryStore;
use crate::proposal::TopologyGenerator;
use crate::search::{run_search, EngineConfig, SearchFailure, SearchMode, SearchTrace};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trace has no evaluated candidates")]
    EmptyTrace,
    #[error("mode {mode}: {source}")]
    Search { mode: SearchMode, source: Box<SearchFailure> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub evaluated: usize,
    /// Candidates whose recipe survived discretization.
    pub finalized: usize,
    /// Finalized and PV-passing candidates.
    pub surfaced: usize,
    pub unique_topologies: usize,
    /// Nats.
    pub shannon_entropy: f64,
    pub top5_concentration: f64,
    /// PV passes over finalized candidates; `None` when nothing was finalized.
    pub pv_rate: Option<f64>,
    /// Mean of the ten highest rewards.
    pub top10_mean: f64,
}

/// `-Σ p ln p` over positive counts.
pub fn shannon_entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts.iter().filter(|&&c| c > 0).map(|&c| {
        let p = c as f64 / n;
        -p * p.ln()
    }).sum();
    h.max(0.0)
}

/// Mean of the `k` largest values (all of them if fewer).
pub fn top_k_mean(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(k);
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn compute_diversity(trace: &SearchTrace) -> Result<DiversityReport, MetricsError> {
    if trace.entries.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let mut topo_counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut solvent_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut finalized = 0;
    let mut surfaced = 0;
    for e in &trace.entries {
        let id = e.identity();
        *topo_counts.entry(id).or_default() += 1;
        if e.finalized() {
            finalized += 1;
            if e.pv_pass {
                surfaced += 1;
            }
        }
    }
    for e in &trace.entries {
        let names: Vec<&str> = match &e.recipe {
            Some(f) => f.components.iter().map(String::as_str).collect(),
            None => e.topology.iter().map(String::as_str).collect(),
        };
        for n in names {
            *solvent_counts.entry(n).or_default() += 1;
        }
    }
    let counts: Vec<usize> = topo_counts.values().copied().collect();
    let mut usage: Vec<usize> = solvent_counts.values().copied().collect();
    usage.sort_unstable_by(|a, b| b.cmp(a));
    let occurrences: usize = usage.iter().sum();
    let top5: usize = usage.iter().take(5).sum();
    let rewards: Vec<f64> = trace.entries.iter().map(|e| e.reward).collect();
    Ok(DiversityReport {
        evaluated: trace.entries.len(),
        finalized,
        surfaced,
        unique_topologies: counts.len(),
        shannon_entropy: shannon_entropy(&counts),
        top5_concentration: if occurrences == 0 { 0.0 } else { top5 as f64 / occurrences as f64 },
        pv_rate: (finalized > 0).then(|| surfaced as f64 / finalized as f64),
        top10_mean: top_k_mean(&rewards, 10),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: SearchMode,
    pub seed: u64,
    pub report: DiversityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDelta {
    pub mode: SearchMode,
    pub baseline: SearchMode,
    pub entropy_delta: f64,
    pub unique_delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub seed: u64,
    pub budget: usize,
    pub rows: Vec<AblationRow>,
    /// Each later mode against the first row.
    pub deltas: Vec<ModeDelta>,
}

impl AblationTable {
    pub fn row(&self, mode: SearchMode) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    pub fn render_text(&self) -> String {
        let mut s = format!("seed {}  budget T={}\n", self.seed, self.budget);
        s.push_str(&format!(
            "{:<14} {:>6} {:>8} {:>8} {:>7} {:>8} {:>9}\n",
            "mode", "PV", "Top-10", "Entropy", "Unique", "Top-5 %", "Evaluated"
        ));
        for r in &self.rows {
            let d = &r.report;
            s.push_str(&format!(
                "{:<14} {:>6} {:>8.2} {:>8.4} {:>7} {:>8.1} {:>9}\n",
                r.mode.as_str(),
                fmt_rate(d.pv_rate),
                d.top10_mean,
                d.shannon_entropy,
                d.unique_topologies,
                d.top5_concentration * 100.0,
                d.evaluated
            ));
        }
        for d in &self.deltas {
            s.push_str(&format!(
                "{} vs {}: entropy {:+.4}, unique {:+}\n",
                d.mode.as_str(),
                d.baseline.as_str(),
                d.entropy_delta,
                d.unique_delta
            ));
        }
        s
    }

    pub fn render_csv(&self) -> String {
        let mut s = String::from(
            "seed,mode,pv_rate,top10_mean,shannon_entropy,unique_topologies,top5_concentration,evaluated,finalized,surfaced\n",
        );
        for r in &self.rows {
            let d = &r.report;
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.seed,
                r.mode.as_str(),
                d.pv_rate.map_or(String::new(), |v| v.to_string()),
                d.top10_mean,
                d.shannon_entropy,
                d.unique_topologies,
                d.top5_concentration,
                d.evaluated,
                d.finalized,
                d.surfaced
            ));
        }
        s
    }
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

/// Per-mode means across several ablation tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMean {
    pub mode: SearchMode,
    pub runs: usize,
    /// Mean over runs that finalized at least one candidate.
    pub pv_rate: Option<f64>,
    pub top10_mean: f64,
    pub shannon_entropy: f64,
    pub unique_topologies: f64,
    pub top5_concentration: f64,
}

pub fn mean_summary(tables: &[AblationTable]) -> Vec<ModeMean> {
    let mut by_mode: BTreeMap<SearchMode, Vec<&DiversityReport>> = BTreeMap::new();
    let mut order = Vec::new();
    for t in tables {
        for r in &t.rows {
            if !by_mode.contains_key(&r.mode) {
                order.push(r.mode);
            }
            by_mode.entry(r.mode).or_default().push(&r.report);
        }
    }
    order
        .into_iter()
        .map(|mode| {
            let v = &by_mode[&mode];
            let n = v.len() as f64;
            let mean = |f: &dyn Fn(&DiversityReport) -> f64| v.iter().map(|d| f(d)).sum::<f64>() / n;
            ModeMean {
                mode,
                runs: v.len(),
                pv_rate: {
                    let rates: Vec<f64> = v.iter().filter_map(|d| d.pv_rate).collect();
                    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
                },
                top10_mean: mean(&|d| d.top10_mean),
                shannon_entropy: mean(&|d| d.shannon_entropy),
                unique_topologies: mean(&|d| d.unique_topologies as f64),
                top5_concentration: mean(&|d| d.top5_concentration),
            }
        })
        .collect()
}

pub fn render_mean_summary(means: &[ModeMean]) -> String {
    let mut s = format!("{:<14} {:>5} {:>6} {:>8} {:>8} {:>7} {:>8}\n", "mode", "runs", "PV", "Top-10", "Entropy", "Unique", "Top-5 %");
    for m in means {
        s.push_str(&format!(
            "{:<14} {:>5} {:>6} {:>8.2} {:>8.4} {:>7.1} {:>8.1}\n",
            m.mode.as_str(),
            m.runs,
            fmt_rate(m.pv_rate),
            m.top10_mean,
            m.shannon_entropy,
            m.unique_topologies,
            m.top5_concentration * 100.0
        ));
    }
    s
}

/// Runs one search per mode with identical budget, seed, generator factory
/// and critic; each mode starts from empty memory.
pub fn run_ablation<'g, F>(
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
    make_generator: F,
    critic: &Critic,
    cfg: &EngineConfig,
    modes: &[SearchMode],
) -> Result<(AblationTable, Vec<SearchTrace>), MetricsError>
where
    F: Fn() -> Box<dyn TopologyGenerator + 'g>,
{
    let mut rows = Vec::with_capacity(modes.len());
    let mut traces = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut c = cfg.clone();
        c.search.mode = mode;
        let mut generator = make_generator();
        let mut memory = InMemoryStore::new();
        let trace = run_search(library, target, protect, &mut generator, critic, &mut memory, &c)
            .map_err(|source| MetricsError::Search { mode, source })?;
        rows.push(AblationRow { mode, seed: cfg.search.seed, report: compute_diversity(&trace)? });
        traces.push(trace);
    }
    let deltas = match rows.split_first() {
        None => Vec::new(),
        Some((base, rest)) => rest
            .iter()
            .map(|r| ModeDelta {
                mode: r.mode,
                baseline: base.mode,
                entropy_delta: r.report.shannon_entropy - base.report.shannon_entropy,
                unique_delta: r.report.unique_topologies as i64 - base.report.unique_topologies as i64,
            })
            .collect(),
    };
    Ok((AblationTable { seed: cfg.search.seed, budget: cfg.search.max_iterations, rows, deltas }, traces))
}
