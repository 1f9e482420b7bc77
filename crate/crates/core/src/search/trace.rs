//! Search trace: per-iteration candidate records, run events and the final
//! tree statistics.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Evaluation, SearchMode, SearchNode, Tree};
use crate::critic::{EvaluationReport, Verdict};
use crate::library::Formulation;
use crate::planner::GlobalPlan;
use crate::proposal::TopologyProposal;
use crate::ratio::LossBreakdown;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub node: usize,
    pub parent: usize,
    pub depth: usize,
    /// Sorted component names.
    pub topology: Vec<String>,
    pub rationale: String,
    /// Continuous optimum.
    pub continuous: Formulation,
    pub breakdown: LossBreakdown,
    pub final_loss: f64,
    /// Discretized recipe; `None` when discretization or its re-check failed.
    pub recipe: Option<Formulation>,
    pub reward: f64,
    pub pv_pass: bool,
    pub verdicts: Vec<Verdict>,
    pub report: Option<EvaluationReport>,
    pub failure: Option<String>,
}

impl TraceEntry {
    pub fn new(iteration: usize, node: &SearchNode, proposal: &TopologyProposal, eval: Evaluation) -> Self {
        Self {
            iteration,
            node: node.id,
            parent: node.parent.unwrap_or(0),
            depth: node.depth,
            topology: node.action.clone().unwrap_or_default(),
            rationale: proposal.rationale.clone(),
            continuous: eval.continuous,
            breakdown: eval.loss_breakdown,
            final_loss: eval.final_loss,
            recipe: eval.formulation,
            reward: eval.reward,
            pv_pass: eval.pv_pass,
            verdicts: eval.verdicts,
            report: eval.report,
            failure: eval.failure,
        }
    }

    pub fn finalized(&self) -> bool {
        self.recipe.is_some()
    }

    /// Finalized and physically valid: eligible for result listings.
    pub fn surfaced(&self) -> bool {
        self.finalized() && self.pv_pass
    }

    /// Component set used for diversity: the recipe's when finalized, else the proposal's.
    pub fn identity(&self) -> Vec<String> {
        match &self.recipe {
            Some(f) => f.topology().into_iter().collect(),
            None => self.topology.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SearchEvent {
    SkippedExpansion { iteration: usize, node: usize, reason: String },
    PlanRefresh { iteration: usize, records: usize },
    ExhaustedTree { iteration: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub action: Option<Vec<String>>,
    pub reward: f64,
    pub visits: u64,
    pub value_sum: f64,
    pub mean: f64,
    pub children: usize,
    pub closed: bool,
}

impl From<&SearchNode> for NodeStats {
    fn from(n: &SearchNode) -> Self {
        Self {
            id: n.id,
            parent: n.parent,
            depth: n.depth,
            action: n.action.clone(),
            reward: n.reward,
            visits: n.visits,
            value_sum: n.value_sum,
            mean: n.mean(),
            children: n.children.len(),
            closed: n.closed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub run_id: String,
    pub mode: SearchMode,
    pub seed: u64,
    pub entries: Vec<TraceEntry>,
    pub events: Vec<SearchEvent>,
    pub tree: Vec<NodeStats>,
    /// Index into `entries` of the highest-reward surfaced candidate.
    pub best: Option<usize>,
    /// Plans in the order they were synthesized (full mode only).
    pub plans: Vec<GlobalPlan>,
    pub final_plan: Option<GlobalPlan>,
}

impl SearchTrace {
    pub fn new(run_id: String, mode: SearchMode, seed: u64) -> Self {
        Self {
            run_id,
            mode,
            seed,
            entries: Vec::new(),
            events: Vec::new(),
            tree: Vec::new(),
            best: None,
            plans: Vec::new(),
            final_plan: None,
        }
    }

    pub(crate) fn finish(&mut self, tree: &Tree, plan: Option<GlobalPlan>) {
        self.tree = tree.nodes().iter().map(NodeStats::from).collect();
        self.best = None;
        for (i, e) in self.entries.iter().enumerate() {
            if e.surfaced() && self.best.is_none_or(|b| e.reward > self.entries[b].reward) {
                self.best = Some(i);
            }
        }
        self.final_plan = plan;
    }

    pub fn best_entry(&self) -> Option<&TraceEntry> {
        self.best.map(|i| &self.entries[i])
    }

    /// Surfaced candidates, best reward first (earlier iteration on ties), one per topology.
    pub fn best_candidates(&self, n: usize) -> Vec<&TraceEntry> {
        let mut v: Vec<&TraceEntry> = self.entries.iter().filter(|e| e.surfaced()).collect();
        v.sort_by(|a, b| b.reward.total_cmp(&a.reward).then(a.iteration.cmp(&b.iteration)));
        let mut seen = BTreeSet::new();
        v.retain(|e| seen.insert(e.identity()));
        v.truncate(n);
        v
    }

    /// One JSON object per evaluated candidate.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn tree_summary(&self) -> serde_json::Value {
        serde_json::json!({
            "run_id": self.run_id,
            "mode": self.mode,
            "seed": self.seed,
            "evaluations": self.entries.len(),
            "root_visits": self.tree.first().map_or(0, |r| r.visits),
            "nodes": self.tree,
            "events": self.events,
            "best_iteration": self.best_entry().map(|e| e.iteration),
        })
    }
}
