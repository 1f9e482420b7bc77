//! Topology proposals: generation context, generator interface and the
//! built-in generators.

pub mod grammar;
pub mod heuristic;
pub mod remote;
pub mod scripted;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::library::{SolventLibrary, MAX_COMPONENTS, MIN_COMPONENTS};
use crate::planner::{GlobalPlan, StrategyDirectives, StrategyMode};
use crate::search::SearchMode;

pub use heuristic::{HeuristicConfig, HeuristicGenerator};
pub use remote::RemoteGenerator;
pub use scripted::{ScriptPolicy, ScriptedGenerator};

/// Character cap on one rendered decision summary.
pub const SUMMARY_CAP: usize = 280;

#[derive(Debug, Error)]
pub enum ProposalError {
    #[error("no feasible proposal: {0}")]
    NoFeasibleProposal(String),
    #[error("invalid proposal: {0}")]
    InvalidProposal(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

/// The per-node decision record kept in the tree and replayed into contexts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub topology: Vec<String>,
    pub reward: f64,
    /// Outcome and top critique, one line.
    pub note: String,
}

impl DecisionSummary {
    pub fn new(topology: Vec<String>, reward: f64, note: impl Into<String>) -> Self {
        let mut s = Self { topology, reward, note: note.into() };
        s.truncate_to_cap();
        s
    }

    fn prefix(&self) -> String {
        format!("[{}] r={:.2}: ", self.topology.join(" + "), self.reward)
    }

    fn truncate_to_cap(&mut self) {
        let room = SUMMARY_CAP.saturating_sub(self.prefix().chars().count());
        if self.note.chars().count() > room {
            self.note = self.note.chars().take(room).collect();
        }
    }

    /// Rendered text, at most [`SUMMARY_CAP`] characters.
    pub fn text(&self) -> String {
        let s = format!("{}{}", self.prefix(), self.note);
        s.chars().take(SUMMARY_CAP).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeConstraint {
    /// Sorted component names.
    pub topology: Vec<String>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationContext {
    pub root_plan: String,
    pub directives: StrategyDirectives,
    pub strategy_mode: StrategyMode,
    pub search_mode: SearchMode,
    /// Ancestors of the node being expanded, root excluded, root-side first.
    pub path_summaries: Vec<DecisionSummary>,
    /// Existing children of the node being expanded, in creation order.
    /// `None` in naive mode.
    pub negative_constraints: Option<Vec<NegativeConstraint>>,
    pub iteration: usize,
    pub attempt: u32,
}

impl GenerationContext {
    /// Root plan plus path text; bounded by `root_plan.len() + depth * SUMMARY_CAP`.
    pub fn path_size(&self) -> usize {
        self.root_plan.chars().count() + self.path_summaries.iter().map(|s| s.text().chars().count()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        self.path_summaries.len()
    }

    pub fn excluded_topologies(&self) -> impl Iterator<Item = &Vec<String>> {
        self.negative_constraints.iter().flatten().map(|c| &c.topology)
    }

    /// Rendered prompt body for remote generators.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("GLOBAL PLAN\n");
        s.push_str(&self.root_plan);
        s.push_str("\nDIRECTIVES\n");
        s.push_str(&self.directives.render());
        s.push_str("\n\nSEARCH PATH\n");
        if self.path_summaries.is_empty() {
            s.push_str("(root)\n");
        }
        for (i, p) in self.path_summaries.iter().enumerate() {
            s.push_str(&format!("{}. {}\n", i + 1, p.text()));
        }
        if let Some(nc) = &self.negative_constraints {
            if !nc.is_empty() {
                s.push_str("\nALREADY PROPOSED AT THIS NODE (propose something different)\n");
                for c in nc {
                    s.push_str(&format!("- {}: {}\n", c.topology.join(" + "), c.rationale));
                }
            }
        }
        s
    }
}

/// Builds a context for expanding the last node of `path`.
///
/// `path` holds the summaries of the ancestors below the root (root-side
/// first); `siblings` holds the summaries of the expanding node's existing
/// children in creation order.
pub fn build_context(
    path: &[DecisionSummary],
    siblings: &[DecisionSummary],
    plan: &GlobalPlan,
    directives: &StrategyDirectives,
    mode: SearchMode,
) -> GenerationContext {
    let negative_constraints = (mode != SearchMode::Naive).then(|| {
        siblings
            .iter()
            .map(|s| {
                let mut topology = s.topology.clone();
                topology.sort();
                let line = s.note.lines().next().unwrap_or("").to_string();
                NegativeConstraint { topology, rationale: format!("r={:.2}; {line}", s.reward) }
            })
            .collect()
    });
    GenerationContext {
        root_plan: plan.render(),
        directives: directives.clone(),
        strategy_mode: directives.mode,
        search_mode: mode,
        path_summaries: path.to_vec(),
        negative_constraints,
        iteration: 0,
        attempt: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentRole {
    Host,
    Leverage,
    Modifier,
}

impl std::str::FromStr for ComponentRole {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "host" => Ok(ComponentRole::Host),
            "leverage" => Ok(ComponentRole::Leverage),
            "modifier" => Ok(ComponentRole::Modifier),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyProposal {
    pub components: Vec<String>,
    pub rationale: String,
    pub declared_roles: Option<Vec<Option<ComponentRole>>>,
    /// Advisory percentages from a remote generator; ignored by the optimizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advisory_percent: Option<Vec<f64>>,
}

impl TopologyProposal {
    pub fn new(components: Vec<String>, rationale: impl Into<String>) -> Self {
        Self { components, rationale: rationale.into(), declared_roles: None, advisory_percent: None }
    }

    pub fn topology(&self) -> BTreeSet<String> {
        self.components.iter().cloned().collect()
    }

    pub fn sorted(&self) -> Vec<String> {
        self.topology().into_iter().collect()
    }

    /// Size bound, distinct names, library membership and prohibited list.
    pub fn validate(&self, library: &SolventLibrary) -> Result<(), ProposalError> {
        let n = self.components.len();
        if !(MIN_COMPONENTS..=MAX_COMPONENTS).contains(&n) {
            return Err(ProposalError::InvalidProposal(format!(
                "{n} components, need {MIN_COMPONENTS}..={MAX_COMPONENTS}"
            )));
        }
        if self.topology().len() != n {
            return Err(ProposalError::InvalidProposal("repeated component".into()));
        }
        for c in &self.components {
            match library.get(c) {
                None => return Err(ProposalError::InvalidProposal(format!("unknown solvent {c:?}"))),
                Some(s) if s.is_prohibited() => {
                    return Err(ProposalError::InvalidProposal(format!("prohibited solvent {c:?}")))
                }
                Some(_) => {}
            }
        }
        if let Some(r) = &self.declared_roles {
            if r.len() != n {
                return Err(ProposalError::InvalidProposal("declared_roles length mismatch".into()));
            }
        }
        Ok(())
    }
}

pub trait TopologyGenerator {
    fn name(&self) -> &str;
    fn propose(&mut self, ctx: &GenerationContext, seed: u64) -> Result<TopologyProposal, ProposalError>;
}

impl<G: TopologyGenerator + ?Sized> TopologyGenerator for Box<G> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn propose(&mut self, ctx: &GenerationContext, seed: u64) -> Result<TopologyProposal, ProposalError> {
        (**self).propose(ctx, seed)
    }
}
