//! Sparse-state Monte Carlo tree search over solvent topologies.
//!
//! Every node is a complete candidate: it is evaluated once when created and
//! never rolled out. One iteration is select → expand → evaluate →
//! backpropagate → store.

pub mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critic::{check_physical_validity, Critic, EvaluationReport, Verdict};
use crate::hsp::MaterialTarget;
use crate::library::{Formulation, LibraryError, SolventLibrary};
use crate::planner::{
    apply_strategy, synthesize_plan, CandidateRecord, GlobalPlan, MemoryStore, PlanThresholds, StoreError,
    StrategyDirectives, StrategyMode,
};
use crate::proposal::{build_context, DecisionSummary, ProposalError, TopologyGenerator, TopologyProposal};
use crate::ratio::{
    optimize_ratios, simplify_recipe, LossBreakdown, LossConfig, OptimizerConfig, RatioError, SimplifyConfig,
    SimplifyError,
};
use crate::seed;

pub use trace::{NodeStats, SearchEvent, SearchTrace, TraceEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// No sibling conditioning, no plan.
    Naive,
    /// Siblings become negative constraints; duplicates are rejected.
    SiblingAware,
    /// Sibling-aware plus the memory-derived root plan.
    #[default]
    Full,
}

impl SearchMode {
    pub const ALL: [SearchMode; 3] = [SearchMode::Naive, SearchMode::SiblingAware, SearchMode::Full];

    pub fn as_str(&self) -> &'static str {
        match self {
            SearchMode::Naive => "naive",
            SearchMode::SiblingAware => "sibling_aware",
            SearchMode::Full => "full",
        }
    }
}

impl std::fmt::Display for SearchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SearchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "naive" => Ok(SearchMode::Naive),
            "sibling_aware" | "sibling" => Ok(SearchMode::SiblingAware),
            "full" => Ok(SearchMode::Full),
            other => Err(format!("unknown search mode {other:?} (expected naive, sibling_aware, full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Iteration budget T.
    pub max_iterations: usize,
    /// Children per node K.
    pub max_children: usize,
    /// UCB exploration constant C.
    pub exploration_constant: f64,
    pub mode: SearchMode,
    pub seed: u64,
    /// Nodes at this depth (root = 0) are never expanded.
    pub max_depth: usize,
    /// Reward for candidates that fail a hard constraint.
    pub failure_floor: f64,
    /// Generator calls per expansion before the iteration is skipped.
    pub max_attempts: u32,
    /// Plan refresh interval in full mode; defaults to ceil(T/3).
    pub plan_refresh: Option<usize>,
    /// Provenance tag for memory records; defaults to `<mode>-<seed>`.
    pub run_id: Option<String>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_iterations: 60,
            max_children: 5,
            exploration_constant: 1.414,
            mode: SearchMode::Full,
            seed: 0,
            max_depth: 4,
            failure_floor: 0.0,
            max_attempts: 3,
            plan_refresh: None,
            run_id: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.max_iterations < 1 {
            return Err(("max_iterations", "must be >= 1".into()));
        }
        if self.max_children < 1 {
            return Err(("max_children", "must be >= 1".into()));
        }
        if !(self.exploration_constant >= 0.0 && self.exploration_constant.is_finite()) {
            return Err(("exploration_constant", "must be finite and >= 0".into()));
        }
        if self.max_depth < 1 {
            return Err(("max_depth", "must be >= 1".into()));
        }
        if self.max_attempts < 1 {
            return Err(("max_attempts", "must be >= 1".into()));
        }
        if !self.failure_floor.is_finite() {
            return Err(("failure_floor", "must be finite".into()));
        }
        if self.plan_refresh == Some(0) {
            return Err(("plan_refresh", "must be >= 1".into()));
        }
        Ok(())
    }

    pub fn refresh_interval(&self) -> usize {
        self.plan_refresh.unwrap_or(self.max_iterations.div_ceil(3)).max(1)
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| format!("{}-{}", self.mode, self.seed))
    }
}

/// Everything besides collaborators that a run needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub search: SearchConfig,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    pub simplify: SimplifyConfig,
    pub thresholds: PlanThresholds,
    pub strategy: StrategyMode,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("tree exhausted: every reachable node is fully expanded or at max depth")]
    ExhaustedTree,
    #[error("duplicate proposal {topology:?} after {attempts} attempt(s)")]
    DuplicateProposal { attempts: u32, topology: Vec<String> },
    #[error("generator failed after {attempts} attempt(s): {message}")]
    GeneratorFailure { attempts: u32, message: String },
    #[error("generator transport failure: {0}")]
    GeneratorTransport(String),
    #[error(transparent)]
    Ratio(#[from] RatioError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
}

impl SearchError {
    /// Expansion failures that skip an iteration instead of aborting the run.
    pub fn is_skippable(&self) -> bool {
        matches!(self, SearchError::DuplicateProposal { .. } | SearchError::GeneratorFailure { .. })
    }
}

/// Sparse node state: action, reward, visit count, value sum and a capped
/// decision summary. Children are arena indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Sorted component names; `None` for the root.
    pub action: Option<Vec<String>>,
    pub reward: f64,
    pub visits: u64,
    pub value_sum: f64,
    pub summary: Option<DecisionSummary>,
    /// Set after an expansion attempt at this node failed; never expanded again.
    pub closed: bool,
    #[serde(skip)]
    pub children: Vec<usize>,
}

impl SearchNode {
    pub fn mean(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.value_sum / self.visits as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<SearchNode>,
}

impl Default for Tree {
    fn default() -> Self {
        Self::new()
    }
}

impl Tree {
    pub const ROOT: usize = 0;

    pub fn new() -> Self {
        Self {
            nodes: vec![SearchNode {
                id: 0,
                parent: None,
                depth: 0,
                action: None,
                reward: 0.0,
                visits: 0,
                value_sum: 0.0,
                summary: None,
                closed: false,
                children: Vec::new(),
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: usize) -> &mut SearchNode {
        &mut self.nodes[id]
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn add_child(&mut self, parent: usize, mut action: Vec<String>) -> usize {
        action.sort();
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(SearchNode {
            id,
            parent: Some(parent),
            depth,
            action: Some(action),
            reward: 0.0,
            visits: 0,
            value_sum: 0.0,
            summary: None,
            closed: false,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Node ids from the root to `id`, inclusive.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut p = vec![id];
        let mut cur = id;
        while let Some(parent) = self.nodes[cur].parent {
            p.push(parent);
            cur = parent;
        }
        p.reverse();
        p
    }

    fn summary_of(&self, id: usize) -> DecisionSummary {
        let n = &self.nodes[id];
        n.summary.clone().unwrap_or_else(|| DecisionSummary::new(n.action.clone().unwrap_or_default(), n.reward, ""))
    }

    /// Decision summaries of `id`'s ancestors below the root plus `id` itself.
    pub fn path_summaries(&self, id: usize) -> Vec<DecisionSummary> {
        self.path(id).into_iter().skip(1).map(|n| self.summary_of(n)).collect()
    }

    pub fn child_summaries(&self, id: usize) -> Vec<DecisionSummary> {
        self.nodes[id].children.iter().map(|&c| self.summary_of(c)).collect()
    }

    pub fn can_expand(&self, id: usize, cfg: &SearchConfig) -> bool {
        let n = &self.nodes[id];
        !n.closed && n.depth < cfg.max_depth && n.children.len() < cfg.max_children
    }

    fn saturation(&self, cfg: &SearchConfig) -> Vec<bool> {
        // Children always have larger ids than their parent.
        let mut sat = vec![false; self.nodes.len()];
        for id in (0..self.nodes.len()).rev() {
            sat[id] = !self.can_expand(id, cfg) && self.nodes[id].children.iter().all(|&c| sat[c]);
        }
        sat
    }

    pub fn ucb(&self, child: usize, c: f64) -> f64 {
        let n = &self.nodes[child];
        if n.visits == 0 {
            return f64::INFINITY;
        }
        let parent_visits = n.parent.map_or(0, |p| self.nodes[p].visits) as f64;
        n.mean() + c * (parent_visits.max(1.0).ln() / n.visits as f64).sqrt()
    }
}

/// Descends from the root by UCB until a node with spare child capacity.
/// Saturated subtrees (nothing expandable below) are skipped; ties go to the
/// earliest-created child.
pub fn select_leaf(tree: &Tree, cfg: &SearchConfig) -> Result<usize, SearchError> {
    let sat = tree.saturation(cfg);
    if sat[Tree::ROOT] {
        return Err(SearchError::ExhaustedTree);
    }
    let mut cur = Tree::ROOT;
    loop {
        if tree.can_expand(cur, cfg) {
            return Ok(cur);
        }
        let mut best: Option<(usize, f64)> = None;
        for &c in &tree.node(cur).children {
            if sat[c] {
                continue;
            }
            let u = tree.ucb(c, cfg.exploration_constant);
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((c, u));
            }
        }
        cur = best.map(|(c, _)| c).ok_or(SearchError::ExhaustedTree)?;
    }
}

/// Context inputs shared by every expansion in a run.
pub struct ExpansionContext<'a> {
    pub library: &'a SolventLibrary,
    pub plan: &'a GlobalPlan,
    pub directives: &'a StrategyDirectives,
    pub iteration: usize,
}

/// Asks the generator for a child of `leaf` and attaches it.
///
/// Each attempt gets a fresh seed. Invalid proposals, generator errors and
/// (outside naive mode) exact sibling duplicates use up an attempt.
pub fn expand<G: TopologyGenerator + ?Sized>(
    tree: &mut Tree,
    leaf: usize,
    generator: &mut G,
    cfg: &SearchConfig,
    ectx: &ExpansionContext<'_>,
) -> Result<(usize, TopologyProposal), SearchError> {
    let path = tree.path_summaries(leaf);
    let siblings = tree.child_summaries(leaf);
    let sibling_sets: Vec<Vec<String>> =
        tree.node(leaf).children.iter().map(|&c| tree.node(c).action.clone().unwrap_or_default()).collect();
    let mut last_dup: Option<Vec<String>> = None;
    let mut last_err = String::new();
    for attempt in 0..cfg.max_attempts {
        let mut ctx = build_context(&path, &siblings, ectx.plan, ectx.directives, cfg.mode);
        ctx.iteration = ectx.iteration;
        ctx.attempt = attempt;
        let s = seed::derive(cfg.seed, seed::STREAM_GENERATOR, ectx.iteration as u64 * 8 + u64::from(attempt));
        match generator.propose(&ctx, s) {
            Ok(p) => {
                if let Err(e) = p.validate(ectx.library) {
                    last_err = e.to_string();
                    last_dup = None;
                    continue;
                }
                let sorted = p.sorted();
                if cfg.mode != SearchMode::Naive && sibling_sets.contains(&sorted) {
                    last_dup = Some(sorted);
                    continue;
                }
                let id = tree.add_child(leaf, sorted);
                return Ok((id, p));
            }
            Err(ProposalError::Transport { attempts, message }) => {
                return Err(SearchError::GeneratorTransport(format!("{message} ({attempts} attempt(s))")));
            }
            Err(e) => {
                last_err = e.to_string();
                last_dup = None;
            }
        }
    }
    Err(match last_dup {
        Some(topology) => SearchError::DuplicateProposal { attempts: cfg.max_attempts, topology },
        None => SearchError::GeneratorFailure { attempts: cfg.max_attempts, message: last_err },
    })
}

/// Result of evaluating one topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Continuous optimum before discretization.
    pub continuous: Formulation,
    pub loss_breakdown: LossBreakdown,
    pub final_loss: f64,
    /// Discretized recipe, when discretization succeeded.
    pub formulation: Option<Formulation>,
    pub reward: f64,
    pub report: Option<EvaluationReport>,
    pub verdicts: Vec<Verdict>,
    pub pv_pass: bool,
    pub failure: Option<String>,
}

impl Evaluation {
    /// Finalized and physically valid.
    pub fn surfaced(&self) -> bool {
        self.formulation.is_some() && self.pv_pass
    }
}

/// Optimize → simplify → score. Constraint violations become a floor reward
/// with the violation recorded; only engine errors are returned as `Err`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_candidate(
    topology: &[String],
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
    critic: &Critic,
    loss_cfg: &LossConfig,
    opt_cfg: &OptimizerConfig,
    simplify_cfg: &SimplifyConfig,
    failure_floor: f64,
) -> Result<Evaluation, SearchError> {
    let recipe = optimize_ratios(topology, library, target, protect, loss_cfg, opt_cfg)?;
    let validity = &critic.config().validity;
    let base = |formulation, report, verdicts, pv_pass, reward, failure| Evaluation {
        continuous: recipe.formulation.clone(),
        loss_breakdown: recipe.loss_breakdown,
        final_loss: recipe.final_loss,
        formulation,
        reward,
        report,
        verdicts,
        pv_pass,
        failure,
    };
    match simplify_recipe(&recipe, library, target, protect, loss_cfg, simplify_cfg) {
        Ok(f) => {
            let report = critic.hybrid_score(&f, library, target, protect)?;
            let verdicts = report.verdicts.clone();
            let pv = report.pv_pass;
            let (reward, failure) = if pv {
                (report.score_total.max(failure_floor), None)
            } else {
                let v = report.first_failure().expect("pv failure has a failing verdict");
                (failure_floor, Some(format!("{}: {}", v.check.as_str(), v.detail)))
            };
            Ok(base(Some(f), Some(report), verdicts, pv, reward, failure))
        }
        Err(SimplifyError::DiscretizationInfeasible(msg)) => {
            let verdicts = check_physical_validity(&recipe.formulation, library, target, protect, validity)?;
            Ok(base(None, None, verdicts, false, failure_floor, Some(format!("discretization infeasible: {msg}"))))
        }
        Err(SimplifyError::HardConstraintViolation { failed, formulation }) => {
            let verdicts = check_physical_validity(&formulation, library, target, protect, validity)?;
            Ok(base(None, None, verdicts, false, failure_floor, Some(format!("hard constraints: {}", failed.join("; ")))))
        }
        Err(SimplifyError::Library(e)) => Err(e.into()),
        Err(SimplifyError::InvalidConfig(m)) => Err(SearchError::InvalidConfig(m)),
    }
}

/// Adds `reward` to `node` and every ancestor. Returns the number of nodes updated.
pub fn backpropagate(tree: &mut Tree, node: usize, reward: f64) -> usize {
    let mut cur = Some(node);
    let mut count = 0;
    while let Some(id) = cur {
        let n = tree.node_mut(id);
        n.visits += 1;
        n.value_sum += reward;
        count += 1;
        cur = n.parent;
    }
    count
}

fn summary_note(e: &Evaluation) -> String {
    match (&e.failure, &e.report) {
        (Some(f), _) => format!("fail: {f}"),
        (None, Some(r)) => {
            let extra = r.warnings.first().cloned().unwrap_or_else(|| "clean".into());
            format!(
                "pass; RED {:.2}/{:.2}; total {:.1}; {extra}",
                r.red_pre, r.red_post, r.score_total
            )
        }
        (None, None) => "evaluated".into(),
    }
}

fn verdict_strings(v: &[Verdict]) -> Vec<String> {
    v.iter()
        .map(|v| format!("{}:{}", v.check.as_str(), serde_json::to_value(v.status).ok().and_then(|s| s.as_str().map(String::from)).unwrap_or_default()))
        .collect()
}

/// A run that stopped on an engine error, with everything recorded so far.
#[derive(Debug)]
pub struct SearchFailure {
    pub trace: SearchTrace,
    pub error: SearchError,
}

impl std::fmt::Display for SearchFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "search aborted after {} evaluation(s): {}", self.trace.entries.len(), self.error)
    }
}

impl std::error::Error for SearchFailure {}

/// Runs the full search loop for `cfg.search.max_iterations` iterations.
#[allow(clippy::too_many_arguments)]
pub fn run_search<G: TopologyGenerator + ?Sized>(
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
    generator: &mut G,
    critic: &Critic,
    memory: &mut dyn MemoryStore,
    cfg: &EngineConfig,
) -> Result<SearchTrace, Box<SearchFailure>> {
    let scfg = &cfg.search;
    let mut trace = SearchTrace::new(scfg.run_id(), scfg.mode, scfg.seed);
    if let Err((k, m)) = scfg.validate() {
        return Err(Box::new(SearchFailure { trace, error: SearchError::InvalidConfig(format!("{k}: {m}")) }));
    }
    let mut tree = Tree::new();
    let mut plan = GlobalPlan::neutral(cfg.strategy);
    let mut directives = apply_strategy(&plan, cfg.strategy, library);
    let refresh = scfg.refresh_interval();
    let run_id = scfg.run_id();

    macro_rules! bail {
        ($e:expr) => {{
            trace.finish(&tree, Some(plan.clone()));
            return Err(Box::new(SearchFailure { trace, error: $e }));
        }};
    }

    for it in 0..scfg.max_iterations {
        if scfg.mode == SearchMode::Full && it % refresh == 0 {
            plan = synthesize_plan(memory.records(), library, cfg.strategy, &cfg.thresholds);
            directives = apply_strategy(&plan, cfg.strategy, library);
            trace.events.push(SearchEvent::PlanRefresh { iteration: it, records: plan.record_count });
            trace.plans.push(plan.clone());
        }
        let leaf = match select_leaf(&tree, scfg) {
            Ok(l) => l,
            Err(_) => {
                trace.events.push(SearchEvent::ExhaustedTree { iteration: it });
                break;
            }
        };
        let ectx = ExpansionContext { library, plan: &plan, directives: &directives, iteration: it };
        let (child, proposal) = match expand(&mut tree, leaf, generator, scfg, &ectx) {
            Ok(c) => c,
            Err(e) if e.is_skippable() => {
                tree.node_mut(leaf).closed = true;
                trace.events.push(SearchEvent::SkippedExpansion { iteration: it, node: leaf, reason: e.to_string() });
                continue;
            }
            Err(e) => bail!(e),
        };
        let topology = tree.node(child).action.clone().unwrap_or_default();
        let mut opt_cfg = cfg.optimizer.clone();
        opt_cfg.seed = seed::derive(scfg.seed, seed::STREAM_OPTIMIZER, it as u64);
        // Optimize in proposal order so recipes list the host first.
        let eval = match evaluate_candidate(
            &proposal.components,
            library,
            target,
            protect,
            critic,
            &cfg.loss,
            &opt_cfg,
            &cfg.simplify,
            scfg.failure_floor,
        ) {
            Ok(e) => e,
            Err(e) => bail!(e),
        };
        {
            let reward = eval.reward;
            let summary = DecisionSummary::new(topology.clone(), reward, summary_note(&eval));
            let n = tree.node_mut(child);
            n.reward = reward;
            n.summary = Some(summary);
        }
        backpropagate(&mut tree, child, eval.reward);
        let record = CandidateRecord {
            run_id: run_id.clone(),
            iteration: it,
            topology: topology.clone(),
            fractions: eval
                .formulation
                .as_ref()
                .map(|f| f.iter().map(|(n, p)| (n.to_string(), p)).collect())
                .unwrap_or_default(),
            score_total: eval.report.as_ref().map_or(eval.reward, |r| r.score_total),
            pv_pass: eval.surfaced(),
            verdicts: verdict_strings(&eval.verdicts),
        };
        let node = tree.node(child);
        trace.entries.push(TraceEntry::new(it, node, &proposal, eval));
        if let Err(e) = memory.store(record) {
            bail!(e.into());
        }
    }
    trace.finish(&tree, (scfg.mode == SearchMode::Full).then_some(plan));
    Ok(trace)
}
