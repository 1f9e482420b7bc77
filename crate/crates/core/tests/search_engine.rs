mod common;

use proptest::prelude::*;
use sds_core::critic::{Critic, CriticConfig};
use sds_core::planner::{apply_strategy, GlobalPlan, InMemoryStore, MemoryStore, StrategyMode};
use sds_core::proposal::{
    build_context, DecisionSummary, GenerationContext, ProposalError, ScriptPolicy, ScriptedGenerator,
    TopologyGenerator, TopologyProposal, SUMMARY_CAP,
};
use sds_core::search::{
    backpropagate, expand, run_search, ExpansionContext, SearchConfig, SearchError, SearchEvent, SearchMode, Tree,
};

#[test]
fn search_best_equals_brute_force_argmax() {
    let o = common::search_oracle();
    let (topo, reward) = o.search_best.expect("some pair passes");
    let mut topo = topo;
    topo.sort();
    assert_eq!(reward, o.brute_reward);
    assert!(o.brute_best.contains(&topo), "{topo:?} not in {:?}", o.brute_best);
}

fn expand_n(mode: SearchMode, policy: ScriptPolicy, script: &[Vec<&str>], n: usize) -> (Vec<Result<usize, SearchError>>, ScriptedGenerator) {
    let lib = common::toy_library();
    let plan = GlobalPlan::neutral(StrategyMode::Balanced);
    let directives = apply_strategy(&plan, StrategyMode::Balanced, &lib);
    let cfg = SearchConfig { mode, ..SearchConfig::default() };
    let mut tree = Tree::new();
    let mut gen = ScriptedGenerator::new(script, policy);
    let mut out = Vec::new();
    for it in 0..n {
        let ectx = ExpansionContext { library: &lib, plan: &plan, directives: &directives, iteration: it };
        out.push(expand(&mut tree, Tree::ROOT, &mut gen, &cfg, &ectx).map(|(id, _)| id));
    }
    (out, gen)
}

#[test]
fn naive_expansion_ignores_siblings() {
    let a = vec!["Cyclohexanone", "Anisole"];
    let (res, gen) = expand_n(SearchMode::Naive, ScriptPolicy::Sequential, &[a.clone(), a], 2);
    assert!(res.iter().all(|r| r.is_ok()), "{res:?}");
    assert!(gen.contexts.iter().all(|c| c.negative_constraints.is_none()));
}

#[test]
fn sibling_aware_expansion_sees_earlier_children() {
    let script = vec![
        vec!["Cyclohexanone", "Anisole"],
        vec!["Cyclohexanone", "PGMEA"],
        vec!["Anisole", "PGMEA"],
    ];
    let (res, gen) = expand_n(SearchMode::SiblingAware, ScriptPolicy::AvoidConstraints, &script, 3);
    assert!(res.iter().all(|r| r.is_ok()));
    let nc: Vec<usize> = gen.contexts.iter().map(|c| c.negative_constraints.as_ref().unwrap().len()).collect();
    assert_eq!(nc, vec![0, 1, 2]);
    let second = &gen.contexts[1].negative_constraints.as_ref().unwrap()[0];
    assert_eq!(second.topology, vec!["Anisole".to_string(), "Cyclohexanone".to_string()]);
}

#[test]
fn repeated_duplicate_is_rejected_after_all_attempts() {
    let a = vec!["Cyclohexanone", "Anisole"];
    let (res, gen) = expand_n(SearchMode::SiblingAware, ScriptPolicy::Sequential, &[a.clone(), a.clone(), a.clone(), a], 2);
    assert!(res[0].is_ok());
    match &res[1] {
        Err(SearchError::DuplicateProposal { attempts, .. }) => assert_eq!(*attempts, 3),
        other => panic!("expected duplicate, got {other:?}"),
    }
    assert_eq!(gen.contexts.len(), 4);
    let attempts: Vec<u32> = gen.contexts[1..].iter().map(|c| c.attempt).collect();
    assert_eq!(attempts, vec![0, 1, 2]);
}

#[test]
fn duplicate_becomes_a_skipped_expansion_in_a_run() {
    let lib = common::toy_library();
    let a = vec!["Cyclohexanone", "Anisole"];
    let script: Vec<Vec<&str>> = vec![a; 8];
    let mut gen = ScriptedGenerator::new(&script, ScriptPolicy::Sequential);
    let critic = Critic::new(CriticConfig::default());
    let mut cfg = common::toy_engine(2, 5, SearchMode::SiblingAware);
    cfg.search.max_depth = 1;
    let mut mem = InMemoryStore::new();
    let trace = run_search(&lib, &common::target(), &common::protect(), &mut gen, &critic, &mut mem, &cfg).unwrap();
    assert_eq!(trace.entries.len(), 1);
    assert!(matches!(trace.events[0], SearchEvent::SkippedExpansion { iteration: 1, node: 0, .. }));
}

#[test]
fn saturated_tree_stops_the_run() {
    let lib = common::toy_library();
    let pairs = common::all_pairs(&lib);
    let mut gen = ScriptedGenerator::new(&pairs, ScriptPolicy::Sequential);
    let critic = Critic::new(CriticConfig::default());
    let mut cfg = common::toy_engine(10, 3, SearchMode::SiblingAware);
    cfg.search.max_depth = 1;
    let mut mem = InMemoryStore::new();
    let trace = run_search(&lib, &common::target(), &common::protect(), &mut gen, &critic, &mut mem, &cfg).unwrap();
    assert_eq!(trace.entries.len(), 3);
    assert!(matches!(trace.events.last(), Some(SearchEvent::ExhaustedTree { iteration: 3 })));
    assert_eq!(trace.tree[0].visits, 3);
}

struct Offline;

impl TopologyGenerator for Offline {
    fn name(&self) -> &str {
        "offline"
    }

    fn propose(&mut self, _: &GenerationContext, _: u64) -> Result<TopologyProposal, ProposalError> {
        Err(ProposalError::Transport { attempts: 3, message: "connection refused".into() })
    }
}

#[test]
fn transport_failure_aborts_with_partial_trace() {
    let lib = common::toy_library();
    let critic = Critic::new(CriticConfig::default());
    let cfg = common::toy_engine(5, 5, SearchMode::Full);
    let mut mem = InMemoryStore::new();
    let err = run_search(&lib, &common::target(), &common::protect(), &mut Offline, &critic, &mut mem, &cfg).unwrap_err();
    assert!(matches!(err.error, SearchError::GeneratorTransport(_)));
    assert!(err.trace.entries.is_empty());
}

#[test]
fn every_mode_writes_memory() {
    let lib = common::demo_library();
    let (t, p) = (common::target(), common::protect());
    for mode in SearchMode::ALL {
        let mut cfg = common::toy_engine(12, 5, mode);
        cfg.search.seed = 3;
        let critic = Critic::new(CriticConfig::default());
        let mut gen = sds_core::proposal::HeuristicGenerator::new(&lib, &t, &p, Default::default());
        let mut mem = InMemoryStore::new();
        let trace = run_search(&lib, &t, &p, &mut gen, &critic, &mut mem, &cfg).unwrap();
        assert_eq!(mem.records().len(), trace.entries.len(), "{mode}");
        assert_eq!(trace.plans.is_empty(), mode != SearchMode::Full, "{mode}");
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let (a, b) = common::twin_trace_files(40, 11);
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn visits_are_conserved(parents in prop::collection::vec(0usize..1000, 1..40), hits in prop::collection::vec((0usize..1000, 0.0f64..100.0), 0..80)) {
        let mut tree = Tree::new();
        for (i, p) in parents.iter().enumerate() {
            let parent = p % tree.len();
            tree.add_child(parent, vec![format!("s{i}"), "x".into()]);
        }
        let mut direct = vec![0u64; tree.len()];
        let mut total = 0.0;
        for (node, r) in &hits {
            let id = node % tree.len();
            let updated = backpropagate(&mut tree, id, *r);
            prop_assert_eq!(updated, tree.path(id).len());
            direct[id] += 1;
            total += r;
        }
        prop_assert_eq!(tree.node(Tree::ROOT).visits, hits.len() as u64);
        prop_assert!((tree.node(Tree::ROOT).value_sum - total).abs() < 1e-9);
        for id in 0..tree.len() {
            let n = tree.node(id);
            let below: u64 = n.children.iter().map(|&c| tree.node(c).visits).sum();
            prop_assert_eq!(n.visits, below + direct[id]);
        }
    }

    #[test]
    fn context_size_is_bounded_by_depth(notes in prop::collection::vec("[a-z ]{0,600}", 0..8), reward in 0.0f64..100.0) {
        let lib = common::toy_library();
        let plan = GlobalPlan::neutral(StrategyMode::Balanced);
        let directives = apply_strategy(&plan, StrategyMode::Balanced, &lib);
        let path: Vec<DecisionSummary> = notes
            .iter()
            .map(|n| DecisionSummary::new(vec!["Anisole".into(), "Cyclohexanone".into()], reward, n.clone()))
            .collect();
        let ctx = build_context(&path, &[], &plan, &directives, SearchMode::Full);
        prop_assert_eq!(ctx.depth(), notes.len());
        prop_assert!(ctx.path_size() <= plan.render().chars().count() + notes.len() * SUMMARY_CAP);
    }
}
