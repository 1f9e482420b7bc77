mod common;

use proptest::prelude::*;
use sds_core::planner::{
    apply_strategy, synthesize_plan, CandidateRecord, InMemoryStore, JsonlMemoryStore, MemoryStore, PlanThresholds,
    StoreError, StrategyMode,
};
use sds_core::proposal::{build_context, HeuristicConfig, HeuristicGenerator};
use sds_core::search::SearchMode;
use sds_core::library::DEMO_SUBSET;

fn record(it: usize, topo: &[&str], score: f64, pv: bool) -> CandidateRecord {
    let mut topology: Vec<String> = topo.iter().map(|s| s.to_string()).collect();
    topology.sort();
    let share = 1.0 / topology.len() as f64;
    CandidateRecord {
        run_id: "r".into(),
        iteration: it,
        fractions: topology.iter().map(|n| (n.clone(), share)).collect(),
        topology,
        score_total: score,
        pv_pass: pv,
        verdicts: vec![if pv { "red_target:pass".into() } else { "red_target:fail".into() }],
    }
}

fn records() -> impl Strategy<Value = Vec<CandidateRecord>> {
    let pick = prop::sample::subsequence(DEMO_SUBSET.to_vec(), 2..=3);
    prop::collection::vec((pick, 30.0f64..95.0, any::<bool>()), 1..40).prop_map(|v| {
        v.into_iter().enumerate().map(|(i, (t, s, pv))| record(i, &t, s, pv)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn innovation_never_proposes_the_dominant_solvent(recs in records(), seed in any::<u64>()) {
        let lib = common::demo_library();
        let (t, p) = (common::target(), common::protect());
        let plan = synthesize_plan(&recs, &lib, StrategyMode::Innovation, &PlanThresholds::default());
        let d = apply_strategy(&plan, StrategyMode::Innovation, &lib);
        let ctx = build_context(&[], &[], &plan, &d, SearchMode::Full);
        let gen = HeuristicGenerator::new(&lib, &t, &p, HeuristicConfig::default());
        if let (Some(dom), Ok(prop)) = (&plan.dominant_solvent, gen.generate(&ctx, seed)) {
            prop_assert!(!prop.components.contains(dom), "{dom} in {:?}", prop.components);
        }
    }

    #[test]
    fn plan_sections_are_capped_and_disjoint(recs in records()) {
        let lib = common::demo_library();
        let th = PlanThresholds::default();
        let plan = synthesize_plan(&recs, &lib, StrategyMode::Balanced, &th);
        prop_assert_eq!(plan.record_count, recs.len());
        for section in [&plan.champions, &plan.kill_list, &plan.yellow_flags] {
            prop_assert!(section.len() <= th.section_cap);
        }
        for k in &plan.kill_list {
            prop_assert!(!plan.champions.iter().any(|c| c.topology == k.topology));
        }
        for c in &plan.champions {
            prop_assert!(c.pv_pass && c.score_total >= th.champion);
            for name in &plan.champion_pattern {
                prop_assert!(c.topology.contains(name));
            }
        }
    }
}

#[test]
fn empty_memory_gives_a_neutral_plan() {
    let plan = synthesize_plan(&[], &common::demo_library(), StrategyMode::Balanced, &PlanThresholds::default());
    assert!(plan.is_neutral());
    assert!(plan.champions.is_empty() && plan.kill_list.is_empty());
}

#[test]
fn jsonl_store_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("memory.jsonl");
    let recs = vec![
        record(0, &["Cyclohexanone", "Anisole"], 88.1, true),
        record(1, &["PGMEA", "Ethanol"], 20.0, false),
    ];
    {
        let mut store = JsonlMemoryStore::open(&path).unwrap();
        for r in &recs {
            store.store(r.clone()).unwrap();
        }
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().next().unwrap().contains("sds-memory"));
    let reopened = JsonlMemoryStore::open(&path).unwrap();
    assert_eq!(reopened.records(), &recs[..]);
    assert_eq!(reopened.by_score()[0].score_total, 88.1);
}

#[test]
fn corrupt_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("memory.jsonl");
    {
        let mut store = JsonlMemoryStore::open(&path).unwrap();
        store.store(record(0, &["Cyclohexanone", "Anisole"], 88.1, true)).unwrap();
    }
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{not json\n");
    std::fs::write(&path, text).unwrap();
    match JsonlMemoryStore::open(&path) {
        Err(StoreError::Corrupt { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected corrupt store, got {other:?}"),
    }
}

#[test]
fn invalid_records_are_refused() {
    let mut store = InMemoryStore::new();
    let mut r = record(0, &["Cyclohexanone", "Anisole"], 88.1, true);
    r.fractions.push(("Toluene".into(), 0.1));
    assert!(matches!(store.store(r), Err(StoreError::Validation(_))));
    let mut r = record(0, &["Cyclohexanone", "Anisole"], 88.1, true);
    r.verdicts.clear();
    assert!(matches!(store.store(r), Err(StoreError::Validation(_))));
    // A pruned recipe keeps the proposed topology.
    let mut r = record(0, &["Cyclohexanone", "Anisole", "PGMEA"], 80.0, true);
    r.fractions = vec![("Cyclohexanone".into(), 0.6), ("PGMEA".into(), 0.4)];
    assert!(store.store(r).is_ok());
}
