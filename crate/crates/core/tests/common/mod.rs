//! Oracles and fixtures shared by the integration suites and the acceptance harness.
#![allow(dead_code)]

pub mod mock;

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sds_core::critic::{check_physical_validity, pv_pass, Critic, CriticConfig, ValidityConfig};
use sds_core::library::{Solvent, DEMO_SUBSET};
use sds_core::metrics::{run_ablation, DiversityReport};
use sds_core::planner::InMemoryStore;
use sds_core::proposal::{HeuristicConfig, HeuristicGenerator, ScriptPolicy, ScriptedGenerator, TopologyGenerator};
use sds_core::ratio::loss::LossModel;
use sds_core::ratio::simplify::discretize;
use sds_core::ratio::{
    optimize_ratios, softmax_fractions, LossConfig, OptimizerConfig, RatioParams, RoleThreshold, SimplifyConfig,
};
use sds_core::search::{evaluate_candidate, run_search, EngineConfig, SearchMode, SearchTrace};
use sds_core::{Formulation, HspVector, MaterialTarget, Role, SolventLibrary};

pub fn target() -> MaterialTarget {
    MaterialTarget::default_target()
}

pub fn protect() -> MaterialTarget {
    MaterialTarget::default_protect()
}

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn demo_library() -> SolventLibrary {
    SolventLibrary::shipped().subset(&DEMO_SUBSET).expect("demo subset resolves")
}

pub const TOY_SOLVENTS: [&str; 6] =
    ["Cyclohexanone", "n-Butyl acetate", "Anisole", "Methyl n-amyl ketone", "Tetrahydrofuran (THF)", "PGMEA"];

pub fn toy_library() -> SolventLibrary {
    SolventLibrary::shipped().subset(&TOY_SOLVENTS).expect("toy subset resolves")
}

pub fn all_pairs(lib: &SolventLibrary) -> Vec<Vec<String>> {
    let n: Vec<&str> = lib.iter().map(|s| s.name.as_str()).collect();
    let mut out = Vec::new();
    for i in 0..n.len() {
        for j in i + 1..n.len() {
            out.push(vec![n[i].to_string(), n[j].to_string()]);
        }
    }
    out
}

fn random_solvent(rng: &mut ChaCha8Rng, i: usize) -> Solvent {
    let hsp = HspVector::new(rng.random_range(14.0..21.0), rng.random_range(0.0..18.0), rng.random_range(0.0..25.0))
        .expect("finite");
    let mut roles = Vec::new();
    if rng.random_bool(0.5) {
        roles.push(Role::FastPenetrant);
    }
    if rng.random_bool(0.4) {
        roles.push(Role::HeavyModifier);
    }
    Solvent::new(format!("s{i}"), hsp)
        .with_molar_volume(rng.random_range(60.0..180.0))
        .with_boiling_point(rng.random_range(50.0..250.0))
        .with_roles(roles)
}

/// A random library of `n` solvents together with its topology.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> (SolventLibrary, Vec<String>) {
    let solvents: Vec<Solvent> = (0..n).map(|i| random_solvent(rng, i)).collect();
    let topo = solvents.iter().map(|s| s.name.clone()).collect();
    (SolventLibrary::new(solvents, &[]).expect("valid library"), topo)
}

/// Every weight non-zero; thresholds drawn so each hinge is on in some instances.
pub fn all_terms_config(rng: &mut ChaCha8Rng) -> LossConfig {
    let mut roles = BTreeMap::new();
    roles.insert(Role::FastPenetrant, RoleThreshold { tau: rng.random_range(0.2..0.9), beta: 0.7 });
    roles.insert(Role::HeavyModifier, RoleThreshold { tau: rng.random_range(0.05..0.5), beta: 0.4 });
    LossConfig {
        alpha_vm: 0.01,
        v_max: rng.random_range(80.0..160.0),
        alpha_bp: 0.005,
        t_max: rng.random_range(90.0..210.0),
        role_thresholds: roles,
        gamma: 0.05,
        ..LossConfig::default()
    }
}

#[derive(Debug, Default)]
pub struct GradientCheck {
    pub max_rel_err: f64,
    /// Instances in which each term (ratio, diff, penalty, swelling, kinetics, entropy) was non-zero.
    pub active: [usize; 6],
    pub instances: usize,
}

/// Analytic logit gradient against central differences.
///
/// Error per instance is `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖, 1e-8)`.
pub fn gradient_check(instances: usize, h: f64, seed: u64) -> GradientCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, p) = (target(), protect());
    let mut out = GradientCheck { instances, ..Default::default() };
    for k in 0..instances {
        let n = 2 + k % 4;
        let (lib, topo) = random_instance(&mut rng, n);
        let cfg = all_terms_config(&mut rng);
        let model = LossModel::new(&topo, &lib, &t, &p, &cfg).expect("model");
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let params = RatioParams::new(theta.clone());
        let b = model.evaluate(&params);
        for (slot, v) in out.active.iter_mut().zip([b.ratio, b.diff, b.penalty, b.swelling, b.kinetics, b.entropy]) {
            if v != 0.0 {
                *slot += 1;
            }
        }
        let g = model.gradient(&params);
        let fd: Vec<f64> = (0..n)
            .map(|i| {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[i] += h;
                dn[i] -= h;
                let lu = model.evaluate(&RatioParams::new(up)).total();
                let ld = model.evaluate(&RatioParams::new(dn)).total();
                (lu - ld) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&g).max(norm(&fd)).max(1e-8);
        out.max_rel_err = out.max_rel_err.max(rel);
    }
    out
}

#[derive(Debug)]
pub struct GridCase {
    pub optimized: f64,
    pub grid_min: f64,
    pub grid_argmin: f64,
}

/// Two-component instances: optimizer loss against a φ₁ grid with step 0.001.
pub fn grid_oracle(instances: usize, seed: u64) -> Vec<GridCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t, p) = (target(), protect());
    let cfg = LossConfig::default();
    (0..instances)
        .map(|_| {
            let (lib, topo) = random_instance(&mut rng, 2);
            let model = LossModel::new(&topo, &lib, &t, &p, &cfg).expect("model");
            let recipe = optimize_ratios(&topo, &lib, &t, &p, &cfg, &OptimizerConfig::default()).expect("optimize");
            let (mut grid_min, mut grid_argmin) = (f64::INFINITY, 0.0);
            for k in 1..1000 {
                let phi = k as f64 / 1000.0;
                let l = model.evaluate_fractions(&[phi, 1.0 - phi]).total();
                if l < grid_min {
                    grid_min = l;
                    grid_argmin = phi;
                }
            }
            GridCase { optimized: recipe.final_loss, grid_min, grid_argmin }
        })
        .collect()
}

pub fn toy_engine(iterations: usize, children: usize, mode: SearchMode) -> EngineConfig {
    let mut cfg = EngineConfig::default();
    cfg.search.max_iterations = iterations;
    cfg.search.max_children = children;
    cfg.search.mode = mode;
    cfg
}

#[derive(Debug)]
pub struct SearchOracle {
    pub search_best: Option<(Vec<String>, f64)>,
    /// All topologies sharing the brute-force maximum reward.
    pub brute_best: Vec<Vec<String>>,
    pub brute_reward: f64,
}

/// Scripted search over all 15 pairs of the toy library against an exhaustive scan.
pub fn search_oracle() -> SearchOracle {
    let lib = toy_library();
    let (t, p) = (target(), protect());
    let critic = Critic::new(CriticConfig::default());
    let cfg = toy_engine(15, 15, SearchMode::SiblingAware);
    let pairs = all_pairs(&lib);
    let mut gen = ScriptedGenerator::new(&pairs, ScriptPolicy::Sequential);
    let mut mem = InMemoryStore::new();
    let trace = run_search(&lib, &t, &p, &mut gen, &critic, &mut mem, &cfg).expect("search");

    let mut scored = Vec::new();
    for pair in &pairs {
        let e = evaluate_candidate(
            pair,
            &lib,
            &t,
            &p,
            &critic,
            &cfg.loss,
            &cfg.optimizer,
            &cfg.simplify,
            cfg.search.failure_floor,
        )
        .expect("evaluate");
        if e.surfaced() {
            let mut s = pair.clone();
            s.sort();
            scored.push((s, e.reward));
        }
    }
    let brute_reward = scored.iter().map(|(_, r)| *r).fold(f64::NEG_INFINITY, f64::max);
    SearchOracle {
        search_best: trace.best_entry().map(|e| (e.topology.clone(), e.reward)),
        brute_best: scored.into_iter().filter(|(_, r)| *r == brute_reward).map(|(s, _)| s).collect(),
        brute_reward,
    }
}

pub fn heuristic_search(lib: &SolventLibrary, cfg: &EngineConfig) -> SearchTrace {
    let (t, p) = (target(), protect());
    let critic = Critic::new(CriticConfig::default());
    let mut gen = HeuristicGenerator::new(lib, &t, &p, HeuristicConfig::default());
    let mut mem = InMemoryStore::new();
    run_search(lib, &t, &p, &mut gen, &critic, &mut mem, cfg).expect("search")
}

#[derive(Debug)]
pub struct PvOutcome {
    pub reported: usize,
    pub failures: Vec<String>,
}

/// Re-checks every recipe in the best-candidates report with an independent validity pass.
pub fn pv_of_best(iterations: usize, report_size: usize) -> PvOutcome {
    let lib = SolventLibrary::shipped();
    let mut cfg = EngineConfig::default();
    cfg.search.max_iterations = iterations;
    let trace = heuristic_search(&lib, &cfg);
    let best = trace.best_candidates(report_size);
    let mut failures = Vec::new();
    for e in &best {
        match &e.recipe {
            Some(f) => {
                let v = check_physical_validity(f, &lib, &target(), &protect(), &ValidityConfig::default())
                    .expect("validity");
                if !pv_pass(&v) {
                    failures.push(f.to_string());
                }
            }
            None => failures.push(format!("{:?} has no recipe", e.topology)),
        }
    }
    PvOutcome { reported: best.len(), failures }
}

/// Naive and full mode under one seed and budget on the demo subset.
pub fn diversity_direction(iterations: usize, seed: u64) -> (DiversityReport, DiversityReport) {
    let lib = demo_library();
    let (t, p) = (target(), protect());
    let critic = Critic::new(CriticConfig::default());
    let mut cfg = EngineConfig::default();
    cfg.search.max_iterations = iterations;
    cfg.search.seed = seed;
    let make = || {
        Box::new(HeuristicGenerator::new(&lib, &t, &p, HeuristicConfig::default())) as Box<dyn TopologyGenerator + '_>
    };
    let (table, _) =
        run_ablation(&lib, &t, &p, make, &critic, &cfg, &[SearchMode::Naive, SearchMode::Full]).expect("ablation");
    let naive = table.row(SearchMode::Naive).expect("naive row").report.clone();
    let full = table.row(SearchMode::Full).expect("full row").report.clone();
    (naive, full)
}

/// Two identical seeded runs written to files; returns both byte buffers.
pub fn twin_trace_files(iterations: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let lib = SolventLibrary::shipped();
    let mut cfg = EngineConfig::default();
    cfg.search.max_iterations = iterations;
    cfg.search.seed = seed;
    let dir = tempfile::tempdir().expect("tempdir");
    let mut bytes = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let path = dir.path().join(name);
        let trace = heuristic_search(&lib, &cfg);
        trace.write_jsonl(std::fs::File::create(&path).expect("create")).expect("write");
        bytes.push(std::fs::read(&path).expect("read"));
    }
    let b = bytes.pop().unwrap();
    (bytes.pop().unwrap(), b)
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn flatten(r: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

pub fn logits() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30.0f64..30.0, 1..=6)
}

pub fn prop_softmax_simplex(cases: u32) -> Result<(), String> {
    flatten(runner(cases).run(&logits(), |theta| {
        let phi = softmax_fractions(&RatioParams::new(theta));
        let sum: f64 = phi.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {sum}");
        prop_assert!(phi.iter().all(|p| *p > 0.0), "non-positive fraction in {phi:?}");
        Ok(())
    }))
}

pub fn prop_softmax_shift(cases: u32) -> Result<(), String> {
    flatten(runner(cases).run(&(logits(), -50.0f64..50.0), |(theta, c)| {
        let a = softmax_fractions(&RatioParams::new(theta.clone()));
        let b = softmax_fractions(&RatioParams::new(theta.iter().map(|t| t + c).collect()));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
        Ok(())
    }))
}

/// Integer 5%-unit compositions with 2..=5 parts, each at least one unit.
pub fn grid_units() -> impl Strategy<Value = Vec<u64>> {
    (2usize..=5).prop_flat_map(|n| {
        prop::collection::vec(1u64..=16, n).prop_filter_map("sum to 20", |mut v| {
            let s: u64 = v.iter().sum();
            if s > 20 {
                return None;
            }
            v[0] += 20 - s;
            Some(v)
        })
    })
}

fn unit_formulation(units: &[u64]) -> Formulation {
    Formulation::new(
        (0..units.len()).map(|i| format!("c{i}")).collect(),
        units.iter().map(|u| (u * 5) as f64 / 100.0).collect(),
    )
    .expect("grid point on simplex")
}

pub fn prop_simplify_fixed_point(cases: u32) -> Result<(), String> {
    let cfg = SimplifyConfig::default();
    flatten(runner(cases).run(&grid_units(), |u| {
        let f = unit_formulation(&u);
        let once = discretize(&f, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&once, &f);
        let twice = discretize(&once, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(twice, once);
        Ok(())
    }))
}

/// Simplex points whose every part survives pruning.
pub fn prunable_simplex() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 2..=5).prop_map(|w| {
        let n = w.len() as f64;
        let s: f64 = w.iter().sum::<f64>().max(1e-12);
        // At least 0.06 each, remainder spread by the weights.
        let spare = 1.0 - 0.06 * n;
        w.iter().map(|x| 0.06 + spare * x / s).collect()
    })
}

/// Hamilton apportionment of 20 units, written independently of the crate.
pub fn hamilton(phi: &[f64], seats: u64) -> Vec<u64> {
    let total: f64 = phi.iter().sum();
    let q: Vec<f64> = phi.iter().map(|p| p / total * seats as f64).collect();
    let mut u: Vec<u64> = q.iter().map(|x| x.floor() as u64).collect();
    let left = seats - u.iter().sum::<u64>();
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&a, &b| (q[b] - q[b].floor()).total_cmp(&(q[a] - q[a].floor())).then(a.cmp(&b)));
    for &i in idx.iter().take(left as usize) {
        u[i] += 1;
    }
    u
}

pub fn prop_largest_remainder(cases: u32) -> Result<(), String> {
    let cfg = SimplifyConfig::default();
    flatten(runner(cases).run(&prunable_simplex(), |phi| {
        let f = Formulation::new((0..phi.len()).map(|i| format!("c{i}")).collect(), phi.clone())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let out = discretize(&f, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let units: Vec<u64> = out.fractions.iter().map(|x| (x * 20.0).round() as u64).collect();
        prop_assert_eq!(units.iter().sum::<u64>(), 20);
        for (u, p) in units.iter().zip(&phi) {
            let q = p * 20.0;
            prop_assert!((*u as f64 - q).abs() < 1.0 + 1e-9, "unit {u} vs quota {q}");
        }
        // Exact agreement with an independent apportionment, away from remainder ties.
        let q: Vec<f64> = phi.iter().map(|p| p * 20.0).collect();
        let mut rems: Vec<f64> = q.iter().map(|x| x - x.floor()).collect();
        rems.sort_by(f64::total_cmp);
        let tied = rems.windows(2).any(|w| (w[1] - w[0]).abs() < 1e-9) || rems.iter().any(|r| *r < 1e-9 || *r > 1.0 - 1e-9);
        if !tied {
            prop_assert_eq!(units, hamilton(&phi, 20));
        }
        Ok(())
    }))
}

pub fn formulation(parts: &[(&str, f64)]) -> Formulation {
    Formulation::new(parts.iter().map(|(n, _)| n.to_string()).collect(), parts.iter().map(|(_, p)| *p).collect())
        .expect("valid formulation")
}
