use std::path::Path;

use serde_json::{json, Value};

use sds_core::planner::JsonlMemoryStore;
use sds_core::search::{run_search, SearchMode, SearchTrace, TraceEntry};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::parse::render_percent_list;
use crate::setup::{self, write_file, write_json};

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let started = chrono::Utc::now();
    let out = cfg.output_dir.as_path();
    setup::create_dir(out)?;
    let library = setup::library(cfg)?;
    let (target, protect) = setup::materials(cfg);
    let critic = setup::critic(cfg);
    let mut generator = setup::generator(cfg, &library, &target, &protect);

    let memory_path = match &cfg.planner.memory_path {
        Some(p) => p.clone(),
        None => {
            let p = out.join("memory.jsonl");
            if p.exists() {
                std::fs::remove_file(&p).map_err(|e| CliError::io(&format!("removing {}", p.display()), e))?;
            }
            p
        }
    };
    let mut memory = JsonlMemoryStore::open(&memory_path)
        .map_err(|e| CliError::input(format!("memory {}: {e}", memory_path.display())))?;

    let engine = cfg.engine();
    let (trace, failure) = match run_search(&library, &target, &protect, &mut generator, &critic, &mut memory, &engine) {
        Ok(t) => (t, None),
        Err(f) => {
            let msg = f.to_string();
            (f.trace, Some(msg))
        }
    };
    drop(memory);

    let files = write_outputs(&trace, cfg, out)?;
    let manifest = json!({
        "command": "search",
        "version": env!("CARGO_PKG_VERSION"),
        "started_at": started.to_rfc3339(),
        "finished_at": chrono::Utc::now().to_rfc3339(),
        "status": if failure.is_some() { "aborted" } else { "completed" },
        "error": failure,
        "library": { "source": library_source(cfg), "solvents": library.len() },
        "memory": memory_path,
        "files": files,
        "config": cfg,
    });
    write_json(&out.join("run_manifest.json"), &manifest)?;

    print_summary(&trace, cfg);
    println!("outputs: {}", out.display());
    match failure {
        None => Ok(()),
        Some(message) => Err(CliError::engine_with(
            message,
            json!({ "evaluations": trace.entries.len(), "output_dir": out }),
        )),
    }
}

pub fn library_source(cfg: &RunConfig) -> Value {
    match &cfg.library_path {
        Some(p) => json!(p),
        None => json!("bundled"),
    }
}

/// Writes every deterministic output and returns their file names.
fn write_outputs(trace: &SearchTrace, cfg: &RunConfig, out: &Path) -> Result<Vec<&'static str>, CliError> {
    let mut files = vec!["trace.jsonl", "tree_summary.json"];
    write_file(&out.join("trace.jsonl"), trace.to_jsonl())?;
    write_json(&out.join("tree_summary.json"), &trace.tree_summary())?;

    let diversity = match sds_core::metrics::compute_diversity(trace) {
        Ok(d) => json!(d),
        Err(_) => Value::Null,
    };
    write_json(&out.join("diversity.json"), &diversity)?;
    files.push("diversity.json");

    let best = trace.best_candidates(cfg.report.best_candidates);
    write_file(&out.join("best_candidates.txt"), render_best(&best))?;
    write_json(&out.join("best_candidates.json"), &best.iter().enumerate().map(|(i, e)| best_json(i + 1, e)).collect::<Vec<_>>())?;
    files.extend(["best_candidates.txt", "best_candidates.json"]);

    if trace.mode == SearchMode::Full {
        write_json(&out.join("plan.json"), &json!({ "final": trace.final_plan, "history": trace.plans }))?;
        files.push("plan.json");
    }
    files.extend(["memory.jsonl", "run_manifest.json"]);
    Ok(files)
}

fn best_json(rank: usize, e: &TraceEntry) -> Value {
    json!({
        "rank": rank,
        "iteration": e.iteration,
        "node": e.node,
        "topology": e.topology,
        "recipe": e.recipe.as_ref().map(render_percent_list),
        "formulation": e.recipe,
        "reward": e.reward,
        "report": e.report,
    })
}

pub fn render_best(best: &[&TraceEntry]) -> String {
    let mut s = format!(
        "{:>4} {:>5} {:>8} {:>8} {:>8} {:>8}  {}\n",
        "rank", "iter", "reward", "total", "RED_pre", "RED_post", "recipe"
    );
    for (i, e) in best.iter().enumerate() {
        let (pre, post, total) = e.report.as_ref().map_or((f64::NAN, f64::NAN, f64::NAN), |r| (r.red_pre, r.red_post, r.score_total));
        let recipe = e.recipe.as_ref().map(render_percent_list).unwrap_or_default();
        s.push_str(&format!(
            "{:>4} {:>5} {:>8.3} {:>8.3} {:>8.4} {:>8.4}  {recipe}\n",
            i + 1,
            e.iteration,
            e.reward,
            total,
            pre,
            post
        ));
    }
    if best.is_empty() {
        s.push_str("(no candidate passed discretization and physical validity)\n");
    }
    s
}

fn print_summary(trace: &SearchTrace, cfg: &RunConfig) {
    let surfaced = trace.entries.iter().filter(|e| e.surfaced()).count();
    println!(
        "run {}: {} evaluation(s), {} surfaced, mode {}",
        trace.run_id,
        trace.entries.len(),
        surfaced,
        trace.mode
    );
    match trace.best_entry() {
        Some(e) => println!(
            "best: iteration {}, reward {:.3}, {}",
            e.iteration,
            e.reward,
            e.recipe.as_ref().map(render_percent_list).unwrap_or_default()
        ),
        None => println!("best: none"),
    }
    let best = trace.best_candidates(cfg.report.best_candidates);
    if !best.is_empty() {
        print!("{}", render_best(&best));
    }
}
