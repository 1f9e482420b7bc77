use serde_json::json;

use sds_core::critic::Verdict;
use sds_core::search::evaluate_candidate;

use super::score::render_report;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::parse::{parse_topology, render_percent_list};
use crate::setup;

pub fn run(cfg: &RunConfig, topology: &str, as_json: bool) -> Result<(), CliError> {
    let library = setup::library(cfg)?;
    let (target, protect) = setup::materials(cfg);
    let critic = setup::critic(cfg);
    let names = parse_topology(topology, &library)?;
    let eval = evaluate_candidate(
        &names,
        &library,
        &target,
        &protect,
        &critic,
        &cfg.loss,
        &cfg.optimizer,
        &cfg.simplify,
        cfg.search.failure_floor,
    )
    .map_err(|e| CliError::engine(e.to_string()))?;
    let recipe = eval.formulation.as_ref().map(render_percent_list);

    if as_json {
        let v = json!({ "topology": names, "recipe": recipe, "evaluation": eval });
        println!("{}", serde_json::to_string_pretty(&v).expect("evaluation serializes"));
        return Ok(());
    }

    println!("topology: {}", names.join(", "));
    println!("continuous:");
    for (n, p) in eval.continuous.iter() {
        println!("  {n:<32} {p:.6}");
    }
    let b = &eval.loss_breakdown;
    println!("loss: {:.6}", eval.final_loss);
    for (k, v) in [
        ("ratio", b.ratio),
        ("diff", b.diff),
        ("penalty", b.penalty),
        ("swelling", b.swelling),
        ("kinetics", b.kinetics),
        ("entropy", b.entropy),
    ] {
        println!("  {k:<10} {v:.6}");
    }
    match &eval.formulation {
        Some(f) => {
            println!("discretized:");
            for (n, p) in f.iter() {
                println!("  {n:<32} {:>3.0}%", p * 100.0);
            }
            println!("recipe: {}", recipe.unwrap_or_default());
        }
        None => println!("discretized: none"),
    }
    if let Some(msg) = &eval.failure {
        println!("failure: {msg}");
    }
    println!("pv_pass: {}", eval.pv_pass);
    println!("reward: {:.4}", eval.reward);
    match &eval.report {
        Some(r) => print!("{}", render_report(r)),
        None => print!("{}", render_verdicts(&eval.verdicts)),
    }
    Ok(())
}

pub fn render_verdicts(verdicts: &[Verdict]) -> String {
    let mut s = String::from("verdicts:\n");
    for v in verdicts {
        let status = serde_json::to_value(v.status).ok().and_then(|s| s.as_str().map(String::from)).unwrap_or_default();
        s.push_str(&format!(
            "  {:<17} {:<14} {:<4} {}\n",
            v.check.as_str(),
            status,
            if v.hard { "hard" } else { "soft" },
            v.detail
        ));
    }
    s
}
