use sds_core::critic::EvaluationReport;

use super::optimize::render_verdicts;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::parse::parse_percent_list;
use crate::setup;

pub fn run(cfg: &RunConfig, formulation: &str, as_json: bool) -> Result<(), CliError> {
    let library = setup::library(cfg)?;
    let (target, protect) = setup::materials(cfg);
    let critic = setup::critic(cfg);
    let f = parse_percent_list(formulation, &library)?.to_formulation()?;
    let report = critic.hybrid_score(&f, &library, &target, &protect).map_err(|e| CliError::input(e.to_string()))?;
    if as_json {
        // Same encoding as the report field of a trace line.
        println!("{}", serde_json::to_string(&report).expect("report serializes"));
    } else {
        println!("formulation:");
        for (n, p) in f.iter() {
            println!("  {n:<32} {p:.4}");
        }
        print!("{}", render_report(&report));
    }
    Ok(())
}

/// One labelled line (or block) per report field, labels equal to the JSON keys.
pub fn render_report(r: &EvaluationReport) -> String {
    let mut s = String::new();
    for (k, v) in [
        ("red_pre", r.red_pre),
        ("red_post", r.red_post),
        ("score_pre", r.score_pre),
        ("score_post", r.score_post),
        ("score_physics", r.score_physics),
        ("rubric_points", r.rubric_points),
    ] {
        s.push_str(&format!("{k}: {v}\n"));
    }
    let rb = &r.rubric;
    s.push_str(&format!("rubric: physical {} + engineering {} = {} points\n", rb.physical, rb.engineering, rb.points));
    for e in &rb.ledger {
        s.push_str(&format!("  {:+} {:<22} {}\n", e.points, e.item, e.detail));
    }
    if !rb.warn_solvents.is_empty() {
        s.push_str(&format!("  warn solvents: {}\n", rb.warn_solvents.join(", ")));
    }
    s.push_str(&format!("qualitative_source: {}\n", r.qualitative_source));
    s.push_str(&format!("score_qualitative: {}\n", r.score_qualitative));
    s.push_str(&format!("score_total: {}\n", r.score_total));
    s.push_str(&format!("pv_pass: {}\n", r.pv_pass));
    s.push_str(&render_verdicts(&r.verdicts));
    s.push_str("warnings:\n");
    for w in &r.warnings {
        s.push_str(&format!("  {w}\n"));
    }
    s.push_str("events:\n");
    for e in &r.events {
        s.push_str(&format!("  {e}\n"));
    }
    s
}
