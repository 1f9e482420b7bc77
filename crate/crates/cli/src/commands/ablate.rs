use serde_json::json;

use sds_core::metrics::{mean_summary, render_mean_summary, run_ablation, AblationTable, MetricsError};
use sds_core::search::{SearchMode, SearchTrace};

use super::search::library_source;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::setup::{self, write_file, write_json};

pub fn parse_modes(s: &str) -> Result<Vec<SearchMode>, CliError> {
    let modes: Vec<SearchMode> = s
        .split(',')
        .map(|m| m.parse::<SearchMode>().map_err(|e| CliError::input(format!("--modes: {e}"))))
        .collect::<Result<_, _>>()?;
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].contains(m) {
            return Err(CliError::input(format!("--modes: {m} listed twice")));
        }
    }
    Ok(modes)
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let seeds: Vec<u64> = s
        .split(',')
        .map(|x| x.trim().parse::<u64>().map_err(|_| CliError::input(format!("--seeds: {x:?} is not a non-negative integer"))))
        .collect::<Result<_, _>>()?;
    for (i, v) in seeds.iter().enumerate() {
        if seeds[..i].contains(v) {
            return Err(CliError::input(format!("--seeds: {v} listed twice")));
        }
    }
    Ok(seeds)
}

pub fn run(cfg: &RunConfig, modes: &[SearchMode], seeds: &[u64]) -> Result<(), CliError> {
    let started = chrono::Utc::now();
    let out = cfg.output_dir.as_path();
    setup::create_dir(out)?;
    let library = setup::library(cfg)?;
    let (target, protect) = setup::materials(cfg);
    let critic = setup::critic(cfg);

    // One search per (seed, mode); seeds run concurrently, modes within a seed in order.
    let results: Vec<(u64, Result<(AblationTable, Vec<SearchTrace>), MetricsError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let mut engine = cfg.engine();
                engine.search.seed = seed;
                let (library, target, protect, critic) = (&library, &target, &protect, &critic);
                scope.spawn(move || {
                    let make = || setup::generator(cfg, library, target, protect);
                    (seed, run_ablation(library, target, protect, make, critic, &engine, modes))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("ablation worker panicked")).collect()
    });

    let mut tables = Vec::with_capacity(results.len());
    for (seed, r) in results {
        let (table, traces) = r.map_err(|e| CliError::engine_with(e.to_string(), json!({ "seed": seed })))?;
        let dir = out.join(format!("seed-{seed}"));
        setup::create_dir(&dir)?;
        write_file(&dir.join("ablation.txt"), table.render_text())?;
        write_file(&dir.join("ablation.csv"), table.render_csv())?;
        write_json(&dir.join("ablation.json"), &table)?;
        for t in &traces {
            write_file(&dir.join(format!("trace-{}.jsonl", t.mode)), t.to_jsonl())?;
        }
        print!("{}", table.render_text());
        println!();
        tables.push(table);
    }

    let mean = mean_summary(&tables);
    write_file(&out.join("summary.txt"), render_mean_summary(&mean))?;
    write_json(&out.join("summary.json"), &mean)?;
    if tables.len() > 1 {
        println!("mean over {} seeds", tables.len());
        print!("{}", render_mean_summary(&mean));
    }
    let manifest = json!({
        "command": "ablate",
        "version": env!("CARGO_PKG_VERSION"),
        "started_at": started.to_rfc3339(),
        "finished_at": chrono::Utc::now().to_rfc3339(),
        "modes": modes,
        "seeds": seeds,
        "library": { "source": library_source(cfg), "solvents": library.len() },
        "config": cfg,
    });
    write_json(&out.join("run_manifest.json"), &manifest)?;
    println!("outputs: {}", out.display());
    Ok(())
}
