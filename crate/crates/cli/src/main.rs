//! `sds`: solvent formulation search from the command line.
//!
//! Exit codes: 0 success, 2 usage, config or input error, 3 engine error.
//! Every error is also written to stderr as one JSON object.

mod commands;
mod config;
mod error;
mod parse;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_assignment, RunConfig};
use error::CliError;
use sds_core::search::SearchMode;

#[derive(Debug, Parser)]
#[command(name = "sds", version, about = "Solvent formulation search over Hansen solubility space")]
struct Cli {
    /// Run configuration (TOML). Defaults apply to anything it leaves out.
    #[arg(short, long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set search.max_iterations=30`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_assignment)]
    overrides: Vec<(String, String)>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunFlags {
    /// Iteration budget T (`search.max_iterations`).
    #[arg(short = 'T', long)]
    iterations: Option<usize>,
    /// Children per node K (`search.max_children`).
    #[arg(short = 'K', long)]
    children: Option<usize>,
    /// Planner strategy (`planner.strategy`).
    #[arg(long)]
    strategy: Option<String>,
    /// `heuristic` or `remote` (`generator.kind`).
    #[arg(long)]
    generator: Option<String>,
    /// Output directory (`output_dir`).
    #[arg(short, long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one tree search and write the trace and reports.
    Search {
        /// `naive`, `sibling_aware` or `full` (`search.mode`).
        #[arg(long)]
        mode: Option<String>,
        /// Root seed (`search.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Memory file to read and append to (`planner.memory_path`).
        #[arg(long, value_name = "PATH")]
        memory: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Optimize ratios for one topology, then discretize and score it.
    Optimize {
        /// Comma-separated solvent names, e.g. "Ethyl lactate,PGMEA".
        #[arg(long)]
        topology: String,
        #[arg(long)]
        json: bool,
    },
    /// Score a fixed formulation.
    Score {
        /// `name:pct,name:pct,...`; percentages sum to 100 ± 0.5.
        #[arg(long)]
        formulation: String,
        /// Print the report as one JSON line.
        #[arg(long)]
        json: bool,
    },
    /// Compare search modes under the same budget and seed.
    Ablate {
        /// Comma-separated modes, first one is the baseline for deltas.
        #[arg(long, default_value = "naive,sibling_aware,full")]
        modes: String,
        /// Comma-separated seeds; each runs in its own `seed-<s>/` directory.
        #[arg(long)]
        seeds: Option<String>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Check or summarize a library CSV.
    Library {
        #[command(subcommand)]
        action: LibraryAction,
    },
    /// Print every config key with its default.
    ConfigReference,
}

#[derive(Debug, Subcommand)]
enum LibraryAction {
    /// Report the first schema error with its row number.
    Validate {
        /// Library CSV; defaults to `library_path` or the bundled table.
        path: Option<PathBuf>,
    },
    /// Counts by safety class and role, HSP ranges and missing-field tallies.
    Stats {
        path: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

impl RunFlags {
    fn push(&self, o: &mut Vec<(String, String)>) {
        if let Some(t) = self.iterations {
            o.push(("search.max_iterations".into(), t.to_string()));
        }
        if let Some(k) = self.children {
            o.push(("search.max_children".into(), k.to_string()));
        }
        if let Some(s) = &self.strategy {
            o.push(("planner.strategy".into(), toml_string(s)));
        }
        if let Some(g) = &self.generator {
            o.push(("generator.kind".into(), toml_string(g)));
        }
        if let Some(d) = &self.output_dir {
            o.push(("output_dir".into(), toml_string(&d.to_string_lossy())));
        }
    }
}

fn load(cli: &Cli, extra: Vec<(String, String)>) -> Result<RunConfig, CliError> {
    let mut overrides = cli.overrides.clone();
    overrides.extend(extra);
    RunConfig::load(cli.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Search { mode, seed, memory, run } => {
            let mut o = Vec::new();
            if let Some(m) = mode {
                o.push(("search.mode".into(), toml_string(m)));
            }
            if let Some(s) = seed {
                o.push(("search.seed".into(), s.to_string()));
            }
            if let Some(p) = memory {
                o.push(("planner.memory_path".into(), toml_string(&p.to_string_lossy())));
            }
            run.push(&mut o);
            commands::search::run(&load(&cli, o)?)
        }
        Command::Optimize { topology, json } => commands::optimize::run(&load(&cli, Vec::new())?, topology, *json),
        Command::Score { formulation, json } => commands::score::run(&load(&cli, Vec::new())?, formulation, *json),
        Command::Ablate { modes, seeds, run } => {
            let mut o = Vec::new();
            run.push(&mut o);
            let cfg = load(&cli, o)?;
            let modes: Vec<SearchMode> = commands::ablate::parse_modes(modes)?;
            let seeds = match seeds {
                Some(s) => commands::ablate::parse_seeds(s)?,
                None => vec![cfg.search.seed],
            };
            commands::ablate::run(&cfg, &modes, &seeds)
        }
        Command::Library { action } => {
            let cfg = load(&cli, Vec::new())?;
            match action {
                LibraryAction::Validate { path } => {
                    commands::library::validate(path.as_deref().or(cfg.library_path.as_deref()), &cfg.prohibited)
                }
                LibraryAction::Stats { path, json } => {
                    commands::library::stats(path.as_deref().or(cfg.library_path.as_deref()), &cfg.prohibited, *json)
                }
            }
        }
        Command::ConfigReference => {
            print!("{}", config::reference());
            Ok(())
        }
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    std::panic::set_hook(Box::new(|_| {}));
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => report(&e),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal error".into());
            if msg.contains("Broken pipe") {
                // stdout closed early, e.g. piped into `head`
                return ExitCode::SUCCESS;
            }
            report(&CliError::engine(format!("internal error: {msg}")))
        }
    }
}
