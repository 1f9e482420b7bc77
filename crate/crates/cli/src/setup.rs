//! Turning a [`RunConfig`] into engine collaborators.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use sds_core::critic::{Critic, QualitativeBackend, RemoteCritic};
use sds_core::proposal::{HeuristicGenerator, RemoteGenerator, TopologyGenerator};
use sds_core::{LibraryError, MaterialTarget, SolventLibrary};

use crate::config::{GeneratorKind, RunConfig};
use crate::error::CliError;

pub fn library_error(source: &str, e: LibraryError) -> CliError {
    let row = match &e {
        LibraryError::Parse { row, .. } | LibraryError::DuplicateName { row, .. } | LibraryError::InvalidHsp { row, .. } => {
            Some(*row)
        }
        _ => None,
    };
    CliError::input_with(format!("{source}: {e}"), json!({ "source": source, "row": row }))
}

/// Loads `path` (or the bundled table) with the configured prohibited list.
pub fn load_library(path: Option<&Path>, prohibited: &[String]) -> Result<SolventLibrary, CliError> {
    let prohibited: Vec<&str> = prohibited.iter().map(String::as_str).collect();
    match path {
        Some(p) => SolventLibrary::load(p, &prohibited).map_err(|e| library_error(&p.display().to_string(), e)),
        None => SolventLibrary::from_csv_reader(SolventLibrary::shipped_csv().as_bytes(), &prohibited)
            .map_err(|e| library_error("bundled library", e)),
    }
}

pub fn library(cfg: &RunConfig) -> Result<SolventLibrary, CliError> {
    let full = load_library(cfg.library_path.as_deref(), &cfg.prohibited)?;
    match &cfg.library_subset {
        None => Ok(full),
        Some(names) => full.subset(names).map_err(|e| match e {
            LibraryError::UnknownSolvent(n) => CliError::config("library_subset", format!("unknown solvent {n:?}")),
            other => CliError::config("library_subset", other.to_string()),
        }),
    }
}

pub fn materials(cfg: &RunConfig) -> (MaterialTarget, MaterialTarget) {
    (cfg.target.to_target(), cfg.protect.to_target())
}

pub fn critic(cfg: &RunConfig) -> Critic {
    match cfg.critic.backend {
        QualitativeBackend::Rubric => Critic::new(cfg.critic.clone()),
        QualitativeBackend::Remote => {
            Critic::with_backend(cfg.critic.clone(), Box::new(RemoteCritic::new(cfg.endpoint.clone())))
        }
    }
}

pub fn generator<'a>(
    cfg: &RunConfig,
    library: &'a SolventLibrary,
    target: &'a MaterialTarget,
    protect: &'a MaterialTarget,
) -> Box<dyn TopologyGenerator + 'a> {
    match cfg.generator.kind {
        GeneratorKind::Heuristic => {
            Box::new(HeuristicGenerator::new(library, target, protect, cfg.generator.heuristic.clone()))
        }
        GeneratorKind::Remote => Box::new(RemoteGenerator::new(cfg.endpoint.clone(), library, target, protect)),
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(&format!("writing {}", path.display()), e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    write_file(path, s)
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(&format!("creating {}", path.display()), e))
}
