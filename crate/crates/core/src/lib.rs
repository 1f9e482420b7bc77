//! Solvent-formulation discovery: HSP geometry, simplex ratio optimization,
//! tree search over component sets, scoring, planning and diversity metrics.

pub mod chat;
pub mod critic;
pub mod hsp;
pub mod library;
pub mod metrics;
pub mod planner;
pub mod prompts;
pub mod proposal;
pub mod ratio;
pub mod search;
pub mod seed;

pub use hsp::{hsp_distance, red, HspAxis, HspError, HspVector, MaterialTarget};
pub use library::{mix_hsp, Formulation, LibraryError, Role, SafetyClass, Solvent, SolventLibrary};
