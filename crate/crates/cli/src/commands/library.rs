use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use sds_core::library::Role;
use sds_core::{HspAxis, SafetyClass, SolventLibrary};

use crate::error::CliError;
use crate::setup;

pub fn validate(path: Option<&Path>, prohibited: &[String]) -> Result<(), CliError> {
    let lib = setup::load_library(path, prohibited)?;
    let count = |c: SafetyClass| lib.iter().filter(|s| s.safety_class == c).count();
    println!(
        "ok: {} solvents ({} prohibited, {} warn) in {}",
        lib.len(),
        count(SafetyClass::Prohibited),
        count(SafetyClass::Warn),
        path.map_or("bundled library".to_string(), |p| p.display().to_string())
    );
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Serialize)]
pub struct LibraryStats {
    pub solvents: usize,
    pub by_safety_class: BTreeMap<SafetyClass, usize>,
    pub by_role: BTreeMap<Role, usize>,
    pub hsp_ranges: BTreeMap<&'static str, Range>,
    pub missing: BTreeMap<&'static str, usize>,
}

pub fn stats_of(lib: &SolventLibrary) -> LibraryStats {
    let mut by_safety_class = BTreeMap::new();
    for c in [SafetyClass::Allowed, SafetyClass::Warn, SafetyClass::Prohibited] {
        by_safety_class.insert(c, lib.iter().filter(|s| s.safety_class == c).count());
    }
    let by_role = Role::ALL.iter().map(|&r| (r, lib.iter().filter(|s| s.has_role(r)).count())).collect();
    let mut hsp_ranges = BTreeMap::new();
    for (key, axis) in [("delta_d", HspAxis::Dispersion), ("delta_p", HspAxis::Polar), ("delta_h", HspAxis::Hydrogen)] {
        let vals = lib.iter().map(|s| s.hsp.axis(axis));
        let (min, max) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if min <= max {
            hsp_ranges.insert(key, Range { min, max });
        }
    }
    let mut missing = BTreeMap::new();
    missing.insert("smiles", lib.iter().filter(|s| s.smiles.is_none()).count());
    missing.insert("molar_volume", lib.iter().filter(|s| s.molar_volume.is_none()).count());
    missing.insert("boiling_point", lib.iter().filter(|s| s.boiling_point.is_none()).count());
    missing.insert("flash_point", lib.iter().filter(|s| s.flash_point.is_none()).count());
    missing.insert("roles", lib.iter().filter(|s| s.role_tags.is_empty()).count());
    LibraryStats { solvents: lib.len(), by_safety_class, by_role, hsp_ranges, missing }
}

pub fn stats(path: Option<&Path>, prohibited: &[String], as_json: bool) -> Result<(), CliError> {
    let lib = setup::load_library(path, prohibited)?;
    let st = stats_of(&lib);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&st).expect("stats serialize"));
        return Ok(());
    }
    println!("solvents: {}", st.solvents);
    println!("safety classes:");
    for (c, n) in &st.by_safety_class {
        println!("  {:<12} {n}", serde_json::to_value(c).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
    }
    println!("roles:");
    for (r, n) in &st.by_role {
        println!("  {:<15} {n}", r.as_str());
    }
    println!("HSP ranges (MPa^0.5):");
    for (k, r) in &st.hsp_ranges {
        println!("  {k:<8} {:>6.2} .. {:>6.2}", r.min, r.max);
    }
    println!("missing fields:");
    for (k, n) in &st.missing {
        println!("  {k:<14} {n}");
    }
    Ok(())
}
