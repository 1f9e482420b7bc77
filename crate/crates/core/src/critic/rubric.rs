//! Deterministic formulation rubric, 0–10 points.
//!
//! Physical dimension (0/3/5) from the RED pair, engineering dimension
//! (5 minus deductions, floored at 0) from safety class, trace fractions and
//! boiling-point spread.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::validity::boiling_spread;
use crate::library::{Formulation, LibraryError, SafetyClass, SolventLibrary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RubricConfig {
    /// Excellent physical rating needs RED_pre below this ...
    pub excellent_red_pre: f64,
    /// ... and RED_post above this.
    pub excellent_red_post: f64,
    /// RED_pre above this rates 0.
    pub fail_red_pre: f64,
    pub fraction_floor: f64,
    pub bp_spread_min: f64,
}

impl Default for RubricConfig {
    fn default() -> Self {
        Self { excellent_red_pre: 0.73, excellent_red_post: 1.1, fail_red_pre: 1.0, fraction_floor: 0.05, bp_spread_min: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricEntry {
    pub item: String,
    /// Points awarded (positive) or deducted (negative); 0 for notes.
    pub points: i32,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricResult {
    pub physical: u32,
    pub engineering: u32,
    pub points: u32,
    pub ledger: Vec<RubricEntry>,
    /// Names of warn-class components, for yellow warnings.
    pub warn_solvents: Vec<String>,
}

pub fn rubric_score(
    formulation: &Formulation,
    red_pre: f64,
    red_post: f64,
    library: &SolventLibrary,
    cfg: &RubricConfig,
) -> Result<RubricResult, LibraryError> {
    let mut ledger = Vec::new();

    let physical = if red_pre < cfg.excellent_red_pre && red_post > cfg.excellent_red_post {
        5
    } else if red_pre > cfg.fail_red_pre {
        0
    } else {
        3
    };
    ledger.push(RubricEntry {
        item: "physical".into(),
        points: physical,
        detail: format!("RED_pre {red_pre:.3}, RED_post {red_post:.3}"),
    });

    let mut engineering: i32 = 5;
    let mut warn = BTreeSet::new();
    for name in &formulation.components {
        if library.require(name)?.safety_class == SafetyClass::Warn {
            warn.insert(name.clone());
        }
    }
    for name in &warn {
        engineering -= 1;
        ledger.push(RubricEntry { item: "toxic solvent".into(), points: -1, detail: format!("{name} is warn-class") });
    }
    if let Some((name, phi)) = formulation.iter().find(|(_, p)| *p < cfg.fraction_floor) {
        engineering -= 1;
        ledger.push(RubricEntry {
            item: "pseudo-mixture".into(),
            points: -1,
            detail: format!("{name} at {:.1}%", phi * 100.0),
        });
    }
    match boiling_spread(formulation, library)? {
        Some(spread) if spread < cfg.bp_spread_min => {
            engineering -= 1;
            ledger.push(RubricEntry {
                item: "no boiling-point gradient".into(),
                points: -1,
                detail: format!("spread {spread:.0} °C < {} °C", cfg.bp_spread_min),
            });
        }
        Some(_) => {}
        None => ledger.push(RubricEntry {
            item: "boiling-point gradient".into(),
            points: 0,
            detail: "not evaluable: boiling point missing".into(),
        }),
    }
    let engineering = engineering.max(0) as u32;
    let physical = physical as u32;

    Ok(RubricResult {
        physical,
        engineering,
        points: physical + engineering,
        ledger,
        warn_solvents: warn.into_iter().collect(),
    })
}
