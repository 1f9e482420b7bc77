//! Engineering discretization of an optimized recipe.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LossConfig, OptimizedRecipe};
use crate::hsp::{self, MaterialTarget};
use crate::library::{Formulation, LibraryError, SolventLibrary, MAX_COMPONENTS, MIN_COMPONENTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplifyConfig {
    /// Rounding step in whole percent.
    pub increment_pct: u32,
    /// Components below this fraction are pruned.
    pub prune_below: f64,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        Self { increment_pct: 5, prune_below: 0.05 }
    }
}

impl SimplifyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.increment_pct == 0 || 100 % self.increment_pct != 0 {
            return Err(format!("increment_pct must divide 100, got {}", self.increment_pct));
        }
        if !(0.0..1.0).contains(&self.prune_below) {
            return Err(format!("prune_below must lie in [0, 1), got {}", self.prune_below));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimplifyError {
    #[error("discretization infeasible: {0}")]
    DiscretizationInfeasible(String),
    #[error("hard constraints violated after discretization: {}", failed.join("; "))]
    HardConstraintViolation { failed: Vec<String>, formulation: Formulation },
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("invalid simplify config: {0}")]
    InvalidConfig(String),
}

/// Prune, renormalize, round to `increment_pct` with largest-remainder
/// correction, then re-check the hard constraints on the rounded recipe.
pub fn simplify_recipe(
    recipe: &OptimizedRecipe,
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
    loss_cfg: &LossConfig,
    cfg: &SimplifyConfig,
) -> Result<Formulation, SimplifyError> {
    let formulation = discretize(&recipe.formulation, cfg)?;
    let failed = hard_constraint_failures(&formulation, library, target, protect, loss_cfg, cfg)?;
    if failed.is_empty() {
        Ok(formulation)
    } else {
        Err(SimplifyError::HardConstraintViolation { failed, formulation })
    }
}

/// Steps 1–3 of simplification: the pure arithmetic part.
pub fn discretize(formulation: &Formulation, cfg: &SimplifyConfig) -> Result<Formulation, SimplifyError> {
    cfg.validate().map_err(SimplifyError::InvalidConfig)?;
    formulation.validate_simplex()?;

    let kept: Vec<(String, f64)> = formulation
        .iter()
        .filter(|(_, phi)| *phi >= cfg.prune_below)
        .map(|(n, phi)| (n.to_string(), phi))
        .collect();
    if kept.len() < MIN_COMPONENTS || kept.len() > MAX_COMPONENTS {
        return Err(SimplifyError::DiscretizationInfeasible(format!(
            "{} component(s) remain after pruning below {}; need {MIN_COMPONENTS}..={MAX_COMPONENTS}",
            kept.len(),
            cfg.prune_below
        )));
    }
    let total: f64 = kept.iter().map(|(_, p)| p).sum();
    let units_total = (100 / cfg.increment_pct) as u64;

    // Largest-remainder apportionment of `units_total` increments.
    let quotas: Vec<f64> = kept
        .iter()
        .map(|(_, p)| {
            let q = p / total * units_total as f64;
            let r = q.round();
            if (q - r).abs() < 1e-9 {
                r
            } else {
                q
            }
        })
        .collect();
    let mut units: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = units.iter().sum();
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take((units_total - assigned) as usize) {
        units[i] += 1;
    }

    let mut components = Vec::with_capacity(kept.len());
    let mut fractions = Vec::with_capacity(kept.len());
    for ((name, _), u) in kept.into_iter().zip(units) {
        let pct = u * u64::from(cfg.increment_pct);
        let phi = pct as f64 / 100.0;
        if u == 0 || phi < cfg.prune_below {
            return Err(SimplifyError::DiscretizationInfeasible(format!(
                "{name} rounds to {pct}%, below the {:.0}% floor",
                cfg.prune_below * 100.0
            )));
        }
        components.push(name);
        fractions.push(phi);
    }
    Ok(Formulation::new(components, fractions)?)
}

fn hard_constraint_failures(
    f: &Formulation,
    library: &SolventLibrary,
    target: &MaterialTarget,
    protect: &MaterialTarget,
    loss_cfg: &LossConfig,
    cfg: &SimplifyConfig,
) -> Result<Vec<String>, SimplifyError> {
    let mix = crate::library::mix_hsp(f, library)?;
    let red_t = hsp::red(&mix, target);
    let red_p = hsp::red(&mix, protect);
    let mut failed = Vec::new();
    if !(red_t < loss_cfg.red_target_max) {
        failed.push(format!("RED_target {red_t:.4} >= {}", loss_cfg.red_target_max));
    }
    if !(red_p >= loss_cfg.red_protect_min) {
        failed.push(format!("RED_protect {red_p:.4} < {}", loss_cfg.red_protect_min));
    }
    if !f.check_sparsity() {
        failed.push(format!("{} components outside {MIN_COMPONENTS}..={MAX_COMPONENTS}", f.len()));
    }
    if let Some((n, phi)) = f.iter().find(|(_, phi)| *phi < cfg.prune_below) {
        failed.push(format!("{n} at {:.1}% is below the fraction floor", phi * 100.0));
    }
    Ok(failed)
}
