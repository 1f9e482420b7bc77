//! Deterministic HSP-geometry generator.
//!
//! Solvents are scored by closeness to the target plus how far they sit from
//! the protected layer along the axis where target and protected layer differ
//! most:
//!
//! ```text
//! axis   = argmax(2|Δd|, |Δp|, |Δh|)         Δ = protect − target
//! sep_i  = clamp(−sign(Δ_axis) · (δ_i,axis − protect_axis) / R0_protect, −1, 1)
//! score  = 1 / (1 + Ra(δ_i, target)) + w_sep · sep_i
//!          + exploration_bonus  (solvent listed as an exploration vector)
//!          − usage_penalty · usage_i / max usage
//! ```
//!
//! Hosts are tried in score order (those whose own RED to the target is within
//! the directive's host limit first), leverage solvents in `sep` order, and a
//! modifier is added when the pair lacks a boiling-point gradient.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ComponentRole, GenerationContext, ProposalError, TopologyGenerator, TopologyProposal};
use crate::hsp::{self, HspAxis, MaterialTarget};
use crate::library::{Solvent, SolventLibrary, MAX_COMPONENTS, MIN_COMPONENTS};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    pub separation_weight: f64,
    pub exploration_bonus: f64,
    pub usage_penalty: f64,
    /// Largest topology the generator assembles (2 or 3 in practice).
    pub max_components: usize,
    /// A pair whose boiling points span less than this gets a modifier.
    pub modifier_bp_spread: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            separation_weight: 0.5,
            exploration_bonus: 0.1,
            usage_penalty: 0.3,
            max_components: 3,
            modifier_bp_spread: 30.0,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(MIN_COMPONENTS..=MAX_COMPONENTS).contains(&self.max_components) {
            return Err(format!("max_components must lie in {MIN_COMPONENTS}..={MAX_COMPONENTS}"));
        }
        for (k, v) in [
            ("separation_weight", self.separation_weight),
            ("exploration_bonus", self.exploration_bonus),
            ("usage_penalty", self.usage_penalty),
            ("modifier_bp_spread", self.modifier_bp_spread),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{k} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RankedSolvent {
    pub index: usize,
    pub ra_target: f64,
    pub red_target: f64,
    pub separation: f64,
    pub score: f64,
    tiekey: u64,
}

pub struct HeuristicGenerator<'a> {
    library: &'a SolventLibrary,
    target: &'a MaterialTarget,
    protect: &'a MaterialTarget,
    cfg: HeuristicConfig,
}

/// Dominant separation axis between two materials (dispersion weighted ×2).
pub fn separation_axis(target: &MaterialTarget, protect: &MaterialTarget) -> (HspAxis, f64) {
    let d = [
        protect.hsp.delta_d - target.hsp.delta_d,
        protect.hsp.delta_p - target.hsp.delta_p,
        protect.hsp.delta_h - target.hsp.delta_h,
    ];
    let weighted = [2.0 * d[0].abs(), d[1].abs(), d[2].abs()];
    let mut best = 0;
    for i in 1..3 {
        if weighted[i] > weighted[best] {
            best = i;
        }
    }
    let axis = [HspAxis::Dispersion, HspAxis::Polar, HspAxis::Hydrogen][best];
    (axis, d[best])
}

fn bp_spread<'s>(members: impl IntoIterator<Item = &'s Solvent>) -> Option<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in members {
        let bp = s.boiling_point?;
        lo = lo.min(bp);
        hi = hi.max(bp);
    }
    Some(hi - lo)
}

impl<'a> HeuristicGenerator<'a> {
    pub fn new(
        library: &'a SolventLibrary,
        target: &'a MaterialTarget,
        protect: &'a MaterialTarget,
        cfg: HeuristicConfig,
    ) -> Self {
        Self { library, target, protect, cfg }
    }

    /// Scores every eligible solvent. Order follows the library.
    pub fn rank(&self, ctx: &GenerationContext, seed: u64) -> Vec<RankedSolvent> {
        let d = &ctx.directives;
        let (axis, diff) = separation_axis(self.target, self.protect);
        let away = if diff > 0.0 { -1.0 } else { 1.0 };
        let max_usage = d.usage.values().copied().max().unwrap_or(0);
        let mut rng = seed::rng(seed);
        self.library
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_prohibited() && !d.excluded_solvents.contains(&s.name))
            .map(|(index, s)| {
                let ra = hsp::hsp_distance(&s.hsp, &self.target.hsp);
                let sep = (away * (s.hsp.axis(axis) - self.protect.hsp.axis(axis)) / self.protect.interaction_radius)
                    .clamp(-1.0, 1.0);
                let mut score = 1.0 / (1.0 + ra) + self.cfg.separation_weight * sep;
                if d.exploration_solvents.contains(&s.name) {
                    score += self.cfg.exploration_bonus;
                }
                if max_usage > 0 {
                    let u = d.usage.get(&s.name).copied().unwrap_or(0);
                    score -= self.cfg.usage_penalty * u as f64 / max_usage as f64;
                }
                RankedSolvent {
                    index,
                    ra_target: ra,
                    red_target: ra / self.target.interaction_radius,
                    separation: sep,
                    score,
                    tiekey: rng.random(),
                }
            })
            .collect()
    }

    fn feasible(&self, ctx: &GenerationContext, members: &[usize]) -> bool {
        let d = &ctx.directives;
        let solvents: Vec<&Solvent> = members.iter().map(|&i| &self.library.solvents()[i]).collect();
        if let Some(min) = d.min_bp_spread {
            if let Some(s) = bp_spread(solvents.iter().copied()) {
                if s < min {
                    return false;
                }
            }
        }
        if let Some(min) = d.min_red_post {
            let hs: Vec<_> = solvents.iter().map(|s| s.hsp).collect();
            let w = vec![1.0 / hs.len() as f64; hs.len()];
            if hsp::red(&hsp::mix_vectors(&hs, &w), self.protect) < min {
                return false;
            }
        }
        true
    }

    pub fn generate(&self, ctx: &GenerationContext, seed: u64) -> Result<TopologyProposal, ProposalError> {
        let ranked = self.rank(ctx, seed);
        if ranked.len() < 2 {
            return Err(ProposalError::NoFeasibleProposal(format!(
                "{} eligible solvent(s) after exclusions",
                ranked.len()
            )));
        }
        let limit = ctx.directives.host_red_limit;
        let mut hosts: Vec<&RankedSolvent> = ranked.iter().collect();
        hosts.sort_by(|a, b| {
            (a.red_target > limit)
                .cmp(&(b.red_target > limit))
                .then(b.score.total_cmp(&a.score))
                .then(a.tiekey.cmp(&b.tiekey))
        });
        let mut levers: Vec<&RankedSolvent> = ranked.iter().collect();
        levers.sort_by(|a, b| {
            b.separation.total_cmp(&a.separation).then(b.score.total_cmp(&a.score)).then(a.tiekey.cmp(&b.tiekey))
        });
        let host_rank: Vec<usize> = {
            let mut r = vec![usize::MAX; self.library.len()];
            for (k, h) in hosts.iter().enumerate() {
                r[h.index] = k;
            }
            r
        };

        let names = |members: &[usize]| -> BTreeSet<String> {
            members.iter().map(|&i| self.library.solvents()[i].name.clone()).collect()
        };
        let mut blocked: BTreeSet<BTreeSet<String>> = BTreeSet::new();
        if let Some(nc) = &ctx.negative_constraints {
            blocked.extend(nc.iter().map(|c| c.topology.iter().cloned().collect()));
            blocked.extend(ctx.path_summaries.iter().map(|p| p.topology.iter().cloned().collect()));
        }
        blocked.extend(ctx.directives.kill_topologies.iter().map(|t| t.iter().cloned().collect()));
        blocked.extend(ctx.directives.preferred_backbones.iter().map(|t| t.iter().cloned().collect()));

        let cap = self.cfg.max_components;
        let mut accept = |members: &[usize], roles: &[ComponentRole], why: String| -> Option<TopologyProposal> {
            if members.len() > cap || blocked.contains(&names(members)) || !self.feasible(ctx, members) {
                return None;
            }
            blocked.insert(names(members));
            let mut p = TopologyProposal::new(
                members.iter().map(|&i| self.library.solvents()[i].name.clone()).collect(),
                why,
            );
            p.declared_roles = Some(roles.iter().map(|r| Some(*r)).collect());
            Some(p)
        };

        // Champion backbones extended by one host-ranked solvent.
        for backbone in &ctx.directives.preferred_backbones {
            let idx: Option<Vec<usize>> = backbone
                .iter()
                .map(|n| self.library.position(n).filter(|&i| host_rank[i] != usize::MAX))
                .collect();
            let Some(idx) = idx else { continue };
            if idx.len() >= cap {
                continue;
            }
            for h in &hosts {
                if idx.contains(&h.index) {
                    continue;
                }
                let mut members = idx.clone();
                members.push(h.index);
                let mut roles = vec![ComponentRole::Host; idx.len()];
                roles.push(ComponentRole::Modifier);
                let why = format!("champion backbone {} extended with {}", backbone.join(" + "), self.library.solvents()[h.index].name);
                if let Some(p) = accept(&members, &roles, why) {
                    return Ok(p);
                }
            }
        }

        let (axis, _) = separation_axis(self.target, self.protect);
        for h in &hosts {
            for l in &levers {
                if l.index == h.index {
                    continue;
                }
                let pair = [h.index, l.index];
                let hs = &self.library.solvents()[h.index];
                let ls = &self.library.solvents()[l.index];
                let why = format!(
                    "host {} (Ra {:.2}), leverage {} along {axis} (sep {:.2})",
                    hs.name, h.ra_target, ls.name, l.separation
                );
                if cap >= 3 {
                    if let Some(spread) = bp_spread([hs, ls]) {
                        if spread < self.cfg.modifier_bp_spread {
                            let best = ranked
                                .iter()
                                .filter(|m| m.index != h.index && m.index != l.index)
                                .filter_map(|m| {
                                    let ms = &self.library.solvents()[m.index];
                                    bp_spread([hs, ls, ms]).map(|s| (s, m.index))
                                })
                                .filter(|(s, _)| *s > spread)
                                .max_by(|a, b| a.0.total_cmp(&b.0).then(host_rank[b.1].cmp(&host_rank[a.1])));
                            if let Some((s, m)) = best {
                                let why3 = format!(
                                    "{why}; modifier {} widens the boiling range to {s:.0} C",
                                    self.library.solvents()[m].name
                                );
                                let roles = [ComponentRole::Host, ComponentRole::Leverage, ComponentRole::Modifier];
                                if let Some(p) = accept(&[h.index, l.index, m], &roles, why3) {
                                    return Ok(p);
                                }
                            }
                        }
                    }
                }
                if let Some(p) = accept(&pair, &[ComponentRole::Host, ComponentRole::Leverage], why) {
                    return Ok(p);
                }
            }
        }
        Err(ProposalError::NoFeasibleProposal("every host/leverage combination is excluded".into()))
    }
}

impl TopologyGenerator for HeuristicGenerator<'_> {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn propose(&mut self, ctx: &GenerationContext, seed: u64) -> Result<TopologyProposal, ProposalError> {
        self.generate(ctx, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsp::HspVector;
    use crate::planner::{GlobalPlan, StrategyDirectives};
    use crate::proposal::{build_context, DecisionSummary};
    use crate::search::SearchMode;

    fn toy() -> (SolventLibrary, MaterialTarget, MaterialTarget) {
        let target = MaterialTarget::default_target();
        let protect = MaterialTarget::default_protect();
        let lib = SolventLibrary::new(
            vec![
                Solvent::new("W", HspVector::new_unchecked(16.0, 12.0, 14.0)),
                Solvent::new("X", target.hsp),
                Solvent::new("Z", HspVector::new_unchecked(17.0, 9.0, 9.0)),
                Solvent::new("Y", HspVector::new_unchecked(18.0, 6.0, 1.0)),
            ],
            &[],
        )
        .unwrap();
        (lib, target, protect)
    }

    fn ctx(mode: SearchMode, siblings: &[Vec<&str>]) -> GenerationContext {
        let sibs: Vec<DecisionSummary> =
            siblings.iter().map(|t| DecisionSummary::new(t.iter().map(|s| s.to_string()).collect(), 0.0, "")).collect();
        build_context(&[], &sibs, &GlobalPlan::default(), &StrategyDirectives::default(), mode)
    }

    #[test]
    fn host_matches_target_and_leverage_separates() {
        let (lib, t, p) = toy();
        let g = HeuristicGenerator::new(&lib, &t, &p, HeuristicConfig::default());
        let prop = g.generate(&ctx(SearchMode::SiblingAware, &[]), 1).unwrap();
        assert_eq!(prop.components, vec!["X", "Y"]);
        assert_eq!(prop.declared_roles.unwrap()[0], Some(ComponentRole::Host));
    }

    #[test]
    fn exhausted_pairs_give_no_feasible_proposal() {
        let lib = SolventLibrary::new(
            vec![
                Solvent::new("a", HspVector::new_unchecked(18.0, 7.0, 8.0)),
                Solvent::new("b", HspVector::new_unchecked(17.0, 5.0, 4.0)),
                Solvent::new("c", HspVector::new_unchecked(16.0, 9.0, 6.0)),
            ],
            &[],
        )
        .unwrap();
        let (t, p) = (MaterialTarget::default_target(), MaterialTarget::default_protect());
        let cfg = HeuristicConfig { max_components: 2, ..HeuristicConfig::default() };
        let g = HeuristicGenerator::new(&lib, &t, &p, cfg);
        let c = ctx(SearchMode::SiblingAware, &[vec!["a", "b"], vec!["a", "c"], vec!["b", "c"]]);
        assert!(matches!(g.generate(&c, 0), Err(ProposalError::NoFeasibleProposal(_))));
    }

    #[test]
    fn deterministic_under_seed() {
        let lib = SolventLibrary::shipped();
        let (t, p) = (MaterialTarget::default_target(), MaterialTarget::default_protect());
        let g = HeuristicGenerator::new(&lib, &t, &p, HeuristicConfig::default());
        let c = ctx(SearchMode::SiblingAware, &[]);
        assert_eq!(g.generate(&c, 42).unwrap(), g.generate(&c, 42).unwrap());
    }

    #[test]
    fn constraints_are_respected() {
        let lib = SolventLibrary::shipped();
        let (t, p) = (MaterialTarget::default_target(), MaterialTarget::default_protect());
        let g = HeuristicGenerator::new(&lib, &t, &p, HeuristicConfig::default());
        let mut seen: Vec<Vec<String>> = Vec::new();
        for _ in 0..12 {
            let sibs: Vec<Vec<&str>> = seen.iter().map(|v| v.iter().map(String::as_str).collect()).collect();
            let prop = g.generate(&ctx(SearchMode::SiblingAware, &sibs), 3).unwrap();
            let s = prop.sorted();
            assert!(!seen.contains(&s), "{s:?} repeated");
            seen.push(s);
        }
    }
}
