//! Replays a fixed list of topologies; records every context it receives.

use super::{GenerationContext, ProposalError, TopologyGenerator, TopologyProposal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptPolicy {
    /// Return entries in order, one per call, ignoring the context.
    Sequential,
    /// Return the next entry not equal (as a set) to any negative constraint;
    /// the scan restarts from the top on every call.
    AvoidConstraints,
}

#[derive(Debug, Clone)]
pub struct ScriptedGenerator {
    script: Vec<Vec<String>>,
    policy: ScriptPolicy,
    cursor: usize,
    pub contexts: Vec<GenerationContext>,
}

impl ScriptedGenerator {
    pub fn new<S: AsRef<str>>(script: &[Vec<S>], policy: ScriptPolicy) -> Self {
        let script = script.iter().map(|t| t.iter().map(|s| s.as_ref().to_string()).collect()).collect();
        Self { script, policy, cursor: 0, contexts: Vec::new() }
    }
}

impl TopologyGenerator for ScriptedGenerator {
    fn name(&self) -> &str {
        "scripted"
    }

    fn propose(&mut self, ctx: &GenerationContext, _seed: u64) -> Result<TopologyProposal, ProposalError> {
        self.contexts.push(ctx.clone());
        let pick = match self.policy {
            ScriptPolicy::Sequential => {
                let p = self.script.get(self.cursor).cloned();
                self.cursor += 1;
                p
            }
            ScriptPolicy::AvoidConstraints => {
                let banned: Vec<Vec<String>> = ctx.excluded_topologies().cloned().collect();
                self.script
                    .iter()
                    .find(|t| {
                        let mut s = (*t).clone();
                        s.sort();
                        !banned.contains(&s)
                    })
                    .cloned()
            }
        };
        pick.map(|c| TopologyProposal::new(c, "scripted"))
            .ok_or_else(|| ProposalError::NoFeasibleProposal("script exhausted".into()))
    }
}
