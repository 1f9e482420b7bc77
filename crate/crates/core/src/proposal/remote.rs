//! Generator backed by a chat-completion endpoint.

use super::grammar::parse_formulation_block;
use super::{GenerationContext, ProposalError, TopologyGenerator, TopologyProposal};
use crate::chat::{ChatClient, ChatError, ChatMessage, EndpointConfig};
use crate::hsp::MaterialTarget;
use crate::library::SolventLibrary;
use crate::prompts;

/// Re-prompts allowed after an unparseable reply.
pub const MAX_REPROMPTS: usize = 2;

pub struct RemoteGenerator<'a> {
    client: ChatClient,
    library: &'a SolventLibrary,
    target: &'a MaterialTarget,
    protect: &'a MaterialTarget,
}

impl<'a> RemoteGenerator<'a> {
    pub fn new(
        config: EndpointConfig,
        library: &'a SolventLibrary,
        target: &'a MaterialTarget,
        protect: &'a MaterialTarget,
    ) -> Self {
        Self { client: ChatClient::new(config), library, target, protect }
    }

    fn system_prompt(&self) -> String {
        let mut s = String::from(prompts::ARCHITECT_SYSTEM);
        s.push_str(&format!(
            "\nTarget to dissolve: {} HSP {} R0 {}\nLayer to protect: {} HSP {} R0 {}\n\nLibrary (name | dD, dP, dH | bp C | class):\n",
            self.target.name,
            self.target.hsp,
            self.target.interaction_radius,
            self.protect.name,
            self.protect.hsp,
            self.protect.interaction_radius
        ));
        for sv in self.library.iter().filter(|s| !s.is_prohibited()) {
            s.push_str(&format!(
                "{} | {} | {} | {:?}\n",
                sv.name,
                sv.hsp,
                sv.boiling_point.map_or("n/a".to_string(), |b| format!("{b:.0}")),
                sv.safety_class
            ));
        }
        s
    }
}

fn transport(e: ChatError) -> ProposalError {
    match e {
        ChatError::Transport { attempts, message } => ProposalError::Transport { attempts, message },
        ChatError::Status { status, body } => {
            ProposalError::Transport { attempts: 1, message: format!("HTTP {status}: {body}") }
        }
        ChatError::Malformed(m) => ProposalError::MalformedResponse(m),
    }
}

impl TopologyGenerator for RemoteGenerator<'_> {
    fn name(&self) -> &str {
        "remote"
    }

    fn propose(&mut self, ctx: &GenerationContext, _seed: u64) -> Result<TopologyProposal, ProposalError> {
        let mut messages = vec![ChatMessage::system(self.system_prompt()), ChatMessage::user(ctx.render())];
        let mut last_err = String::new();
        for round in 0..=MAX_REPROMPTS {
            let reply = self.client.complete(&messages).map_err(transport)?;
            match parse_formulation_block(&reply) {
                Ok(parsed) => {
                    let proposal = TopologyProposal {
                        components: parsed.entries.iter().map(|e| e.name.clone()).collect(),
                        rationale: parsed.rationale.unwrap_or_default(),
                        declared_roles: parsed
                            .entries
                            .iter()
                            .any(|e| e.role.is_some())
                            .then(|| parsed.entries.iter().map(|e| e.role).collect()),
                        advisory_percent: Some(parsed.entries.iter().map(|e| e.percent).collect()),
                    };
                    proposal.validate(self.library)?;
                    return Ok(proposal);
                }
                Err(e) => {
                    last_err = e.clone();
                    if round < MAX_REPROMPTS {
                        messages.push(ChatMessage::assistant(reply));
                        messages.push(ChatMessage::user(format!(
                            "Your reply could not be parsed ({e}). Answer again with one FORMULATION: block in the exact format."
                        )));
                    }
                }
            }
        }
        Err(ProposalError::MalformedResponse(format!("after {MAX_REPROMPTS} re-prompts: {last_err}")))
    }
}
