//! Qualitative critic backed by a chat-completion endpoint.

use super::{CriticError, QualitativeCritic, QualitativeRequest};
use crate::chat::{ChatClient, ChatMessage, EndpointConfig};
use crate::prompts;

pub struct RemoteCritic {
    client: ChatClient,
}

impl RemoteCritic {
    pub fn new(config: EndpointConfig) -> Self {
        Self { client: ChatClient::new(config) }
    }

    fn render(req: &QualitativeRequest<'_>) -> String {
        let mut s = String::new();
        s.push_str(&format!("RED_pre = {:.3}\nRED_post = {:.3}\n\nComponents:\n", req.red_pre, req.red_post));
        for (name, phi) in req.formulation.iter() {
            let line = match req.library.get(name) {
                Some(sv) => format!(
                    "- {name}: {:.0}% (HSP {}, bp {}, class {:?})\n",
                    phi * 100.0,
                    sv.hsp,
                    sv.boiling_point.map_or("n/a".to_string(), |b| format!("{b:.0} C")),
                    sv.safety_class
                ),
                None => format!("- {name}: {:.0}%\n", phi * 100.0),
            };
            s.push_str(&line);
        }
        s
    }
}

impl QualitativeCritic for RemoteCritic {
    fn name(&self) -> &str {
        "remote"
    }

    fn assess(&self, req: &QualitativeRequest<'_>) -> Result<f64, CriticError> {
        let messages = [ChatMessage::system(prompts::ADVISOR_SYSTEM), ChatMessage::user(Self::render(req))];
        let text = self.client.complete(&messages)?;
        parse_total_score(&text)
    }
}

/// Reads the last `Total Score:` line and returns points on the 0–10 scale.
///
/// Accepted values: `8`, `8.5`, `8/10`, `85/100` (rescaled). Markdown emphasis
/// around the label is ignored.
pub fn parse_total_score(text: &str) -> Result<f64, CriticError> {
    let line = text
        .lines()
        .rev()
        .map(|l| l.trim().trim_matches(|c| c == '*' || c == '#' || c == '_').trim())
        .find_map(|l| {
            let lower = l.to_ascii_lowercase();
            lower.find("total score:").map(|i| l[i + "total score:".len()..].trim().to_string())
        })
        .ok_or_else(|| CriticError::Malformed("no `Total Score:` line".into()))?;
    let rest = line.trim_start_matches(['*', '_', ' ']);
    let (num, den) = match rest.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (rest, None),
    };
    let value = leading_number(num).ok_or_else(|| CriticError::Malformed(format!("unreadable score {line:?}")))?;
    let points = match den {
        Some(d) => {
            let d = leading_number(d).ok_or_else(|| CriticError::Malformed(format!("unreadable denominator {line:?}")))?;
            if d <= 0.0 {
                return Err(CriticError::Malformed(format!("denominator {d} in {line:?}")));
            }
            value / d * 10.0
        }
        None => value,
    };
    if !(0.0..=10.0).contains(&points) {
        return Err(CriticError::Malformed(format!("score {points} outside 0..=10")));
    }
    Ok(points)
}

fn leading_number(s: &str) -> Option<f64> {
    let s = s.trim();
    let end = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
    s[..end].parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_line_variants() {
        assert_eq!(parse_total_score("blah\nTotal Score: 8/10").unwrap(), 8.0);
        assert_eq!(parse_total_score("**Total Score:** 7.5").unwrap(), 7.5);
        assert_eq!(parse_total_score("Total Score: 85/100\n").unwrap(), 8.5);
        assert!(parse_total_score("Total Score: 12").is_err());
        assert!(parse_total_score("Score 9").is_err());
    }
}
