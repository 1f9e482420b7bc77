//! Parser for the `FORMULATION:` block in generator replies.
//!
//! ```text
//! reply      = *any-line marker-line *blank-line open-fence entry-lines close-fence [rationale-line] *any-line
//! marker-line = *WS "FORMULATION:" *WS EOL
//! open-fence  = *WS "```" *info-char EOL
//! close-fence = *WS "```" *WS EOL
//! entry-lines = 1*(entry / blank-line)
//! entry       = *WS ["- "] name ":" *WS percent ["%"] [1*WS "(" role ")"] *WS EOL
//! name        = 1*char          ; everything before the LAST ':' of the line, trimmed
//! percent     = 1*DIGIT ["." 1*DIGIT]
//! role        = "host" / "leverage" / "modifier"   ; case-insensitive
//! rationale-line = *WS "RATIONALE:" *WS text EOL   ; first such line after the block
//! ```
//!
//! Only the first marker line counts. Percentages must lie in `[0, 100]`;
//! they are not required to sum to 100.

use super::ComponentRole;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEntry {
    pub name: String,
    pub percent: f64,
    pub role: Option<ComponentRole>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFormulation {
    pub entries: Vec<ParsedEntry>,
    pub rationale: Option<String>,
}

pub fn parse_formulation_block(text: &str) -> Result<ParsedFormulation, String> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| l.trim() == "FORMULATION:")
        .ok_or("no `FORMULATION:` marker line")?;
    let mut i = start + 1;
    while i < lines.len() && lines[i].trim().is_empty() {
        i += 1;
    }
    if i >= lines.len() || !lines[i].trim_start().starts_with("```") {
        return Err("`FORMULATION:` must be followed by an opening ``` fence".into());
    }
    i += 1;
    let mut entries = Vec::new();
    let mut closed = false;
    while i < lines.len() {
        let line = lines[i].trim();
        i += 1;
        if line == "```" {
            closed = true;
            break;
        }
        if line.is_empty() {
            continue;
        }
        entries.push(parse_entry(line).map_err(|e| format!("line {}: {e}", i))?);
    }
    if !closed {
        return Err("unterminated fence".into());
    }
    if entries.is_empty() {
        return Err("empty FORMULATION block".into());
    }
    let rationale = lines[i..]
        .iter()
        .find_map(|l| l.trim().strip_prefix("RATIONALE:"))
        .map(|r| r.trim().to_string());
    Ok(ParsedFormulation { entries, rationale })
}

fn parse_entry(line: &str) -> Result<ParsedEntry, String> {
    let line = line.strip_prefix("- ").unwrap_or(line);
    let (name, value) = line.rsplit_once(':').ok_or_else(|| format!("missing ':' in {line:?}"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(format!("empty name in {line:?}"));
    }
    let mut value = value.trim();
    let mut role = None;
    if let Some(open) = value.find('(') {
        let inner = value[open..]
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("bad role suffix in {line:?}"))?;
        role = Some(inner.parse::<ComponentRole>()?);
        value = value[..open].trim();
    }
    let num = value.strip_suffix('%').unwrap_or(value).trim();
    if num.is_empty() || !num.chars().all(|c| c.is_ascii_digit() || c == '.') || num.starts_with('.') || num.ends_with('.') {
        return Err(format!("bad percent {value:?}"));
    }
    let percent: f64 = num.parse().map_err(|_| format!("bad percent {value:?}"))?;
    if !(0.0..=100.0).contains(&percent) {
        return Err(format!("percent {percent} outside 0..=100"));
    }
    Ok(ParsedEntry { name: name.to_string(), percent, role })
}
