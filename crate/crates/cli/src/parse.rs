//! Command-line formulation strings. Library names may themselves contain
//! commas ("1,4-Dioxane"), so entries are matched greedily: at each position
//! the longest run of comma-separated pieces that forms a valid entry wins.

use serde_json::json;

use sds_core::library::{Formulation, MAX_COMPONENTS};
use sds_core::SolventLibrary;

use crate::error::CliError;

/// Up to three library names close to `name`, best first.
pub fn near_matches(name: &str, library: &SolventLibrary) -> Vec<String> {
    let want = name.trim().to_lowercase();
    let mut scored: Vec<(f64, &str)> = library
        .iter()
        .map(|s| {
            let have = s.name.to_lowercase();
            let mut score = strsim::normalized_damerau_levenshtein(&want, &have);
            if !want.is_empty() && (have.contains(&want) || want.contains(&have)) {
                score = score.max(0.75);
            }
            (score, s.name.as_str())
        })
        .filter(|(score, _)| *score >= 0.5)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.into_iter().take(3).map(|(_, n)| n.to_string()).collect()
}

fn unknown(name: &str, library: &SolventLibrary) -> CliError {
    let near = near_matches(name, library);
    let hint = if near.is_empty() { String::new() } else { format!("; did you mean {}?", near.join(", ")) };
    CliError::input_with(format!("unknown solvent {name:?}{hint}"), json!({ "name": name, "near_matches": near }))
}

/// Splits `s` on commas and rejoins pieces so that each item satisfies `accept`.
/// On failure returns the index of the first piece no run starting there could match.
fn greedy<T>(s: &str, mut accept: impl FnMut(&str) -> Option<T>) -> Result<Vec<T>, (usize, Vec<String>)> {
    let pieces: Vec<String> = s.split(',').map(str::to_string).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < pieces.len() {
        let hit = (i + 1..=pieces.len()).rev().find_map(|j| accept(&pieces[i..j].join(",")).map(|v| (j, v)));
        match hit {
            Some((j, v)) => {
                out.push(v);
                i = j;
            }
            None => return Err((i, pieces)),
        }
    }
    Ok(out)
}

fn check_count(n: usize, what: &str) -> Result<(), CliError> {
    if n == 0 || n > MAX_COMPONENTS {
        return Err(CliError::input(format!("{what} needs 1 to {MAX_COMPONENTS} solvents, got {n}")));
    }
    Ok(())
}

fn check_distinct(names: &[String]) -> Result<(), CliError> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(CliError::input(format!("{n:?} is listed twice")));
        }
    }
    Ok(())
}

/// `"A,B,C"` to canonical library names, in the given order.
pub fn parse_topology(s: &str, library: &SolventLibrary) -> Result<Vec<String>, CliError> {
    if s.trim().is_empty() {
        return Err(CliError::input("empty topology"));
    }
    let names = greedy(s, |chunk| library.resolve_name(chunk).map(|x| x.name.clone()))
        .map_err(|(i, pieces)| unknown(pieces[i].trim(), library))?;
    check_count(names.len(), "a topology")?;
    check_distinct(&names)?;
    Ok(names)
}

/// A parsed `name:pct` list before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentList {
    pub names: Vec<String>,
    pub percents: Vec<f64>,
}

impl PercentList {
    pub fn sum(&self) -> f64 {
        self.percents.iter().sum()
    }

    /// Fractions are `pct / 100` when the percentages sum to exactly 100,
    /// else each is rescaled by the actual sum.
    pub fn to_formulation(&self) -> Result<Formulation, CliError> {
        let sum = self.sum();
        let div = if sum == 100.0 { 100.0 } else { sum };
        let fractions = self.percents.iter().map(|p| p / div).collect();
        Formulation::new(self.names.clone(), fractions).map_err(|e| CliError::input(e.to_string()))
    }
}

fn parse_percent(s: &str) -> Option<f64> {
    let s = s.trim();
    let s = s.strip_suffix('%').unwrap_or(s).trim();
    s.parse::<f64>().ok().filter(|p| p.is_finite())
}

/// `"name:pct,name:pct"`; the percentages must sum to 100 ± 0.5.
pub fn parse_percent_list(s: &str, library: &SolventLibrary) -> Result<PercentList, CliError> {
    if s.trim().is_empty() {
        return Err(CliError::input("empty formulation"));
    }
    let entries = greedy(s, |chunk| {
        let (name, pct) = chunk.rsplit_once(':')?;
        let solvent = library.resolve_name(name)?;
        Some((solvent.name.clone(), parse_percent(pct)?))
    })
    .map_err(|(i, pieces)| {
        let piece = pieces[i].trim();
        match piece.rsplit_once(':') {
            Some((name, pct)) if parse_percent(pct).is_some() && library.resolve_name(name).is_none() => {
                unknown(name.trim(), library)
            }
            _ => CliError::input_with(
                format!("malformed entry {piece:?}; expected name:percent"),
                json!({ "entry": piece }),
            ),
        }
    })?;
    let (names, percents): (Vec<String>, Vec<f64>) = entries.into_iter().unzip();
    check_count(names.len(), "a formulation")?;
    check_distinct(&names)?;
    if let Some((n, p)) = names.iter().zip(&percents).find(|(_, p)| **p <= 0.0) {
        return Err(CliError::input(format!("{n} has non-positive percentage {p}")));
    }
    let list = PercentList { names, percents };
    let sum = list.sum();
    if (sum - 100.0).abs() > 0.5 {
        return Err(CliError::input_with(
            format!("percentages sum to {sum}, expected 100 ± 0.5"),
            json!({ "sum": sum }),
        ));
    }
    Ok(list)
}

/// Inverse of [`parse_percent_list`] for a recipe: `name:pct,...` with
/// percentages printed without trailing zeros.
pub fn render_percent_list(f: &Formulation) -> String {
    f.iter().map(|(n, p)| format!("{n}:{}", fmt_pct(p * 100.0))).collect::<Vec<_>>().join(",")
}

fn fmt_pct(p: f64) -> String {
    let r = p.round();
    if (p - r).abs() < 1e-9 {
        format!("{r:.0}")
    } else {
        format!("{p}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib() -> SolventLibrary {
        SolventLibrary::shipped()
    }

    #[test]
    fn comma_names_are_matched_whole() {
        let l = lib();
        let t = parse_topology("1,4-Dioxane,Anisole", &l).unwrap();
        assert_eq!(t, vec!["1,4-Dioxane", "Anisole"]);
        let f = parse_percent_list("N,N-Dimethylformamide:40,Cyclohexanone:60", &l).unwrap();
        assert_eq!(f.names, vec!["N,N-Dimethylformamide", "Cyclohexanone"]);
        assert_eq!(f.percents, vec![40.0, 60.0]);
    }

    #[test]
    fn unknown_name_suggests_neighbours() {
        let err = parse_topology("Cyclohexanon,Anisole", &lib()).unwrap_err();
        assert!(err.to_string().contains("Cyclohexanone"), "{err}");
    }

    #[test]
    fn sum_outside_tolerance_reports_the_sum() {
        let err = parse_percent_list("Cyclohexanone:70,Anisole:20", &lib()).unwrap_err();
        assert!(err.to_string().contains("sum to 90"), "{err}");
        assert!(parse_percent_list("Cyclohexanone:70,Anisole:30.4", &lib()).is_ok());
    }

    #[test]
    fn exact_hundred_divides_by_hundred() {
        let l = lib();
        let f = parse_percent_list("Cyclohexanone:35,Anisole:65", &l).unwrap().to_formulation().unwrap();
        assert_eq!(f.fractions, vec![0.35, 0.65]);
        let f = parse_percent_list("Cyclohexanone:35,Anisole:65.2", &l).unwrap().to_formulation().unwrap();
        assert!((f.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn render_round_trips() {
        let l = lib();
        let f = Formulation::new(vec!["Cyclohexanone".into(), "Anisole".into()], vec![0.35, 0.65]).unwrap();
        let s = render_percent_list(&f);
        assert_eq!(s, "Cyclohexanone:35,Anisole:65");
        assert_eq!(parse_percent_list(&s, &l).unwrap().to_formulation().unwrap(), f);
    }

    #[test]
    fn malformed_entries_are_refused() {
        let l = lib();
        for s in ["Cyclohexanone", "Cyclohexanone:abc,Anisole:50", "Cyclohexanone:100,", ":100"] {
            assert!(parse_percent_list(s, &l).is_err(), "{s}");
        }
        assert!(parse_percent_list("Cyclohexanone:50,Cyclohexanone:50", &l).is_err());
    }
}
