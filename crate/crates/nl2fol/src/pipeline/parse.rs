//! Line-oriented readers for stage responses.

use super::types::{ClaimImplication, Relation};

/// Drops markdown code fences, keeping their contents.
pub fn strip_fences(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn unquote(s: &str) -> &str {
    s.trim()
        .trim_matches(|c| matches!(c, '"' | '\u{201c}' | '\u{201d}' | '\''))
        .trim()
}

fn strip_bullet(s: &str) -> &str {
    let s = s.trim_start();
    let s = s.trim_start_matches(['-', '*', '\u{2022}']).trim_start();
    // "1." / "2)" numbering
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 && matches!(s.as_bytes().get(digits), Some(b'.' | b')')) {
        s[digits + 1..].trim_start()
    } else {
        s
    }
}

/// Case-insensitive `label:` prefix match, returning the rest of the line.
fn field<'a>(line: &'a str, labels: &[&str]) -> Option<&'a str> {
    let line = strip_bullet(line).trim_start_matches(['*', '_']);
    let lower = line.to_ascii_lowercase();
    labels.iter().find_map(|label| {
        lower.starts_with(label).then(|| {
            line[label.len()..]
                .trim_start_matches(['*', '_'])
                .trim_start()
                .strip_prefix(':')
                .map(|r| r.trim_start_matches(['*', '_']))
        })?
    })
}

fn is_placeholder(s: &str) -> bool {
    let l = s.to_ascii_lowercase();
    l.is_empty() || matches!(l.as_str(), "none" | "n/a" | "na" | "-" | "no claim" | "(none)")
}

/// `Claim:` and `Implication:` lines; `None` without an implication.
pub fn claim_implication(text: &str) -> Option<ClaimImplication> {
    let text = strip_fences(text);
    let mut claims = Vec::new();
    let mut implication = None;
    for line in text.lines() {
        if let Some(rest) = field(line, &["claims", "claim"]) {
            let c = unquote(rest);
            if !is_placeholder(c) {
                claims.push(c.to_string());
            }
        } else if let Some(rest) = field(line, &["implication"]) {
            let i = unquote(rest);
            if !is_placeholder(i) && implication.is_none() {
                implication = Some(i.to_string());
            }
        }
    }
    implication.map(|implication| ClaimImplication {
        claims,
        implication,
    })
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `surface[: symbol]` items from an entity-extraction answer.
pub fn entity_items(text: &str) -> Vec<(String, Option<String>)> {
    let text = strip_fences(text);
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| field(l, &["referring expressions"]).is_some());
    let body: Vec<&str> = match start {
        Some(i) => std::iter::once(field(lines[i], &["referring expressions"]).unwrap())
            .chain(lines[i + 1..].iter().copied())
            .collect(),
        None => lines,
    };
    let mut out = Vec::new();
    for line in body {
        for item in line.split(',') {
            let item = strip_bullet(item).trim();
            if item.is_empty() || item.contains('\u{2286}') || item.contains('\u{2282}') {
                continue;
            }
            let (surface, symbol) = match item.rsplit_once(':') {
                Some((s, sym)) => (unquote(s), Some(unquote(sym).to_string())),
                None => (unquote(item), None),
            };
            if surface.is_empty() {
                continue;
            }
            let symbol = symbol.filter(|s| is_identifier(s));
            out.push((surface.to_string(), symbol));
        }
    }
    out
}

/// An identifier spelling of `surface`: words joined lowerCamel style.
pub fn identifier_for(surface: &str) -> String {
    let mut out = String::new();
    for (i, word) in surface
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .enumerate()
    {
        if i == 0 {
            out.push_str(word);
        } else {
            let mut cs = word.chars();
            if let Some(c) = cs.next() {
                out.push(c.to_ascii_uppercase());
                out.extend(cs);
            }
        }
    }
    if !out.starts_with(|c: char| c.is_ascii_alphabetic()) {
        out.insert(0, 'e');
    }
    out
}

/// First digit 1-4 in the answer.
pub fn relation_answer(text: &str) -> Option<Relation> {
    text.chars().find_map(|c| match c {
        '1' => Some(Relation::Equal),
        '2' => Some(Relation::SubsetLr),
        '3' => Some(Relation::SubsetRl),
        '4' => Some(Relation::Unrelated),
        _ => None,
    })
}

/// `Name(arg, ...)` applications in a properties answer. Text before a
/// `Properties:` label is ignored when one is present.
pub fn property_atoms(text: &str) -> Vec<(String, Vec<String>)> {
    let text = strip_fences(text);
    let body = match text.lines().position(|l| field(l, &["properties"]).is_some()) {
        Some(i) => {
            let lines: Vec<&str> = text.lines().collect();
            std::iter::once(field(lines[i], &["properties"]).unwrap())
                .chain(lines[i + 1..].iter().copied())
                .collect::<Vec<_>>()
                .join("\n")
        }
        None => text,
    };
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_alphabetic() && (i == 0 || !is_ident_byte(bytes[i - 1])) {
            let start = i;
            while i < bytes.len() && is_ident_byte(bytes[i]) {
                i += 1;
            }
            let name = &body[start..i];
            let mut j = i;
            while j < bytes.len() && bytes[j] == b' ' {
                j += 1;
            }
            if bytes.get(j) == Some(&b'(') {
                if let Some(close) = body[j + 1..].find(')') {
                    let inner = &body[j + 1..j + 1 + close];
                    if !inner.contains('(') {
                        let args = inner
                            .split(',')
                            .map(|a| a.trim().to_string())
                            .filter(|a| !a.is_empty())
                            .collect();
                        out.push((name.to_string(), args));
                        i = j + 1 + close + 1;
                        continue;
                    }
                }
            }
        } else {
            i += 1;
        }
    }
    out
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// The formula text in a formulation answer: the `Logical Form:` field if
/// present, else the last nonempty line.
pub fn fol_text(text: &str) -> Option<String> {
    let text = strip_fences(text);
    let labelled = text
        .lines()
        .find_map(|l| field(l, &["logical form", "first-order logic", "formula"]))
        .map(str::trim)
        .filter(|s| !s.is_empty());
    let raw = labelled.or_else(|| text.lines().map(str::trim).rfind(|l| !l.is_empty()))?;
    let raw = raw.trim().trim_end_matches('.').trim();
    let raw = raw.trim_matches('`').trim();
    (!raw.is_empty()).then(|| raw.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claims_and_implication() {
        let ci = claim_implication(
            "Claim: \"A tall man loved to eat cheese.\"\nImplication: \"All tall people like cheese.\"",
        )
        .unwrap();
        assert_eq!(ci.claims, ["A tall man loved to eat cheese."]);
        assert_eq!(ci.implication, "All tall people like cheese.");

        let none = claim_implication("Claim: None\nImplication: Everyone is doing the diet.").unwrap();
        assert!(none.claims.is_empty());
        assert!(claim_implication("Claim: only a claim").is_none());
        let md = claim_implication("```\n**Claim:** a\n- **Implication:** b\n```").unwrap();
        assert_eq!((md.claims[0].as_str(), md.implication.as_str()), ("a", "b"));
    }

    #[test]
    fn entity_lists() {
        assert_eq!(
            entity_items("boy: b, skateboard: s, bridge, skateboardingTrick: y"),
            vec![
                ("boy".into(), Some("b".into())),
                ("skateboard".into(), Some("s".into())),
                ("bridge".into(), None),
                ("skateboardingTrick".into(), Some("y".into())),
            ]
        );
        let bullets = entity_items("Referring expressions:\n- man: x\n- cheese: c\n- x \u{2286} y");
        assert_eq!(bullets.len(), 2);
        assert_eq!(identifier_for("skateboarding trick"), "skateboardingTrick");
        assert_eq!(identifier_for("95% of teachers"), "e95OfTeachers");
    }

    #[test]
    fn relation_digits() {
        assert_eq!(relation_answer("Answer: 2"), Some(Relation::SubsetLr));
        assert_eq!(relation_answer("3"), Some(Relation::SubsetRl));
        assert_eq!(relation_answer("they are unrelated"), None);
    }

    #[test]
    fn atoms() {
        assert_eq!(
            property_atoms("Properties: JumpsOn(b, s), Red(bridge), inMiddleOf(b,bridge)"),
            vec![
                ("JumpsOn".into(), vec!["b".into(), "s".into()]),
                ("Red".into(), vec!["bridge".into()]),
                ("inMiddleOf".into(), vec!["b".into(), "bridge".into()]),
            ]
        );
        assert!(property_atoms("Input sentence: Foo(a)\nProperties: Bar(b)")[0].0 == "Bar");
    }

    #[test]
    fn formula_line() {
        assert_eq!(
            fol_text("```\nLogical Form: P(x) -> Q(x).\n```").as_deref(),
            Some("P(x) -> Q(x)")
        );
        assert_eq!(fol_text("Here it is:\nP(a) & Q(a)").as_deref(), Some("P(a) & Q(a)"));
        assert_eq!(fol_text("  "), None);
    }
}
