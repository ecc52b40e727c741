//! Best-effort cleanup of JSON produced by chat models.
//!
//! Four rules run in order: strip markdown code fences, strip prose around
//! the outermost JSON value, drop trailing commas, normalize typographic
//! quotes. String literals are tracked throughout, with “…” treated as a
//! string delimiter too, so every rule sees the same string structure and
//! the transform is idempotent.

#[derive(Clone, Copy, PartialEq, Eq)]
enum Str {
    None,
    Straight,
    Smart,
}

/// Walks `text`, reporting the string state before each char.
struct Scanner {
    state: Str,
    escaped: bool,
}

impl Scanner {
    fn new() -> Self {
        Scanner { state: Str::None, escaped: false }
    }

    /// Returns the state that applied to `c`, then advances.
    fn step(&mut self, c: char) -> Str {
        let before = self.state;
        match self.state {
            Str::None => match c {
                '"' => self.state = Str::Straight,
                '\u{201C}' | '\u{201D}' => self.state = Str::Smart,
                _ => {}
            },
            Str::Straight => {
                if self.escaped {
                    self.escaped = false;
                } else if c == '\\' {
                    self.escaped = true;
                } else if c == '"' {
                    self.state = Str::None;
                }
            }
            Str::Smart => {
                if self.escaped {
                    self.escaped = false;
                } else if c == '\\' {
                    self.escaped = true;
                } else if c == '\u{201D}' {
                    self.state = Str::None;
                }
            }
        }
        before
    }
}

pub fn repair_json(text: &str) -> String {
    let s = strip_fences(text);
    let s = strip_prose(&s);
    let s = remove_trailing_commas(&s);
    normalize_quotes(&s).trim().to_string()
}

fn strip_fences(text: &str) -> String {
    let Some(open) = text.find("```") else {
        return text.trim().to_string();
    };
    let rest = &text[open + 3..];
    let body = match rest.find('\n') {
        Some(nl) if rest[..nl].trim().chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') => &rest[nl + 1..],
        _ => rest,
    };
    let inner = match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    };
    inner.trim().to_string()
}

fn strip_prose(text: &str) -> String {
    let Some(start) = text.find(['[', '{']) else {
        return text.to_string();
    };
    let mut scanner = Scanner::new();
    let mut depth = 0usize;
    for (i, c) in text[start..].char_indices() {
        if scanner.step(c) != Str::None {
            continue;
        }
        match c {
            '[' | '{' => depth += 1,
            ']' | '}' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    return text[start..start + i + c.len_utf8()].to_string();
                }
            }
            _ => {}
        }
    }
    text[start..].trim_end().to_string()
}

fn remove_trailing_commas(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut scanner = Scanner::new();
    for (i, &c) in chars.iter().enumerate() {
        let state = scanner.step(c);
        if state == Str::None && c == ',' {
            let next = chars[i + 1..].iter().find(|&&d| !(d.is_whitespace() || d == ','));
            if matches!(next, Some(']') | Some('}')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn normalize_quotes(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut scanner = Scanner::new();
    for c in text.chars() {
        let escaped = scanner.escaped;
        let state = scanner.step(c);
        match (state, c) {
            (_, '\u{2018}' | '\u{2019}') => out.push('\''),
            (Str::Straight | Str::Smart, '\u{201C}' | '\u{201D}') if escaped => out.push('"'),
            (Str::Straight | Str::Smart, _) if escaped => out.push(c),
            (Str::None, '\u{201C}' | '\u{201D}') => out.push('"'),
            (Str::Straight, '\u{201C}' | '\u{201D}') => out.push_str("\\\""),
            (Str::Smart, '\u{201D}') if scanner.state == Str::None => out.push('"'),
            (Str::Smart, '\u{201C}' | '\u{201D}') => out.push_str("\\\""),
            (Str::Smart, '"') => out.push_str("\\\""),
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_fences() {
        assert_eq!(repair_json("```json\n[{\"a\":1}]\n```"), "[{\"a\":1}]");
        assert_eq!(repair_json("```\n{\"a\": [1, 2]}\n```\nDone."), "{\"a\": [1, 2]}");
    }

    #[test]
    fn removes_trailing_commas() {
        assert_eq!(repair_json("[{\"a\":1,}]"), "[{\"a\":1}]");
        assert_eq!(repair_json("[1, 2, ,\n ]"), "[1, 2 \n ]");
        assert_eq!(repair_json("[\"a,]\"]"), "[\"a,]\"]");
    }

    #[test]
    fn strips_prose_wrappers() {
        assert_eq!(repair_json("Sure! Here is the JSON: [ ... ] Hope that helps"), "[ ... ]");
        assert_eq!(repair_json("Result: {\"k\": \"has ] inside\"} bye"), "{\"k\": \"has ] inside\"}");
    }

    #[test]
    fn normalizes_smart_quotes() {
        assert_eq!(repair_json("[{“a”: “b”}]"), "[{\"a\": \"b\"}]");
        let fixed = repair_json("[{\"story\": \"She said “hi” and it’s fine\"}]");
        assert_eq!(fixed, "[{\"story\": \"She said \\\"hi\\\" and it's fine\"}]");
        let v: serde_json::Value = serde_json::from_str(&fixed).unwrap();
        assert_eq!(v[0]["story"], "She said \"hi\" and it's fine");
    }

    #[test]
    fn leaves_plain_text_alone() {
        assert_eq!(repair_json("  no json here  "), "no json here");
    }

    proptest! {
        #[test]
        fn idempotent_on_token_soup(parts in prop::collection::vec(prop::sample::select(vec![
            "[", "]", "{", "}", ",", " ", "\n", "\"", "\\", "“", "”", "‘", "’", "a", "b1", ":", "```", "```json\n", "Sure: ", "ok.",
        ]), 0..40)) {
            let s: String = parts.concat();
            let once = repair_json(&s);
            prop_assert_eq!(repair_json(&once), once);
        }
    }
}
