#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("story text is empty")]
pub struct EmptyText;

/// Lower-cased tokens that end in '.' but do not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.", "vs.", "etc.", "e.g.", "i.e.", "a.m.", "p.m.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201D}', '\u{2019}'];

fn ends_with_abbreviation(text: &str) -> bool {
    let token = text.rsplit(char::is_whitespace).next().unwrap_or("");
    let token = token.trim_start_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
    ABBREVIATIONS.contains(&token.as_str())
}

/// Splits on '.', '!' or '?' followed by whitespace or the end of text.
///
/// Closing quotes and brackets right after the terminator stay with the
/// sentence. A '.' closing a known abbreviation does not split.
pub fn split_sentences(text: &str) -> Result<Vec<String>, EmptyText> {
    if text.trim().is_empty() {
        return Err(EmptyText);
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut k = 0;
    while k < chars.len() {
        let (pos, c) = chars[k];
        if matches!(c, '.' | '!' | '?') {
            let mut end = k + 1;
            while end < chars.len() && (matches!(chars[end].1, '.' | '!' | '?') || CLOSERS.contains(&chars[end].1)) {
                end += 1;
            }
            let boundary = end == chars.len() || chars[end].1.is_whitespace();
            let byte_end = chars.get(end).map_or(text.len(), |&(p, _)| p);
            if boundary && !(c == '.' && end == k + 1 && ends_with_abbreviation(&text[start..pos + 1])) {
                let s = text[start..byte_end].trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                start = byte_end;
            }
            k = end;
        } else {
            k += 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    Ok(out)
}
