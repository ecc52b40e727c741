use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::repair_json;
use crate::model::PairRecord;

const EXCERPT_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ParseFailureKind {
    MalformedJson,
    CountMismatch { expected: usize, found: usize },
    PathMutation,
    MissingKey,
}

/// A chat reply that could not be turned into the requested structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub struct ParseFailure {
    pub kind: ParseFailureKind,
    pub detail: String,
    pub excerpt: String,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseFailureKind::MalformedJson => write!(f, "malformed JSON: {}", self.detail),
            ParseFailureKind::CountMismatch { expected, found } => write!(f, "expected {expected} entries, found {found}"),
            ParseFailureKind::PathMutation => write!(f, "img_path mutated: {}", self.detail),
            ParseFailureKind::MissingKey => write!(f, "missing key: {}", self.detail),
        }
    }
}

impl ParseFailure {
    pub(crate) fn new(kind: ParseFailureKind, detail: impl Into<String>, text: &str) -> Self {
        ParseFailure {
            kind,
            detail: detail.into(),
            excerpt: text.chars().take(EXCERPT_CHARS).collect(),
        }
    }

    pub fn count_mismatch(&self) -> Option<(usize, usize)> {
        match self.kind {
            ParseFailureKind::CountMismatch { expected, found } => Some((expected, found)),
            _ => None,
        }
    }
}

/// The story field a reply must fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequiredKey {
    InitialStory,
    RefineStory,
}

impl RequiredKey {
    pub fn as_str(self) -> &'static str {
        match self {
            RequiredKey::InitialStory => "initial_story",
            RequiredKey::RefineStory => "refine_story",
        }
    }

    /// Spellings models produce when echoing the prompt's examples.
    fn aliases(self) -> &'static [&'static str] {
        match self {
            RequiredKey::InitialStory => &["initial story"],
            RequiredKey::RefineStory => &["refined_story", "refine story"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRecords {
    pub records: Vec<PairRecord>,
    pub warnings: Vec<String>,
}

fn str_field(obj: &Map<String, Value>, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| obj.get(*k).and_then(Value::as_str)).map(str::to_string)
}

/// Parses a JSON list (after repair) into the top-level items.
pub(crate) fn parse_list(text: &str) -> Result<(Vec<Value>, Vec<String>), ParseFailure> {
    let repaired = repair_json(text);
    let value: Value = serde_json::from_str(&repaired).map_err(|e| ParseFailure::new(ParseFailureKind::MalformedJson, e.to_string(), text))?;
    match value {
        Value::Array(items) => Ok((items, Vec::new())),
        Value::Object(map) => {
            let arrays: Vec<_> = map.into_iter().filter(|(_, v)| v.is_array()).collect();
            match <[_; 1]>::try_from(arrays) {
                Ok([(key, Value::Array(items))]) => Ok((items, vec![format!("unwrapped list from object key '{key}'")])),
                _ => Err(ParseFailure::new(ParseFailureKind::MalformedJson, "expected a JSON list", text)),
            }
        }
        _ => Err(ParseFailure::new(ParseFailureKind::MalformedJson, "expected a JSON list", text)),
    }
}

/// Parses a reply into exactly one record per expected path, in expected order.
///
/// Records whose paths match the expected set one-to-one are reordered.
/// Otherwise, when counts agree and every exact match already sits at its
/// own position, mutated paths are restored from position with a warning.
pub fn parse_pair_records(text: &str, expected_paths: &[String], key: RequiredKey) -> Result<ParsedRecords, ParseFailure> {
    let (items, mut warnings) = parse_list(text)?;
    let objects: Vec<&Map<String, Value>> = items
        .iter()
        .enumerate()
        .map(|(i, v)| v.as_object().ok_or_else(|| ParseFailure::new(ParseFailureKind::MalformedJson, format!("entry {i} is not an object"), text)))
        .collect::<Result<_, _>>()?;

    let expected_index: HashMap<&str, usize> = expected_paths.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let paths: Vec<Option<String>> = objects.iter().map(|o| str_field(o, &["img_path", "img path"])).collect();
    let matches: Vec<Option<usize>> = paths.iter().map(|p| p.as_deref().and_then(|p| expected_index.get(p).copied())).collect();

    if objects.len() != expected_paths.len() {
        if matches.iter().all(Option::is_some) {
            return Err(ParseFailure::new(
                ParseFailureKind::CountMismatch {
                    expected: expected_paths.len(),
                    found: objects.len(),
                },
                format!("expected {} entries, found {}", expected_paths.len(), objects.len()),
                text,
            ));
        }
        let bad: Vec<String> = paths.iter().zip(&matches).filter(|(_, m)| m.is_none()).map(|(p, _)| format!("{p:?}")).collect();
        return Err(ParseFailure::new(
            ParseFailureKind::PathMutation,
            format!("{} entries for {} photos and unknown paths {}", objects.len(), expected_paths.len(), bad.join(", ")),
            text,
        ));
    }

    let mut seen = vec![false; expected_paths.len()];
    let mut bijective = true;
    for m in matches.iter() {
        match m {
            Some(i) if !seen[*i] => seen[*i] = true,
            _ => bijective = false,
        }
    }

    let mut slot: Vec<usize> = (0..objects.len()).collect();
    if bijective {
        for (pos, m) in matches.iter().enumerate() {
            slot[pos] = m.expect("bijective");
        }
        if slot.iter().enumerate().any(|(pos, s)| pos != *s) {
            warnings.push("entries were returned out of order and have been realigned by img_path".into());
        }
    } else {
        let mut taken = vec![false; expected_paths.len()];
        for (pos, m) in matches.iter().enumerate() {
            if let Some(i) = m {
                if *i != pos || taken[*i] {
                    return Err(ParseFailure::new(
                        ParseFailureKind::PathMutation,
                        format!("entry {pos} carries the path of photo {i} while other paths were altered"),
                        text,
                    ));
                }
                taken[*i] = true;
            }
        }
        for (pos, m) in matches.iter().enumerate() {
            if m.is_none() {
                warnings.push(format!(
                    "entry {pos}: img_path {:?} restored to {:?}",
                    paths[pos].as_deref().unwrap_or("<missing>"),
                    expected_paths[pos]
                ));
            }
        }
    }

    let mut records: Vec<Option<PairRecord>> = vec![None; expected_paths.len()];
    for (pos, obj) in objects.iter().enumerate() {
        let idx = slot[pos];
        let path = &expected_paths[idx];
        let mut names = vec![key.as_str()];
        names.extend_from_slice(key.aliases());
        let value = names.iter().find_map(|k| obj.get(*k).map(|v| (*k, v)));
        let story = match value {
            Some((used, Value::String(s))) if !s.trim().is_empty() => {
                if used != key.as_str() {
                    warnings.push(format!("entry {pos}: read '{}' from key '{used}'", key.as_str()));
                }
                s.clone()
            }
            Some(_) => {
                return Err(ParseFailure::new(ParseFailureKind::MissingKey, format!("entry for {path:?} has an empty or non-text '{}'", key.as_str()), text));
            }
            None => {
                return Err(ParseFailure::new(ParseFailureKind::MissingKey, format!("entry for {path:?} lacks '{}'", key.as_str()), text));
            }
        };
        let mut record = PairRecord::new(path.clone(), str_field(obj, &["caption"]).unwrap_or_default());
        record.initial_story = str_field(obj, &["initial_story"]);
        record.refine_caption = str_field(obj, &["refine_caption"]);
        record.refine_story = str_field(obj, &["refine_story", "refined_story"]);
        match key {
            RequiredKey::InitialStory => record.initial_story = Some(story),
            RequiredKey::RefineStory => record.refine_story = Some(story),
        }
        records[idx] = Some(record);
    }

    Ok(ParsedRecords {
        records: records.into_iter().map(|r| r.expect("every slot filled")).collect(),
        warnings,
    })
}

/// Parses a reply holding exactly `expected` story texts: a list of strings,
/// or a list of objects carrying a story-like text field.
pub fn parse_story_list(text: &str, expected: usize) -> Result<Vec<String>, ParseFailure> {
    let (items, _) = parse_list(text)?;
    if items.len() != expected {
        return Err(ParseFailure::new(
            ParseFailureKind::CountMismatch { expected, found: items.len() },
            format!("expected {expected} stories, found {}", items.len()),
            text,
        ));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let s = match item {
                Value::String(s) => Some(s.clone()),
                Value::Object(o) => {
                    let mut keys: Vec<&String> = o.keys().filter(|k| k.contains("story")).collect();
                    keys.sort();
                    keys.into_iter().find_map(|k| o[k].as_str()).map(str::to_string)
                }
                _ => None,
            };
            match s {
                Some(s) if !s.trim().is_empty() => Ok(s),
                _ => Err(ParseFailure::new(ParseFailureKind::MissingKey, format!("story {i} is empty or missing"), text)),
            }
        })
        .collect()
}
