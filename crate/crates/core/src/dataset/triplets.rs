use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backends::{ChatMessage, ChatModel, DecodingParams};
use crate::prompt::{render_antonym, render_vivid, TemplateSet};

pub const DEFAULT_IN_FLIGHT: usize = 4;

/// An image with its detailed (paragraph) description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParagraphRecord {
    pub image_ref: String,
    pub detailed_caption: String,
}

/// Training example for the story-aware captioner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryCaptionTriplet {
    pub image_ref: String,
    pub noisy_story: String,
    pub detailed_caption: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SynthesisSummary {
    pub triplets: Vec<StoryCaptionTriplet>,
    pub warnings: Vec<String>,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TripletValidation {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl TripletValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Reads paragraph records from a JSON array or a JSON-lines file.
pub fn read_paragraphs(text: &str) -> Result<Vec<ParagraphRecord>, String> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| format!("paragraph list: {e}"));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

/// Two chat calls per record: a vivid rewrite of the detailed caption, then
/// an antonym swap of its adjectives. The corrupted story is `noisy_story`.
///
/// At most `in_flight` records are processed at once. Failed records are
/// skipped with a warning; output keeps input order.
pub fn synthesize_triplets(
    records: &[ParagraphRecord],
    chat: &dyn ChatModel,
    templates: &TemplateSet,
    decoding: &DecodingParams,
    in_flight: usize,
) -> SynthesisSummary {
    let one = |r: &ParagraphRecord| -> Result<StoryCaptionTriplet, String> {
        let ask = |step: &str, msgs: Vec<ChatMessage>| {
            let reply = chat.chat(&msgs, decoding).map_err(|e| format!("{}: {step} failed: {e}", r.image_ref))?;
            let reply = reply.trim().to_string();
            if reply.is_empty() {
                Err(format!("{}: empty {step} reply", r.image_ref))
            } else {
                Ok(reply)
            }
        };
        let vivid_prompt = render_vivid(templates, &r.detailed_caption).map_err(|e| format!("{}: {e}", r.image_ref))?;
        let vivid = ask("vivid rewrite", vivid_prompt)?;
        let noisy = ask("antonym swap", render_antonym(templates, &vivid).map_err(|e| format!("{}: {e}", r.image_ref))?)?;
        if noisy == vivid {
            return Err(format!("{}: antonym swap left the story unchanged", r.image_ref));
        }
        if noisy == r.detailed_caption.trim() {
            return Err(format!("{}: noisy story equals the detailed caption", r.image_ref));
        }
        Ok(StoryCaptionTriplet {
            image_ref: r.image_ref.clone(),
            noisy_story: noisy,
            detailed_caption: r.detailed_caption.clone(),
        })
    };

    let results: Vec<Mutex<Option<Result<StoryCaptionTriplet, String>>>> = records.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = in_flight.max(1).min(records.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(r) = records.get(i) else { break };
                *results[i].lock().expect("result slot") = Some(one(r));
            });
        }
    });

    let mut summary = SynthesisSummary::default();
    for slot in results {
        match slot.into_inner().expect("result slot").expect("every record processed") {
            Ok(t) => summary.triplets.push(t),
            Err(w) => {
                warn!("{w}");
                summary.warnings.push(w);
                summary.skipped += 1;
            }
        }
    }
    let check = validate_triplets(&summary.triplets);
    debug_assert!(check.is_valid(), "synthesis produced invalid triplets: {:?}", check.violations);
    summary.warnings.extend(check.warnings);
    summary
}

/// Invariant check over in-memory triplets.
pub fn validate_triplets(triplets: &[StoryCaptionTriplet]) -> TripletValidation {
    let mut out = TripletValidation::default();
    let mut seen = HashSet::new();
    for (i, t) in triplets.iter().enumerate() {
        check_one(i + 1, t, &mut seen, &mut out);
    }
    out
}

fn check_one(line: usize, t: &StoryCaptionTriplet, seen: &mut HashSet<String>, out: &mut TripletValidation) {
    for (name, value) in [("image_ref", &t.image_ref), ("noisy_story", &t.noisy_story), ("detailed_caption", &t.detailed_caption)] {
        if value.trim().is_empty() {
            out.violations.push(format!("line {line}: {name} is empty"));
        }
    }
    if !t.noisy_story.trim().is_empty() && t.noisy_story.trim() == t.detailed_caption.trim() {
        out.violations.push(format!("line {line}: noisy_story equals detailed_caption"));
    }
    if !seen.insert(t.image_ref.clone()) {
        out.warnings.push(format!("line {line}: duplicate image_ref '{}'", t.image_ref));
    }
}

/// Schema and invariant check over JSON-lines triplet text.
pub fn validate_triplet_lines(text: &str) -> TripletValidation {
    let mut out = TripletValidation::default();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                out.violations.push(format!("line {n}: not JSON: {e}"));
                continue;
            }
        };
        let field = |k: &str| value.get(k).and_then(Value::as_str).map(str::to_string);
        let mut missing = false;
        for k in ["image_ref", "noisy_story", "detailed_caption"] {
            if field(k).is_none() {
                out.violations.push(format!("line {n}: missing {k}"));
                missing = true;
            }
        }
        if missing {
            continue;
        }
        let t = StoryCaptionTriplet {
            image_ref: field("image_ref").unwrap_or_default(),
            noisy_story: field("noisy_story").unwrap_or_default(),
            detailed_caption: field("detailed_caption").unwrap_or_default(),
        };
        check_one(n, &t, &mut seen, &mut out);
    }
    out
}

pub fn validate_triplet_file(path: &Path) -> std::io::Result<TripletValidation> {
    Ok(validate_triplet_lines(&std::fs::read_to_string(path)?))
}

pub fn triplets_to_jsonl(triplets: &[StoryCaptionTriplet]) -> String {
    triplets.iter().map(|t| serde_json::to_string(t).expect("triplet serializes") + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendError, FnChat, ScriptedChat};

    fn rec(i: usize) -> ParagraphRecord {
        ParagraphRecord {
            image_ref: format!("img{i}.jpg"),
            detailed_caption: format!("a bright park with {i} happy kids"),
        }
    }

    #[test]
    fn scripted_pair() {
        let chat = ScriptedChat::new(["bright happy park story", "dark sad park story"]);
        let s = synthesize_triplets(&[rec(0)], &chat, &TemplateSet::defaults(), &DecodingParams::default(), 1);
        assert_eq!(s.triplets.len(), 1);
        assert_eq!(s.triplets[0].noisy_story, "dark sad park story");
        assert_eq!(s.triplets[0].detailed_caption, rec(0).detailed_caption);
        let reqs = chat.requests();
        assert!(reqs[1][0].content.contains("bright happy park story"));
    }

    #[test]
    fn unchanged_story_rejected() {
        let chat = ScriptedChat::new(["same story", "same story"]);
        let s = synthesize_triplets(&[rec(0)], &chat, &TemplateSet::defaults(), &DecodingParams::default(), 1);
        assert!(s.triplets.is_empty());
        assert_eq!(s.skipped, 1);
    }

    #[test]
    fn failures_are_counted() {
        let chat = FnChat::new("flaky", |msgs| {
            let m = &msgs[0].content;
            if ["img7.jpg", "img42.jpg", "img99.jpg"].iter().any(|bad| m.contains(&format!("with {} happy", &bad[3..bad.len() - 4]))) {
                return Err(BackendError::service(false, "boom"));
            }
            if m.contains("antonym") {
                Ok("gloomy version".into())
            } else {
                Ok("cheerful version".into())
            }
        });
        let recs: Vec<_> = (0..100).map(rec).collect();
        let s = synthesize_triplets(&recs, &chat, &TemplateSet::defaults(), &DecodingParams::default(), 4);
        assert_eq!(s.triplets.len(), 97);
        assert_eq!(s.skipped, 3);
        assert_eq!(s.warnings.len(), 3);
        assert_eq!(s.triplets[7].image_ref, "img8.jpg");
    }

    #[test]
    fn line_validation() {
        let good = triplets_to_jsonl(&[StoryCaptionTriplet {
            image_ref: "a".into(),
            noisy_story: "n".into(),
            detailed_caption: "d".into(),
        }]);
        assert!(validate_triplet_lines(&good).is_valid());
        let missing = r#"{"image_ref": "a", "detailed_caption": "d"}"#;
        assert_eq!(validate_triplet_lines(missing).violations, ["line 1: missing noisy_story"]);
        let dup = format!("{good}{good}");
        let v = validate_triplet_lines(&dup);
        assert!(v.is_valid());
        assert_eq!(v.warnings.len(), 1);
    }

    #[test]
    fn paragraph_formats() {
        let arr = r#"[{"image_ref": "a", "detailed_caption": "d"}]"#;
        let lines = "{\"image_ref\": \"a\", \"detailed_caption\": \"d\"}\n\n";
        assert_eq!(read_paragraphs(arr).unwrap(), read_paragraphs(lines).unwrap());
        assert!(read_paragraphs("{oops").is_err());
    }
}
