use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::backends::{ChatMessage, ChatModel, DecodingParams};
use crate::prompt::{
    parse_metric_output, render_coherence, render_coverage, render_detail, CoverageScores, MetricKind, MetricValue, TemplateSet,
};

/// A metric value, or the reason it could not be measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MetricOutcome<T> {
    Measured { value: T },
    Skipped { reason: String },
}

impl<T> MetricOutcome<T> {
    pub fn skipped(reason: impl Into<String>) -> Self {
        MetricOutcome::Skipped { reason: reason.into() }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            MetricOutcome::Measured { value } => Some(value),
            MetricOutcome::Skipped { .. } => None,
        }
    }

    pub fn is_measured(&self) -> bool {
        matches!(self, MetricOutcome::Measured { .. })
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> MetricOutcome<U> {
        match self {
            MetricOutcome::Measured { value } => MetricOutcome::Measured { value: f(value) },
            MetricOutcome::Skipped { reason } => MetricOutcome::Skipped { reason },
        }
    }
}

fn format_hint(kind: MetricKind) -> &'static str {
    match kind {
        MetricKind::Detail => "Total number of details: xx",
        MetricKind::Coverage => "Score of story coverage for Caption Group 1: xx. Score of story coverage for Caption Group 2: xx. Average score: xx.",
        MetricKind::Coherence => "Coherence Score: xx",
    }
}

/// LLM judge for the Detail, Coverage and Coherence metrics.
#[derive(Clone)]
pub struct Judge {
    chat: Arc<dyn ChatModel>,
    templates: TemplateSet,
    decoding: DecodingParams,
}

impl Judge {
    pub fn new(chat: Arc<dyn ChatModel>, templates: TemplateSet, decoding: DecodingParams) -> Self {
        Judge { chat, templates, decoding }
    }

    pub fn identifier(&self) -> String {
        self.chat.identifier()
    }

    /// Asks, parses, and on a malformed reply asks once more with a format reminder.
    fn ask(&self, kind: MetricKind, messages: Vec<ChatMessage>) -> MetricOutcome<MetricValue> {
        let mut messages = messages;
        for attempt in 0..2 {
            let reply = match self.chat.chat(&messages, &self.decoding) {
                Ok(r) => r,
                Err(e) => {
                    warn!("{} judge: backend failure: {e}", kind.as_str());
                    return MetricOutcome::skipped(format!("backend failure: {e}"));
                }
            };
            match parse_metric_output(&reply, kind) {
                Ok(v) => return MetricOutcome::Measured { value: v },
                Err(e) if attempt == 0 => {
                    warn!("{} judge: unreadable reply ({e}); asking again", kind.as_str());
                    messages.push(ChatMessage::assistant(if reply.trim().is_empty() { "(empty reply)".into() } else { reply }));
                    messages.push(ChatMessage::user(format!("Please answer only in the format \"{}\".", format_hint(kind))));
                }
                Err(e) => {
                    warn!("{} judge: unreadable reply after retry ({e}); skipping", kind.as_str());
                    return MetricOutcome::skipped(format!("unreadable judge reply: {e}"));
                }
            }
        }
        unreachable!("loop returns on its second pass")
    }

    pub fn detail(&self, story: &str) -> MetricOutcome<u64> {
        match render_detail(&self.templates, story) {
            Ok(m) => self.ask(MetricKind::Detail, m).map(|v| match v {
                MetricValue::Detail(n) => n,
                other => unreachable!("detail parser returned {other:?}"),
            }),
            Err(e) => MetricOutcome::skipped(e.to_string()),
        }
    }

    /// Coverage of the plain captions (group 1) and the story-aware captions (group 2).
    pub fn coverage(&self, story: &str, captions_plain: &[String], captions_aware: &[String]) -> MetricOutcome<CoverageScores> {
        match render_coverage(&self.templates, story, captions_plain, captions_aware) {
            Ok(m) => self.ask(MetricKind::Coverage, m).map(|v| match v {
                MetricValue::Coverage(c) => c,
                other => unreachable!("coverage parser returned {other:?}"),
            }),
            Err(e) => MetricOutcome::skipped(e.to_string()),
        }
    }

    pub fn coherence(&self, story: &str) -> MetricOutcome<f64> {
        match render_coherence(&self.templates, story) {
            Ok(m) => self.ask(MetricKind::Coherence, m).map(|v| match v {
                MetricValue::Coherence(x) => x,
                other => unreachable!("coherence parser returned {other:?}"),
            }),
            Err(e) => MetricOutcome::skipped(e.to_string()),
        }
    }
}
