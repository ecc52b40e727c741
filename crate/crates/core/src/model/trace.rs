use serde::{Deserialize, Serialize};

use super::{Album, Caption, RunConfig, Story};

/// One completed round of the storytelling loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub t: u32,
    pub captions: Vec<Caption>,
    pub story: Story,
    /// Edit ratio against the previous round's story; `None` for round 0.
    pub edit_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RoundResult {
    pub fn is_complete_for(&self, album: &Album) -> bool {
        self.captions.len() == album.photos.len() && self.story.is_aligned_with(album)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxRounds,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Backend,
    Parse,
    Invalid,
}

/// Why a run stopped with `StopReason::Error`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceError {
    pub kind: FailureKind,
    /// Step that failed: `initial`, `refine` or `finalize`.
    pub step: String,
    pub detail: String,
}

/// Persisted record of one album run. `stop_reason` stays `None` while the run is in progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub album_id: String,
    pub config: RunConfig,
    pub rounds: Vec<RoundResult>,
    pub stop_reason: Option<StopReason>,
    pub ultimate_story: Option<Story>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<TraceError>,
}

impl IterationTrace {
    pub fn new(album_id: impl Into<String>, config: RunConfig) -> Self {
        IterationTrace {
            album_id: album_id.into(),
            config,
            rounds: Vec::new(),
            stop_reason: None,
            ultimate_story: None,
            error: None,
        }
    }

    /// The best story available: the ultimate one, else the last round's.
    pub fn final_story(&self) -> Option<&Story> {
        self.ultimate_story.as_ref().or_else(|| self.rounds.last().map(|r| &r.story))
    }

    /// Checks the trace-level invariants; returns human-readable problems.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, r) in self.rounds.iter().enumerate() {
            if r.t as usize != i {
                out.push(format!("round at position {i} has t={}", r.t));
            }
            match (i, r.edit_ratio) {
                (0, Some(_)) => out.push("round 0 carries an edit ratio".into()),
                (0, None) => {}
                (_, None) => out.push(format!("round {i} lacks an edit ratio")),
                (_, Some(x)) if x.is_nan() || x < 0.0 => out.push(format!("round {i} has invalid edit ratio {x}")),
                _ => {}
            }
            if r.captions.len() != r.story.chunks.len() {
                out.push(format!("round {i}: {} captions vs {} chunks", r.captions.len(), r.story.chunks.len()));
            }
        }
        if self.stop_reason == Some(StopReason::Converged) {
            match self.rounds.last().and_then(|r| r.edit_ratio) {
                Some(x) if x < self.config.epsilon => {}
                other => out.push(format!("converged but last edit ratio is {other:?}")),
            }
        }
        if self.rounds.len() > 1 + self.config.u_max as usize {
            out.push(format!("{} rounds exceed 1 + u_max", self.rounds.len()));
        }
        out
    }
}
