use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::emd::{emd_score, CostMode};
use super::judge::{Judge, MetricOutcome};
use super::report::{EvalReport, EvalSettings, EvalStage};
use super::sentences::split_sentences;
use crate::backends::Embedder;
use crate::model::{Album, Category, IterationTrace, Story};
use crate::pipeline::ImageStore;

/// Which metrics an evaluation computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSelection {
    pub emd: bool,
    pub detail: bool,
    pub coverage: bool,
    pub coherence: bool,
}

impl Default for MetricSelection {
    fn default() -> Self {
        MetricSelection {
            emd: true,
            detail: true,
            coverage: true,
            coherence: true,
        }
    }
}

impl MetricSelection {
    /// Parses a comma-separated list such as `emd,detail`.
    pub fn parse(list: &str) -> Result<Self, String> {
        let mut sel = MetricSelection {
            emd: false,
            detail: false,
            coverage: false,
            coherence: false,
        };
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "emd" => sel.emd = true,
                "detail" => sel.detail = true,
                "coverage" => sel.coverage = true,
                "coherence" => sel.coherence = true,
                other => return Err(format!("unknown metric '{other}' (expected emd, detail, coverage, coherence)")),
            }
        }
        Ok(sel)
    }
}

/// The album implied by a trace: photo ids are the relative image paths.
pub fn album_from_trace(trace: &IterationTrace) -> Option<Album> {
    let first = trace.rounds.first()?;
    Some(Album::from_paths(
        trace.album_id.clone(),
        Category::Other("unknown".into()),
        first.story.chunks.iter().map(|c| c.photo_id.clone()),
    ))
}

/// Sentences of a story, split chunk by chunk.
pub fn story_sentences(chunks: &[String]) -> Vec<String> {
    chunks.iter().filter_map(|c| split_sentences(c).ok()).flatten().collect()
}

/// Scores traces with EMD and, when a judge is available, the LLM metrics.
pub struct Evaluator {
    embedder: Arc<dyn Embedder>,
    judge: Option<Judge>,
    images: Arc<dyn ImageStore>,
    selection: MetricSelection,
    settings: EvalSettings,
    backends: BTreeMap<String, String>,
}

impl Evaluator {
    /// `judge = None` marks the judge metrics as skipped (offline mode).
    pub fn new(embedder: Arc<dyn Embedder>, judge: Option<Judge>, images: Arc<dyn ImageStore>, selection: MetricSelection) -> Self {
        let mut backends = BTreeMap::from([("embedder".to_string(), embedder.identifier())]);
        if let Some(j) = &judge {
            backends.insert("judge".into(), j.identifier());
        }
        Evaluator {
            embedder,
            judge,
            images,
            selection,
            settings: EvalSettings::default(),
            backends,
        }
    }

    pub fn with_cost_mode(mut self, mode: CostMode) -> Self {
        self.settings.cost_mode = mode;
        self
    }

    /// Extra provenance recorded in every report (e.g. the run's captioner and chat model).
    pub fn with_backend_ids(mut self, ids: BTreeMap<String, String>) -> Self {
        for (k, v) in ids {
            self.backends.entry(k).or_insert(v);
        }
        self
    }

    /// One report per stage the trace has text for.
    pub fn evaluate_trace(&self, trace: &IterationTrace) -> Vec<EvalReport> {
        let Some(album) = album_from_trace(trace) else {
            return Vec::new();
        };
        let round0 = &trace.rounds[0];
        let plain: Vec<String> = round0.captions.iter().map(|c| c.text.clone()).collect();
        let last_refined = trace.rounds.iter().rev().find(|r| r.t > 0);
        let aware: Option<Vec<String>> = last_refined.map(|r| r.captions.iter().map(|c| c.text.clone()).collect());

        let mut stages: Vec<(EvalStage, Vec<String>)> = vec![(EvalStage::Captions, plain.clone()), (EvalStage::Initial, round0.story.texts())];
        if let Some(r) = last_refined {
            stages.push((EvalStage::Refined, r.story.texts()));
        }
        if let Some(u) = &trace.ultimate_story {
            stages.push((EvalStage::Ultimate, u.texts()));
        }
        let images = album.photos.iter().map(|p| self.images.load(&p.path)).collect::<Result<Vec<_>, _>>();
        stages
            .into_iter()
            .map(|(stage, chunks)| self.evaluate_text(&trace.album_id, stage, &chunks, &images, &plain, aware.as_deref()))
            .collect()
    }

    /// Reports for a bare story against its album.
    pub fn evaluate_story(&self, album: &Album, story: &Story, stage: EvalStage, plain: &[String], aware: Option<&[String]>) -> EvalReport {
        let images = album.photos.iter().map(|p| self.images.load(&p.path)).collect::<Result<Vec<_>, _>>();
        self.evaluate_text(&album.id, stage, &story.texts(), &images, plain, aware)
    }

    fn evaluate_text(
        &self,
        album_id: &str,
        stage: EvalStage,
        chunks: &[String],
        images: &Result<Vec<Vec<u8>>, crate::pipeline::ImageError>,
        plain: &[String],
        aware: Option<&[String]>,
    ) -> EvalReport {
        let sentences = story_sentences(chunks);
        let text = chunks.join("\n");
        let emd = if !self.selection.emd {
            MetricOutcome::skipped("not requested")
        } else {
            match images {
                Err(e) => MetricOutcome::skipped(format!("images unavailable: {e}")),
                Ok(imgs) => match emd_score(imgs, &sentences, self.embedder.as_ref(), self.settings.cost_mode) {
                    Ok(v) => MetricOutcome::Measured { value: v },
                    Err(e) => MetricOutcome::skipped(e.to_string()),
                },
            }
        };
        let judged = |wanted: bool| -> Result<&Judge, String> {
            if !wanted {
                return Err("not requested".into());
            }
            self.judge.as_ref().ok_or_else(|| "offline: judge disabled".to_string())
        };
        let detail = match judged(self.selection.detail) {
            Ok(j) => j.detail(&text),
            Err(r) => MetricOutcome::skipped(r),
        };
        let coverage = match (judged(self.selection.coverage), aware) {
            (Ok(j), Some(aware)) => j.coverage(&text, plain, aware),
            (Ok(_), None) => MetricOutcome::skipped("no story-aware captions in this run"),
            (Err(r), _) => MetricOutcome::skipped(r),
        };
        let coherence = match judged(self.selection.coherence) {
            Ok(j) => j.coherence(&text),
            Err(r) => MetricOutcome::skipped(r),
        };
        EvalReport {
            album_id: album_id.to_string(),
            stage,
            sentence_count: sentences.len(),
            emd,
            detail,
            coverage,
            coherence,
            backends: self.backends.clone(),
            settings: self.settings.clone(),
        }
    }
}
