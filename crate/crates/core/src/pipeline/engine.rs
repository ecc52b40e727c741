use std::path::PathBuf;
use std::sync::Arc;

use log::{info, warn};

use super::edit::{converged, edit_ratio, EditError};
use super::images::{ImageError, ImageStore};
use super::trace_io::{read_trace, trace_path, write_trace};
use crate::backends::{BackendError, Backends, ChatMessage};
use crate::model::{
    validate_album, Album, Caption, FailureKind, IterationTrace, ModelError, PairRecord, RoundResult, RunConfig, StopReason, Story,
    StoryStage, TraceError,
};
use crate::prompt::{
    corrective_tip, parse_pair_records, parse_story_list, render_initial, render_refine, render_ultimate, ParseFailure, PromptError,
    RequiredKey, TemplateSet,
};

pub const STEP_INITIAL: &str = "initial";
pub const STEP_REFINE: &str = "refine";
pub const STEP_FINALIZE: &str = "finalize";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{step}: backend failure: {source}")]
    Backend { step: &'static str, source: BackendError },
    #[error("{step}: unusable reply after corrective retry: {failure}")]
    Parse { step: &'static str, failure: ParseFailure },
    #[error("{step}: {detail}")]
    Invalid { step: &'static str, detail: String },
    #[error("trace file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    fn invalid(step: &'static str, detail: impl ToString) -> Self {
        PipelineError::Invalid {
            step,
            detail: detail.to_string(),
        }
    }

    pub fn failure_kind(&self) -> FailureKind {
        match self {
            PipelineError::Backend { .. } => FailureKind::Backend,
            PipelineError::Parse { .. } => FailureKind::Parse,
            PipelineError::Invalid { .. } | PipelineError::Io { .. } => FailureKind::Invalid,
        }
    }

    pub fn step(&self) -> &'static str {
        match self {
            PipelineError::Backend { step, .. } | PipelineError::Parse { step, .. } | PipelineError::Invalid { step, .. } => step,
            PipelineError::Io { .. } => "checkpoint",
        }
    }

    pub fn to_trace_error(&self) -> TraceError {
        TraceError {
            kind: self.failure_kind(),
            step: self.step().to_string(),
            detail: self.to_string(),
        }
    }
}

/// Drives one album through the initial story, refine rounds and the final coherence pass.
pub struct Engine {
    backends: Backends,
    templates: TemplateSet,
    images: Arc<dyn ImageStore>,
    config: RunConfig,
    out_dir: Option<PathBuf>,
}

impl Engine {
    pub fn new(backends: Backends, templates: TemplateSet, images: Arc<dyn ImageStore>, config: RunConfig) -> Self {
        Engine {
            backends,
            templates,
            images,
            config,
            out_dir: None,
        }
    }

    /// Persist a checkpoint after every round under `<dir>/<album_id>/trace.json`.
    pub fn with_out_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.out_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    pub fn trace_path_for(&self, album_id: &str) -> Option<PathBuf> {
        self.out_dir.as_deref().map(|d| trace_path(d, album_id))
    }

    fn load_images(&self, album: &Album, step: &'static str) -> Result<Vec<Vec<u8>>, PipelineError> {
        album
            .photos
            .iter()
            .map(|p| self.images.load(&p.path))
            .collect::<Result<_, ImageError>>()
            .map_err(|e| PipelineError::invalid(step, e))
    }

    fn chat(&self, step: &'static str, messages: &[ChatMessage]) -> Result<String, PipelineError> {
        self.backends
            .chat
            .chat(messages, &self.config.decoding)
            .map_err(|source| PipelineError::Backend { step, source })
    }

    /// One chat call, plus a single corrective retry when the reply does not parse.
    fn chat_parsed<T>(
        &self,
        step: &'static str,
        messages: Vec<ChatMessage>,
        warnings: &mut Vec<String>,
        parse: impl Fn(&str) -> Result<T, ParseFailure>,
    ) -> Result<T, PipelineError> {
        let reply = self.chat(step, &messages)?;
        let failure = match parse(&reply) {
            Ok(v) => return Ok(v),
            Err(f) => f,
        };
        warn!("{step}: reply rejected ({failure}); retrying once with a corrective tip");
        warnings.push(format!("{step}: first reply rejected ({failure}); retried with a corrective tip"));
        let mut retry = messages;
        retry.push(ChatMessage::assistant(if reply.trim().is_empty() { "(empty reply)".to_string() } else { reply }));
        retry.push(ChatMessage::user(corrective_tip(&failure)));
        let reply = self.chat(step, &retry)?;
        parse(&reply).map_err(|failure| PipelineError::Parse { step, failure })
    }

    fn check_album(&self, album: &Album, step: &'static str) -> Result<(), PipelineError> {
        let violations = validate_album(album);
        if violations.is_empty() {
            Ok(())
        } else {
            let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(PipelineError::invalid(step, format!("invalid album {}: {}", album.id, text.join("; "))))
        }
    }

    /// Round 0: plain captions, the story request, then its restructuring into records.
    pub fn generate_initial(&self, album: &Album) -> Result<RoundResult, PipelineError> {
        let step = STEP_INITIAL;
        self.check_album(album, step)?;
        let images = self.load_images(album, step)?;
        let texts = fan_out(&images, |img| self.backends.captioner.caption(img)).map_err(|source| PipelineError::Backend { step, source })?;
        let captions = album
            .photos
            .iter()
            .zip(&texts)
            .map(|(p, t)| Caption::new(&p.id, t.trim(), 0))
            .collect::<Result<Vec<_>, ModelError>>()
            .map_err(|e| PipelineError::invalid(step, e))?;

        let records: Vec<PairRecord> = album.photos.iter().zip(&captions).map(|(p, c)| PairRecord::new(&p.path, &c.text)).collect();
        let [first, second] = render_initial(&self.templates, &records).map_err(|e: PromptError| PipelineError::invalid(step, e))?;
        let draft = self.chat(step, std::slice::from_ref(&first))?;
        let draft = if draft.trim().is_empty() { "(empty reply)".to_string() } else { draft };

        let paths = album.paths();
        let mut warnings = Vec::new();
        let parsed = self.chat_parsed(step, vec![first, ChatMessage::assistant(draft), second], &mut warnings, |text| {
            parse_pair_records(text, &paths, RequiredKey::InitialStory)
        })?;
        warnings.extend(parsed.warnings);
        let chunks: Vec<String> = parsed.records.into_iter().map(|r| r.initial_story.unwrap_or_default()).collect();
        let story = Story::for_album(album, StoryStage::Initial, 0, &chunks).map_err(|e| PipelineError::invalid(step, e))?;
        Ok(RoundResult {
            t: 0,
            captions,
            story,
            edit_ratio: None,
            warnings,
        })
    }

    /// Round t+1: story-aware captions from each photo's previous chunk, then the revision prompt.
    ///
    /// `base` holds the round-0 captions, which stay the `caption` field of every record.
    pub fn refine_round(&self, album: &Album, base: &[Caption], prev: &RoundResult) -> Result<RoundResult, PipelineError> {
        let step = STEP_REFINE;
        if !prev.is_complete_for(album) || base.len() != album.len() {
            return Err(PipelineError::invalid(
                step,
                format!(
                    "album has {} photos but the previous round has {} captions and {} chunks ({} base captions)",
                    album.len(),
                    prev.captions.len(),
                    prev.story.chunks.len(),
                    base.len()
                ),
            ));
        }
        let t = prev.t + 1;
        let images = self.load_images(album, step)?;
        let inputs: Vec<(&[u8], &str)> = images.iter().map(Vec::as_slice).zip(prev.story.chunks.iter().map(|c| c.text.as_str())).collect();
        let refined = fan_out(&inputs, |(img, chunk)| self.backends.captioner.refine_caption(img, chunk))
            .map_err(|source| PipelineError::Backend { step, source })?;
        let captions = album
            .photos
            .iter()
            .zip(&refined)
            .map(|(p, text)| Caption::new(&p.id, text.trim(), t))
            .collect::<Result<Vec<_>, ModelError>>()
            .map_err(|e| PipelineError::invalid(step, e))?;

        let records: Vec<PairRecord> = album
            .photos
            .iter()
            .enumerate()
            .map(|(i, p)| PairRecord {
                img_path: p.path.clone(),
                caption: base[i].text.clone(),
                initial_story: Some(prev.story.chunks[i].text.clone()),
                refine_caption: Some(captions[i].text.clone()),
                refine_story: None,
            })
            .collect();
        let messages = render_refine(&self.templates, &records).map_err(|e| PipelineError::invalid(step, e))?;
        let paths = album.paths();
        let mut warnings = Vec::new();
        let parsed = self.chat_parsed(step, messages, &mut warnings, |text| parse_pair_records(text, &paths, RequiredKey::RefineStory))?;
        warnings.extend(parsed.warnings);
        let chunks: Vec<String> = parsed.records.into_iter().map(|r| r.refine_story.unwrap_or_default()).collect();
        let story = Story::for_album(album, StoryStage::Refined, t, &chunks).map_err(|e| PipelineError::invalid(step, e))?;
        let ratio = edit_ratio::<f64>(&prev.story, &story).map_err(|e: EditError| PipelineError::invalid(step, e))?;
        Ok(RoundResult {
            t,
            captions,
            story,
            edit_ratio: Some(ratio),
            warnings,
        })
    }

    /// Coherence pass: rewrites the chunks into one flowing story with the same chunk count.
    pub fn finalize(&self, album: &Album, story: &Story) -> Result<(Story, Vec<String>), PipelineError> {
        let step = STEP_FINALIZE;
        if !story.is_aligned_with(album) {
            return Err(PipelineError::invalid(step, format!("story has {} chunks for {} photos", story.chunks.len(), album.len())));
        }
        let n = story.chunks.len();
        let messages = render_ultimate(&self.templates, &story.texts()).map_err(|e| PipelineError::invalid(step, e))?;
        let mut warnings = Vec::new();
        let texts = self.chat_parsed(step, messages, &mut warnings, |text| parse_story_list(text, n))?;
        let ultimate = Story::for_album(album, StoryStage::Ultimate, story.round, &texts).map_err(|e| PipelineError::invalid(step, e))?;
        Ok((ultimate, warnings))
    }

    fn checkpoint(&self, trace: &IterationTrace) -> Result<(), PipelineError> {
        if let Some(path) = self.trace_path_for(&trace.album_id) {
            write_trace(&path, trace).map_err(|source| PipelineError::Io { path, source })?;
        }
        Ok(())
    }

    /// Loads a previous trace for this album, if any. Finished traces are
    /// returned as they are; failed ones are reopened after their last
    /// completed round.
    fn resume(&self, album: &Album) -> Result<Option<IterationTrace>, PipelineError> {
        let Some(path) = self.trace_path_for(&album.id) else {
            return Ok(None);
        };
        if !path.exists() {
            return Ok(None);
        }
        let mut trace = read_trace(&path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
        let stale = |why: String| PipelineError::invalid("resume", format!("{}: {why}; remove it to start over", path.display()));
        if trace.album_id != album.id {
            return Err(stale(format!("trace belongs to album {}", trace.album_id)));
        }
        if trace.config != self.config {
            return Err(stale("trace was produced with a different config".into()));
        }
        if let Some(r) = trace.rounds.iter().find(|r| !r.is_complete_for(album)) {
            return Err(stale(format!("round {} does not match the album's photos", r.t)));
        }
        let problems = trace.check_invariants();
        if !problems.is_empty() {
            return Err(stale(problems.join("; ")));
        }
        if trace.stop_reason == Some(StopReason::Error) {
            trace.stop_reason = None;
            trace.error = None;
        }
        info!("album {}: resuming with {} completed rounds", album.id, trace.rounds.len());
        Ok(Some(trace))
    }

    /// Runs the full loop for one album, checkpointing after each round.
    ///
    /// Backend, parse and precondition failures during the loop are recorded
    /// in the returned trace (`stop_reason = error`). `Err` is reserved for an
    /// invalid config or album, an unusable existing trace, and checkpoint I/O.
    pub fn run(&self, album: &Album) -> Result<IterationTrace, PipelineError> {
        self.config.validate().map_err(|e| PipelineError::invalid("config", e))?;
        self.check_album(album, STEP_INITIAL)?;
        let mut trace = match self.resume(album)? {
            Some(t) if t.stop_reason.is_some() => return Ok(t),
            Some(t) => t,
            None => IterationTrace::new(&album.id, self.config.clone()),
        };

        let stop = match self.iterate(album, &mut trace) {
            Ok(stop) => stop,
            Err(e @ PipelineError::Io { .. }) => return Err(e),
            Err(e) => return self.fail(trace, e),
        };

        let last = trace.rounds.last().expect("at least round 0").story.clone();
        match self.finalize(album, &last) {
            Ok((ultimate, warnings)) => {
                if !warnings.is_empty() {
                    trace.rounds.last_mut().expect("round").warnings.extend(warnings);
                }
                trace.ultimate_story = Some(ultimate);
                trace.stop_reason = Some(stop);
                self.checkpoint(&trace)?;
                Ok(trace)
            }
            Err(e @ PipelineError::Io { .. }) => Err(e),
            Err(e) => self.fail(trace, e),
        }
    }

    fn iterate(&self, album: &Album, trace: &mut IterationTrace) -> Result<StopReason, PipelineError> {
        if trace.rounds.is_empty() {
            let r0 = self.generate_initial(album)?;
            trace.rounds.push(r0);
            self.checkpoint(trace)?;
        }
        loop {
            let last = trace.rounds.last().expect("round 0 present");
            if let Some(ratio) = last.edit_ratio {
                if converged(ratio, self.config.epsilon) {
                    info!("album {}: converged at t={} (edit ratio {ratio:.4})", album.id, last.t);
                    return Ok(StopReason::Converged);
                }
            }
            if last.t >= self.config.u_max {
                return Ok(StopReason::MaxRounds);
            }
            let next = self.refine_round(album, &trace.rounds[0].captions, last)?;
            info!("album {}: round {} edit ratio {:.4}", album.id, next.t, next.edit_ratio.unwrap_or(f64::NAN));
            trace.rounds.push(next);
            self.checkpoint(trace)?;
        }
    }

    fn fail(&self, mut trace: IterationTrace, e: PipelineError) -> Result<IterationTrace, PipelineError> {
        warn!("album {}: {e}", trace.album_id);
        trace.stop_reason = Some(StopReason::Error);
        trace.error = Some(e.to_trace_error());
        self.checkpoint(&trace)?;
        Ok(trace)
    }
}

/// Runs `f` over every item on its own scoped thread and returns results in input order.
fn fan_out<I: Sync, T: Send>(items: &[I], f: impl Fn(&I) -> Result<T, BackendError> + Sync) -> Result<Vec<T>, BackendError> {
    if items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = items.iter().map(|item| s.spawn(|| f(item))).collect();
        handles.into_iter().map(|h| h.join().expect("backend call panicked")).collect()
    })
}

