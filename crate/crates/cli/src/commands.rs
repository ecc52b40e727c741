use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use albumstory::backends::Backends;
use albumstory::dataset::{build_manifest, read_paragraphs, synthesize_triplets, triplets_to_jsonl, ExtractorConfig, Manifest, ManifestError};
use albumstory::metrics::{aggregate, render_table, trend_diagnostic, CostMode, EvalReport, Evaluator, Judge, MetricSelection, StageSummary};
use albumstory::model::{BackendMode, IterationTrace, RunConfig};
use albumstory::pipeline::{read_trace, write_atomic, DirImageStore, Engine, PipelineError, TRACE_FILE};
use albumstory::prompt::TemplateSet;
use anyhow::{Context, Result};
use log::info;
use serde::Serialize;

use crate::args::{CostModeArg, EvalArgs, GlobalArgs, IngestArgs, ModeArg, ReportArgs, RunArgs, SynthArgs};
use crate::exit::{self, Failure};

/// Loads the TOML config and applies flag overrides. Prompt override
/// paths are resolved against the config file's directory.
pub fn load_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
            let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Failure::validation(format!("config {}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new(""));
            for p in cfg.prompts.values_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            cfg
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = global.mode {
        cfg.backends.mode = match mode {
            ModeArg::Mock => BackendMode::Mock,
            ModeArg::Http => BackendMode::Http,
        };
    }
    if let Some(u) = global.u_max {
        cfg.u_max = u;
    }
    if let Some(e) = global.epsilon {
        cfg.epsilon = e;
    }
    cfg.validate().map_err(|e| Failure::validation(e.to_string()))?;
    Ok(cfg)
}

fn templates(cfg: &RunConfig) -> Result<TemplateSet> {
    Ok(TemplateSet::with_overrides(&cfg.prompts).map_err(|e| Failure::validation(format!("prompt overrides: {e}")))?)
}

fn backends(cfg: &RunConfig) -> Result<Backends> {
    Ok(Backends::from_config(&cfg.backends, cfg.seed).map_err(|e| Failure::backend(e.to_string()))?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).with_context(|| format!("cannot write {}", path.display()))
}

/// Applies `f` to every item with at most `jobs` running at once; results keep input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: u32, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = (jobs as usize).clamp(1, items.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("result slot").expect("every item processed")).collect()
}

fn sorted_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| !p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.')))
        .collect();
    out.sort();
    Ok(out)
}

fn find_files(root: &Path, keep: &dyn Fn(&str) -> bool) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for p in sorted_dir(root)? {
        if p.is_dir() {
            found.extend(find_files(&p, keep)?);
        } else if p.file_name().and_then(|n| n.to_str()).is_some_and(keep) {
            found.push(p);
        }
    }
    Ok(found)
}

pub fn ingest(global: &GlobalArgs, a: &IngestArgs) -> Result<()> {
    load_config(global)?;
    let mut commands = Vec::new();
    let mut sources = BTreeMap::new();
    if let Some(videos) = &a.videos {
        let extractor = ExtractorConfig {
            program: a.extractor.clone(),
            threshold: a.threshold,
            ..Default::default()
        };
        for category in sorted_dir(videos)?.into_iter().filter(|p| p.is_dir()) {
            let cat = category.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            for video in sorted_dir(&category)?.into_iter().filter(|p| p.is_file()) {
                let Some(stem) = video.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
                let out = a.frames_root.join(&cat).join(&stem);
                let line = extractor.run(&video, &out).with_context(|| format!("extracting {}", video.display()))?;
                info!("{line}");
                commands.push(line);
                let rel = video.strip_prefix(videos).unwrap_or(&video);
                sources.insert(stem, rel.display().to_string());
            }
        }
    }
    match build_manifest(&a.frames_root, a.strict) {
        Ok(mut manifest) => {
            manifest.provenance.extractor_commands = commands;
            manifest.provenance.source_videos.extend(sources);
            let path = global.out_dir.join("manifest.json");
            write_atomic(&path, manifest.to_json().as_bytes()).with_context(|| format!("cannot write {}", path.display()))?;
            let frames: usize = manifest.collections.iter().map(|c| c.frames.len()).sum();
            println!("ingest: {} albums, {frames} frames -> {}", manifest.collections.len(), path.display());
            for note in &manifest.provenance.notes {
                println!("note: {note}");
            }
            Ok(())
        }
        Err(ManifestError::Violations(v)) => {
            let path = global.out_dir.join("manifest_violations.json");
            write_json(&path, &v)?;
            for x in &v {
                eprintln!("violation: {x}");
            }
            Err(Failure::validation(format!("{} manifest violation(s); details in {}", v.len(), path.display())).into())
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct AlbumOutcome {
    album_id: String,
    status: String,
    stop_reason: Option<String>,
    rounds: usize,
    trace: Option<PathBuf>,
    error: Option<String>,
}

fn stop_name(trace: &IterationTrace) -> Option<String> {
    trace
        .stop_reason
        .and_then(|s| serde_json::to_value(s).ok())
        .and_then(|v| v.as_str().map(str::to_string))
}

pub fn run(global: &GlobalArgs, a: &RunArgs) -> Result<()> {
    let cfg = load_config(global)?;
    let text = std::fs::read_to_string(&a.manifest).with_context(|| format!("cannot read manifest {}", a.manifest.display()))?;
    let manifest = Manifest::from_json(&text).map_err(|e| Failure::validation(format!("manifest {}: {e}", a.manifest.display())))?;
    let albums = if a.album == "all" {
        manifest.albums()
    } else {
        vec![manifest
            .album(&a.album)
            .ok_or_else(|| Failure::validation(format!("album '{}' is not in {}", a.album, a.manifest.display())))?]
    };
    let engine = Engine::new(backends(&cfg)?, templates(&cfg)?, Arc::new(DirImageStore::new(&a.frames_root)), cfg).with_out_dir(&global.out_dir);

    let results = parallel_map(&albums, global.jobs, |album| engine.run(album));
    let mut outcomes = Vec::new();
    let mut codes = Vec::new();
    for (album, result) in albums.iter().zip(results) {
        let outcome = match result {
            Ok(trace) => {
                let code = trace.error.as_ref().map_or(exit::OK, |e| exit::for_kind(e.kind));
                codes.push(code);
                AlbumOutcome {
                    album_id: album.id.clone(),
                    status: if code == exit::OK { "ok".into() } else { "failed".into() },
                    stop_reason: stop_name(&trace),
                    rounds: trace.rounds.len(),
                    trace: engine.trace_path_for(&album.id),
                    error: trace.error.map(|e| format!("{} at {}: {}", serde_json::to_value(e.kind).unwrap_or_default(), e.step, e.detail)),
                }
            }
            Err(e) => {
                codes.push(match &e {
                    PipelineError::Io { .. } => exit::OTHER,
                    other => exit::for_kind(other.failure_kind()),
                });
                AlbumOutcome {
                    album_id: album.id.clone(),
                    status: "failed".into(),
                    stop_reason: None,
                    rounds: 0,
                    trace: None,
                    error: Some(e.to_string()),
                }
            }
        };
        match &outcome.error {
            None => println!(
                "{}: {} after {} round(s)",
                outcome.album_id,
                outcome.stop_reason.as_deref().unwrap_or("unfinished"),
                outcome.rounds.saturating_sub(1)
            ),
            Some(err) => println!("{}: failed: {err}", outcome.album_id),
        }
        outcomes.push(outcome);
    }
    write_json(&global.out_dir.join("run_summary.json"), &outcomes)?;
    let failed = codes.iter().filter(|&&c| c != exit::OK).count();
    println!("run: {} of {} albums completed", albums.len() - failed, albums.len());
    match exit::worst(codes) {
        exit::OK => Ok(()),
        code => Err(Failure {
            code,
            message: format!("{failed} album(s) failed; see run_summary.json"),
        }
        .into()),
    }
}

pub fn eval(global: &GlobalArgs, a: &EvalArgs) -> Result<()> {
    let cfg = load_config(global)?;
    let selection = MetricSelection::parse(&a.metrics).map_err(Failure::validation)?;
    let traces = if a.trace.is_dir() {
        find_files(&a.trace, &|n| n == TRACE_FILE)?
    } else {
        vec![a.trace.clone()]
    };
    if traces.is_empty() {
        return Err(Failure::validation(format!("no {TRACE_FILE} under {}", a.trace.display())).into());
    }
    let backends = backends(&cfg)?;
    let judge = (!a.offline).then(|| -> Result<Judge> { Ok(Judge::new(backends.judge.clone(), templates(&cfg)?, cfg.decoding.clone())) }).transpose()?;
    let mode = match a.cost_mode {
        CostModeArg::Dissimilarity => CostMode::Dissimilarity,
        CostModeArg::RawSimilarity => CostMode::RawSimilarity,
    };
    let evaluator = Evaluator::new(backends.embedder.clone(), judge, Arc::new(DirImageStore::new(&a.frames_root)), selection)
        .with_cost_mode(mode)
        .with_backend_ids(backends.identifiers());

    let results = parallel_map(&traces, global.jobs, |path| -> Result<Vec<(PathBuf, EvalReport)>> {
        let trace = read_trace(path).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
        let dir = global.out_dir.join(&trace.album_id);
        evaluator
            .evaluate_trace(&trace)
            .into_iter()
            .map(|r| {
                let file = dir.join(r.stage.file_name());
                write_json(&file, &r)?;
                Ok((file, r))
            })
            .collect()
    });
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for r in results {
        for (file, report) in r? {
            files.push(file);
            reports.push(report);
        }
    }
    write_json(&global.out_dir.join("eval_summary.json"), &serde_json::json!({ "traces": traces, "reports": files }))?;
    print!("{}", render_table(&aggregate(&reports)));
    println!("eval: {} report(s) for {} trace(s) in {}", reports.len(), traces.len(), global.out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct SynthOutcome<'a> {
    records: usize,
    written: usize,
    skipped: usize,
    output: &'a Path,
    warnings: &'a [String],
}

pub fn synth_dataset(global: &GlobalArgs, a: &SynthArgs) -> Result<()> {
    let cfg = load_config(global)?;
    let text = std::fs::read_to_string(&a.paragraphs).with_context(|| format!("cannot read {}", a.paragraphs.display()))?;
    let records = read_paragraphs(&text).map_err(|e| Failure::validation(format!("{}: {e}", a.paragraphs.display())))?;
    if records.is_empty() {
        return Err(Failure::validation(format!("{} holds no records", a.paragraphs.display())).into());
    }
    let backends = backends(&cfg)?;
    let summary = synthesize_triplets(&records, backends.chat.as_ref(), &templates(&cfg)?, &cfg.decoding, a.in_flight as usize);
    let out = global.out_dir.join("triplets.jsonl");
    write_atomic(&out, triplets_to_jsonl(&summary.triplets).as_bytes()).with_context(|| format!("cannot write {}", out.display()))?;
    write_json(
        &global.out_dir.join("synth_summary.json"),
        &SynthOutcome {
            records: records.len(),
            written: summary.triplets.len(),
            skipped: summary.skipped,
            output: &out,
            warnings: &summary.warnings,
        },
    )?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("synth-dataset: {} triplets written, {} skipped -> {}", summary.triplets.len(), summary.skipped, out.display());
    if summary.triplets.is_empty() {
        return Err(Failure::backend("no record produced a triplet").into());
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportOutcome {
    stages: Vec<StageSummary>,
    diagnostics: Vec<String>,
    sources: Vec<PathBuf>,
}

pub fn report(global: &GlobalArgs, a: &ReportArgs) -> Result<()> {
    load_config(global)?;
    let files = find_files(&a.eval_dir, &|n| n.starts_with("eval_") && n.ends_with(".json") && n != "eval_summary.json")?;
    let mut reports = Vec::new();
    for f in &files {
        let text = std::fs::read_to_string(f).with_context(|| format!("cannot read {}", f.display()))?;
        let r: EvalReport = serde_json::from_str(&text).map_err(|e| Failure::validation(format!("{}: {e}", f.display())))?;
        reports.push(r);
    }
    if reports.is_empty() {
        return Err(Failure::validation(format!("no evaluation reports under {}", a.eval_dir.display())).into());
    }
    let stages = aggregate(&reports);
    let table = render_table(&stages);
    let diagnostics = trend_diagnostic(&stages, a.min_albums);
    write_atomic(&global.out_dir.join("report.txt"), table.as_bytes()).context("cannot write report.txt")?;
    write_json(
        &global.out_dir.join("report.json"),
        &ReportOutcome {
            stages,
            diagnostics: diagnostics.clone(),
            sources: files,
        },
    )?;
    print!("{table}");
    for d in diagnostics {
        println!("{d}");
    }
    Ok(())
}
