//! Domain types shared by every other module. No I/O happens here.

mod album;
mod config;
mod story;
mod trace;

pub use album::{validate_album, Album, Category, Photo, Violation};
pub use config::{
    BackendMode, BackendsConfig, CaptionerEndpointConfig, ChatEndpointConfig, DecodingParams, EmbedderEndpointConfig,
    RetryConfig, RunConfig, DEFAULT_EPSILON, DEFAULT_U_MAX,
};
pub use story::{Caption, CaptionKind, PairRecord, Story, StoryChunk, StoryStage};
pub use trace::{FailureKind, IterationTrace, RoundResult, StopReason, TraceError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0} text is empty")]
    EmptyText(&'static str),
    #[error("expected {expected} chunks, found {found}")]
    ChunkCount { expected: usize, found: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_text() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 ,.'\"\\n]{1,40}".prop_filter("non-blank", |s| !s.trim().is_empty())
    }

    fn arb_trace() -> impl Strategy<Value = IterationTrace> {
        (1usize..5, prop::collection::vec(arb_text(), 1..20), 0.0f64..1.0, any::<u64>()).prop_map(|(n, texts, ratio, seed)| {
            let album = Album::from_paths("alb", "camping", (0..n).map(|i| format!("camping/alb/{i}.jpg")));
            let mk = |t: u32| {
                let caps: Vec<Caption> = album
                    .photos
                    .iter()
                    .enumerate()
                    .map(|(i, p)| Caption::new(&p.id, texts[(i + t as usize) % texts.len()].clone(), t).unwrap())
                    .collect();
                let chunk_texts: Vec<String> = (0..n).map(|i| texts[(i * 3 + t as usize) % texts.len()].clone()).collect();
                let stage = if t == 0 { StoryStage::Initial } else { StoryStage::Refined };
                RoundResult {
                    t,
                    captions: caps,
                    story: Story::for_album(&album, stage, t, &chunk_texts).unwrap(),
                    edit_ratio: (t > 0).then_some(ratio),
                    warnings: if t == 1 { vec!["w".into()] } else { vec![] },
                }
            };
            let config = RunConfig {
                seed,
                ..RunConfig::default()
            };
            IterationTrace {
                album_id: album.id.clone(),
                config,
                rounds: vec![mk(0), mk(1)],
                stop_reason: Some(StopReason::MaxRounds),
                ultimate_story: None,
                error: None,
            }
        })
    }

    proptest! {
        #[test]
        fn trace_json_roundtrip(trace in arb_trace()) {
            let s = serde_json::to_string(&trace).unwrap();
            let back: IterationTrace = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back, trace);
        }

        #[test]
        fn album_json_roundtrip(n in 1usize..12, cat in "[a-z]{1,10}") {
            let album = Album::from_paths("x", cat.as_str(), (0..n).map(|i| format!("{i}.jpg")));
            let back: Album = serde_json::from_str(&serde_json::to_string(&album).unwrap()).unwrap();
            prop_assert_eq!(back, album);
        }
    }

    #[test]
    fn trace_field_names() {
        let trace = IterationTrace::new("a", RunConfig::default());
        let v = serde_json::to_value(&trace).unwrap();
        let obj = v.as_object().unwrap();
        for key in ["album_id", "config", "rounds", "stop_reason", "ultimate_story"] {
            assert!(obj.contains_key(key), "missing {key}");
        }
    }
}
