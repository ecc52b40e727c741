//! Client contracts for the three model services: the captioner, the chat
//! model and the embedder. Each has an HTTP implementation and deterministic
//! offline mocks.

mod embedding;
mod error;
mod http;
mod mock;
mod retry;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use crate::model::DecodingParams;
use crate::model::{BackendMode, BackendsConfig};
pub use embedding::EmbeddingVector;
pub use error::{BackendError, BackendErrorKind};
pub use http::{HttpCaptioner, HttpChat, HttpEmbedder};
pub use mock::{
    content_hash, short_hash, FnChat, HashEmbedder, MockCaptioner, MockStoryteller, ScriptedChat, SemanticEmbedder,
};
pub use retry::{thread_sleeper, RetryPolicy, Sleeper};

pub type Embedding = EmbeddingVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Precondition shared by every chat implementation.
pub fn check_messages(messages: &[ChatMessage]) -> Result<(), BackendError> {
    if !messages.iter().any(|m| m.role == Role::User) {
        return Err(BackendError::invalid_request("chat needs at least one user message"));
    }
    if let Some(m) = messages.iter().find(|m| m.role != Role::System && m.content.is_empty()) {
        return Err(BackendError::invalid_request(format!("{:?} message has empty content", m.role)));
    }
    Ok(())
}

pub(crate) fn check_image(image: &[u8]) -> Result<(), BackendError> {
    if image.is_empty() {
        return Err(BackendError::invalid_request("image payload is empty"));
    }
    Ok(())
}

pub(crate) fn check_text(what: &str, text: &str) -> Result<(), BackendError> {
    if text.trim().is_empty() {
        return Err(BackendError::invalid_request(format!("{what} is empty")));
    }
    Ok(())
}

/// Plain captioning `c(image)` and story-aware refinement `f(image, story chunk)`.
pub trait Captioner: Send + Sync {
    fn caption(&self, image: &[u8]) -> Result<String, BackendError>;
    fn refine_caption(&self, image: &[u8], story_chunk: &str) -> Result<String, BackendError>;
    fn identifier(&self) -> String;
}

pub trait ChatModel: Send + Sync {
    fn chat(&self, messages: &[ChatMessage], decoding: &DecodingParams) -> Result<String, BackendError>;
    fn identifier(&self) -> String;
}

/// Image and text encoders sharing one latent space.
pub trait Embedder: Send + Sync {
    fn embed_image(&self, image: &[u8]) -> Result<Embedding, BackendError>;
    fn embed_text(&self, text: &str) -> Result<Embedding, BackendError>;

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, BackendError> {
        texts.iter().map(|t| self.embed_text(t)).collect()
    }

    fn identifier(&self) -> String;
}

impl<T: Captioner + ?Sized> Captioner for Arc<T> {
    fn caption(&self, image: &[u8]) -> Result<String, BackendError> {
        (**self).caption(image)
    }
    fn refine_caption(&self, image: &[u8], story_chunk: &str) -> Result<String, BackendError> {
        (**self).refine_caption(image, story_chunk)
    }
    fn identifier(&self) -> String {
        (**self).identifier()
    }
}

impl<T: ChatModel + ?Sized> ChatModel for Arc<T> {
    fn chat(&self, messages: &[ChatMessage], decoding: &DecodingParams) -> Result<String, BackendError> {
        (**self).chat(messages, decoding)
    }
    fn identifier(&self) -> String {
        (**self).identifier()
    }
}

impl<T: Embedder + ?Sized> Embedder for Arc<T> {
    fn embed_image(&self, image: &[u8]) -> Result<Embedding, BackendError> {
        (**self).embed_image(image)
    }
    fn embed_text(&self, text: &str) -> Result<Embedding, BackendError> {
        (**self).embed_text(text)
    }
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, BackendError> {
        (**self).embed_texts(texts)
    }
    fn identifier(&self) -> String {
        (**self).identifier()
    }
}

/// Wraps a backend and counts the calls that reach it.
#[derive(Debug, Clone)]
pub struct Counted<T> {
    inner: T,
    calls: Arc<AtomicUsize>,
}

impl<T> Counted<T> {
    pub fn new(inner: T) -> Self {
        Counted {
            inner,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn counter(&self) -> Arc<AtomicUsize> {
        self.calls.clone()
    }

    fn tick(&self) {
        self.calls.fetch_add(1, Ordering::SeqCst);
    }
}

impl<T: Captioner> Captioner for Counted<T> {
    fn caption(&self, image: &[u8]) -> Result<String, BackendError> {
        self.tick();
        self.inner.caption(image)
    }
    fn refine_caption(&self, image: &[u8], story_chunk: &str) -> Result<String, BackendError> {
        self.tick();
        self.inner.refine_caption(image, story_chunk)
    }
    fn identifier(&self) -> String {
        self.inner.identifier()
    }
}

impl<T: ChatModel> ChatModel for Counted<T> {
    fn chat(&self, messages: &[ChatMessage], decoding: &DecodingParams) -> Result<String, BackendError> {
        self.tick();
        self.inner.chat(messages, decoding)
    }
    fn identifier(&self) -> String {
        self.inner.identifier()
    }
}

impl<T: Embedder> Embedder for Counted<T> {
    fn embed_image(&self, image: &[u8]) -> Result<Embedding, BackendError> {
        self.tick();
        self.inner.embed_image(image)
    }
    fn embed_text(&self, text: &str) -> Result<Embedding, BackendError> {
        self.tick();
        self.inner.embed_text(text)
    }
    fn identifier(&self) -> String {
        self.inner.identifier()
    }
}

/// Enforces one embedding dimension across every call.
///
/// The dimension is either fixed up front or pinned by the first vector seen.
pub struct DimensionChecked<E> {
    inner: E,
    dim: Mutex<Option<usize>>,
}

impl<E: Embedder> DimensionChecked<E> {
    pub fn new(inner: E, dim: Option<usize>) -> Self {
        DimensionChecked {
            inner,
            dim: Mutex::new(dim),
        }
    }

    fn check(&self, v: Embedding) -> Result<Embedding, BackendError> {
        let mut dim = self.dim.lock().expect("dimension lock");
        match *dim {
            Some(d) if d != v.dim() => Err(BackendError::protocol(format!("embedding dimension {} differs from expected {d}", v.dim()))),
            Some(_) => Ok(v),
            None => {
                *dim = Some(v.dim());
                Ok(v)
            }
        }
    }
}

impl<E: Embedder> Embedder for DimensionChecked<E> {
    fn embed_image(&self, image: &[u8]) -> Result<Embedding, BackendError> {
        check_image(image)?;
        self.check(self.inner.embed_image(image)?)
    }
    fn embed_text(&self, text: &str) -> Result<Embedding, BackendError> {
        check_text("text", text)?;
        self.check(self.inner.embed_text(text)?)
    }
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, BackendError> {
        for t in texts {
            check_text("text", t)?;
        }
        self.inner.embed_texts(texts)?.into_iter().map(|v| self.check(v)).collect()
    }
    fn identifier(&self) -> String {
        self.inner.identifier()
    }
}

/// The set of backends one run uses.
#[derive(Clone)]
pub struct Backends {
    pub captioner: Arc<dyn Captioner>,
    pub chat: Arc<dyn ChatModel>,
    pub judge: Arc<dyn ChatModel>,
    pub embedder: Arc<dyn Embedder>,
}

impl Backends {
    /// Fully offline, deterministic backends derived from `seed`.
    pub fn mock(seed: u64) -> Self {
        Self::mock_with_dim(seed, mock::DEFAULT_MOCK_DIM)
    }

    pub fn mock_with_dim(seed: u64, dim: usize) -> Self {
        let storyteller: Arc<dyn ChatModel> = Arc::new(MockStoryteller::new(seed));
        Backends {
            captioner: Arc::new(MockCaptioner::new()),
            chat: storyteller.clone(),
            judge: storyteller,
            embedder: Arc::new(DimensionChecked::new(SemanticEmbedder::new(seed, dim), Some(dim))),
        }
    }

    pub fn from_config(cfg: &BackendsConfig, seed: u64) -> Result<Self, BackendError> {
        match cfg.mode {
            BackendMode::Mock => Ok(Self::mock_with_dim(seed, cfg.mock_dim.unwrap_or(mock::DEFAULT_MOCK_DIM))),
            BackendMode::Http => {
                let retry = RetryPolicy::from_config(&cfg.retry);
                let chat: Arc<dyn ChatModel> = Arc::new(HttpChat::from_config(&cfg.chat, retry.clone())?);
                let judge: Arc<dyn ChatModel> = match &cfg.judge {
                    Some(j) => Arc::new(HttpChat::from_config(j, retry.clone())?),
                    None => chat.clone(),
                };
                let embedder = HttpEmbedder::from_config(&cfg.embedder, retry.clone())?;
                Ok(Backends {
                    captioner: Arc::new(HttpCaptioner::new(&cfg.captioner.base_url, retry)),
                    chat,
                    judge,
                    embedder: Arc::new(DimensionChecked::new(embedder, Some(cfg.embedder.dim))),
                })
            }
        }
    }

    /// Backend identifiers recorded in reports for provenance.
    pub fn identifiers(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("captioner".to_string(), self.captioner.identifier()),
            ("chat".to_string(), self.chat.identifier()),
            ("judge".to_string(), self.judge.identifier()),
            ("embedder".to_string(), self.embedder.identifier()),
        ])
    }
}
