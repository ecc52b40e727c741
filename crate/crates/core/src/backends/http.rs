use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde_json::{json, Value};

use super::{
    check_image, check_messages, check_text, BackendError, Captioner, ChatMessage, ChatModel, DecodingParams, Embedder, Embedding,
    EmbeddingVector, RetryPolicy,
};
use crate::model::{ChatEndpointConfig, EmbedderEndpointConfig};

const REQUEST_TIMEOUT: Duration = Duration::from_secs(300);

fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new().timeout(REQUEST_TIMEOUT).try_proxy_from_env(true).build()
}

fn api_key(env: &Option<String>) -> Result<Option<String>, BackendError> {
    match env {
        None => Ok(None),
        Some(name) => std::env::var(name)
            .map(Some)
            .map_err(|_| BackendError::invalid_request(format!("credential variable {name} is not set"))),
    }
}

/// POSTs `body` once and classifies the outcome.
fn post_json(agent: &ureq::Agent, url: &str, key: Option<&str>, body: &Value) -> Result<Value, BackendError> {
    let mut req = agent.post(url).set("Content-Type", "application/json");
    if let Some(k) = key {
        req = req.set("Authorization", &format!("Bearer {k}"));
    }
    match req.send_string(&body.to_string()) {
        Ok(resp) => resp
            .into_json::<Value>()
            .map_err(|e| BackendError::protocol(format!("response from {url} is not JSON: {e}"))),
        Err(ureq::Error::Status(code, resp)) => {
            let text = resp.into_string().unwrap_or_default();
            let snippet: String = text.chars().take(300).collect();
            Err(match code {
                429 => BackendError::rate_limited(format!("HTTP 429 from {url}: {snippet}")),
                500..=599 => BackendError::service(true, format!("HTTP {code} from {url}: {snippet}")),
                _ => BackendError::service(false, format!("HTTP {code} from {url}: {snippet}")),
            })
        }
        Err(ureq::Error::Transport(t)) => Err(BackendError::transport(format!("{url}: {t}"))),
    }
}

/// Chat-completions style client.
#[derive(Debug)]
pub struct HttpChat {
    endpoint: String,
    model: String,
    key: Option<String>,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl HttpChat {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, key: Option<String>, retry: RetryPolicy) -> Self {
        HttpChat {
            endpoint: endpoint.into(),
            model: model.into(),
            key,
            retry,
            agent: agent(),
        }
    }

    pub fn from_config(cfg: &ChatEndpointConfig, retry: RetryPolicy) -> Result<Self, BackendError> {
        Ok(Self::new(&cfg.endpoint, &cfg.model, api_key(&cfg.api_key_env)?, retry))
    }

    pub fn request_body(&self, messages: &[ChatMessage], decoding: &DecodingParams) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": decoding.temperature,
        });
        if let Some(max) = decoding.max_tokens {
            body["max_tokens"] = json!(max);
        }
        body
    }
}

impl ChatModel for HttpChat {
    fn chat(&self, messages: &[ChatMessage], decoding: &DecodingParams) -> Result<String, BackendError> {
        check_messages(messages)?;
        let body = self.request_body(messages, decoding);
        let resp = self.retry.run(|_| post_json(&self.agent, &self.endpoint, self.key.as_deref(), &body))?;
        let content = resp
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::protocol("response lacks choices[0].message.content"))?;
        let content = content.trim_end();
        if content.is_empty() {
            return Err(BackendError::protocol("chat model returned an empty message"));
        }
        Ok(content.to_string())
    }

    fn identifier(&self) -> String {
        format!("{}@{}", self.model, self.endpoint)
    }
}

fn image_data_url(image: &[u8]) -> String {
    let mime = if image.starts_with(b"\x89PNG") {
        "image/png"
    } else if image.starts_with(&[0xFF, 0xD8]) {
        "image/jpeg"
    } else {
        "application/octet-stream"
    };
    format!("data:{mime};base64,{}", B64.encode(image))
}

/// Embedding endpoint taking `{model, input: [...]}`. Images travel as base64 data URLs.
#[derive(Debug)]
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    key: Option<String>,
    dim: usize,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, key: Option<String>, dim: usize, retry: RetryPolicy) -> Self {
        HttpEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            key,
            dim,
            retry,
            agent: agent(),
        }
    }

    pub fn from_config(cfg: &EmbedderEndpointConfig, retry: RetryPolicy) -> Result<Self, BackendError> {
        Ok(Self::new(&cfg.endpoint, &cfg.model, api_key(&cfg.api_key_env)?, cfg.dim, retry))
    }

    fn embed_inputs(&self, inputs: Vec<String>) -> Result<Vec<Embedding>, BackendError> {
        let body = json!({ "model": self.model, "input": inputs });
        let resp = self.retry.run(|_| post_json(&self.agent, &self.endpoint, self.key.as_deref(), &body))?;
        let vectors = parse_embedding_response(&resp)?;
        if vectors.len() != inputs.len() {
            return Err(BackendError::protocol(format!("{} embeddings for {} inputs", vectors.len(), inputs.len())));
        }
        vectors
            .into_iter()
            .map(|raw| {
                if raw.len() != self.dim {
                    return Err(BackendError::protocol(format!("embedding dimension {} differs from configured {}", raw.len(), self.dim)));
                }
                EmbeddingVector::normalized(raw)
            })
            .collect()
    }
}

/// Accepts `[[..], ..]`, `{"embeddings": [[..]]}` or `{"data": [{"embedding": [..], "index": i}]}`.
pub(crate) fn parse_embedding_response(resp: &Value) -> Result<Vec<Vec<f64>>, BackendError> {
    let floats = |v: &Value| -> Result<Vec<f64>, BackendError> {
        v.as_array()
            .ok_or_else(|| BackendError::protocol("embedding is not an array"))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| BackendError::protocol("embedding holds a non-number")))
            .collect()
    };
    if let Some(list) = resp.as_array() {
        return list.iter().map(floats).collect();
    }
    if let Some(list) = resp.get("embeddings").and_then(Value::as_array) {
        return list.iter().map(floats).collect();
    }
    if let Some(list) = resp.get("data").and_then(Value::as_array) {
        let mut items: Vec<(u64, Vec<f64>)> = list
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let idx = item.get("index").and_then(Value::as_u64).unwrap_or(i as u64);
                let emb = item.get("embedding").ok_or_else(|| BackendError::protocol("data item lacks embedding"))?;
                Ok((idx, floats(emb)?))
            })
            .collect::<Result<_, BackendError>>()?;
        items.sort_by_key(|(i, _)| *i);
        return Ok(items.into_iter().map(|(_, v)| v).collect());
    }
    Err(BackendError::protocol("unrecognized embedding response shape"))
}

impl Embedder for HttpEmbedder {
    fn embed_image(&self, image: &[u8]) -> Result<Embedding, BackendError> {
        check_image(image)?;
        Ok(self.embed_inputs(vec![image_data_url(image)])?.remove(0))
    }

    fn embed_text(&self, text: &str) -> Result<Embedding, BackendError> {
        check_text("text", text)?;
        Ok(self.embed_inputs(vec![text.to_string()])?.remove(0))
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>, BackendError> {
        for t in texts {
            check_text("text", t)?;
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        self.embed_inputs(texts.to_vec())
    }

    fn identifier(&self) -> String {
        format!("{}@{}", self.model, self.endpoint)
    }
}

/// Client for the story-aware captioner service (`POST /caption`, `POST /refine`).
#[derive(Debug)]
pub struct HttpCaptioner {
    base_url: String,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl HttpCaptioner {
    pub fn new(base_url: &str, retry: RetryPolicy) -> Self {
        HttpCaptioner {
            base_url: base_url.trim_end_matches('/').to_string(),
            retry,
            agent: agent(),
        }
    }

    pub fn caption_request(image: &[u8]) -> Value {
        json!({ "image_b64": B64.encode(image) })
    }

    pub fn refine_request(image: &[u8], story: &str) -> Value {
        json!({ "image_b64": B64.encode(image), "story": story })
    }

    fn call(&self, route: &str, body: &Value) -> Result<String, BackendError> {
        let url = format!("{}{route}", self.base_url);
        let resp = self.retry.run(|_| post_json(&self.agent, &url, None, body))?;
        let caption = resp
            .get("caption")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::protocol(format!("{route} response lacks a caption string")))?;
        let caption = caption.split_whitespace().collect::<Vec<_>>().join(" ");
        if caption.is_empty() {
            return Err(BackendError::protocol(format!("{route} returned an empty caption")));
        }
        Ok(caption)
    }
}

impl Captioner for HttpCaptioner {
    fn caption(&self, image: &[u8]) -> Result<String, BackendError> {
        check_image(image)?;
        self.call("/caption", &Self::caption_request(image))
    }

    fn refine_caption(&self, image: &[u8], story_chunk: &str) -> Result<String, BackendError> {
        check_image(image)?;
        check_text("story chunk", story_chunk)?;
        self.call("/refine", &Self::refine_request(image, story_chunk))
    }

    fn identifier(&self) -> String {
        format!("captioner@{}", self.base_url)
    }
}
