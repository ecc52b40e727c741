use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendErrorKind {
    /// Connection-level failure before a response arrived.
    Transport,
    /// The service answered with something we cannot use.
    Protocol,
    RateLimited,
    /// The service reported an error status.
    Service,
    /// The caller broke a precondition; nothing was sent.
    InvalidRequest,
}

/// Failure of a model backend call. Rate-limited errors are always retryable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendError {
    kind: BackendErrorKind,
    retryable: bool,
    detail: String,
}

impl BackendError {
    pub fn transport(detail: impl Into<String>) -> Self {
        Self::with(BackendErrorKind::Transport, true, detail)
    }

    pub fn protocol(detail: impl Into<String>) -> Self {
        Self::with(BackendErrorKind::Protocol, false, detail)
    }

    pub fn rate_limited(detail: impl Into<String>) -> Self {
        Self::with(BackendErrorKind::RateLimited, true, detail)
    }

    pub fn service(retryable: bool, detail: impl Into<String>) -> Self {
        Self::with(BackendErrorKind::Service, retryable, detail)
    }

    pub fn invalid_request(detail: impl Into<String>) -> Self {
        Self::with(BackendErrorKind::InvalidRequest, false, detail)
    }

    fn with(kind: BackendErrorKind, retryable: bool, detail: impl Into<String>) -> Self {
        BackendError {
            kind,
            retryable: retryable || kind == BackendErrorKind::RateLimited,
            detail: detail.into(),
        }
    }

    pub fn kind(&self) -> BackendErrorKind {
        self.kind
    }

    pub fn is_retryable(&self) -> bool {
        self.retryable
    }

    pub fn detail(&self) -> &str {
        &self.detail
    }
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            BackendErrorKind::Transport => "transport",
            BackendErrorKind::Protocol => "protocol",
            BackendErrorKind::RateLimited => "rate limited",
            BackendErrorKind::Service => "service",
            BackendErrorKind::InvalidRequest => "invalid request",
        };
        write!(f, "{kind} error: {}", self.detail)
    }
}

impl std::error::Error for BackendError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_limited_is_always_retryable() {
        let e = BackendError::with(BackendErrorKind::RateLimited, false, "429");
        assert!(e.is_retryable());
        assert!(BackendError::rate_limited("x").is_retryable());
        assert!(!BackendError::protocol("x").is_retryable());
    }
}
