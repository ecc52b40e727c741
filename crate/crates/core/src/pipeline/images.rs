use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("image '{path}' not found")]
    NotFound { path: String },
    #[error("image path '{path}' escapes the image root")]
    Escapes { path: String },
    #[error("cannot read image '{path}': {reason}")]
    Io { path: String, reason: String },
}

/// Resolves a photo's relative path to its bytes.
pub trait ImageStore: Send + Sync {
    fn load(&self, rel_path: &str) -> Result<Vec<u8>, ImageError>;
}

/// Images stored on disk under a root directory.
#[derive(Debug, Clone)]
pub struct DirImageStore {
    root: PathBuf,
}

impl DirImageStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirImageStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl ImageStore for DirImageStore {
    fn load(&self, rel_path: &str) -> Result<Vec<u8>, ImageError> {
        let rel = Path::new(rel_path);
        if rel.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
            return Err(ImageError::Escapes { path: rel_path.into() });
        }
        std::fs::read(self.root.join(rel)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ImageError::NotFound { path: rel_path.into() },
            _ => ImageError::Io {
                path: rel_path.into(),
                reason: e.to_string(),
            },
        })
    }
}

/// In-memory images keyed by relative path.
#[derive(Debug, Clone, Default)]
pub struct MemoryImageStore {
    images: HashMap<String, Vec<u8>>,
}

impl MemoryImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rel_path: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.images.insert(rel_path.into(), bytes.into());
    }

    pub fn with(mut self, rel_path: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        self.insert(rel_path, bytes);
        self
    }
}

impl ImageStore for MemoryImageStore {
    fn load(&self, rel_path: &str) -> Result<Vec<u8>, ImageError> {
        self.images.get(rel_path).cloned().ok_or_else(|| ImageError::NotFound { path: rel_path.into() })
    }
}
