use serde::{Deserialize, Serialize};

use super::{Album, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionKind {
    Plain,
    StoryAware,
}

/// Caption of one photo at a given round. Round 0 captions are plain, later ones story-aware.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub photo_id: String,
    pub text: String,
    pub round: u32,
    pub kind: CaptionKind,
}

impl Caption {
    pub fn new(photo_id: impl Into<String>, text: impl Into<String>, round: u32) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyText("caption"));
        }
        let kind = if round == 0 {
            CaptionKind::Plain
        } else {
            CaptionKind::StoryAware
        };
        Ok(Caption {
            photo_id: photo_id.into(),
            text,
            round,
            kind,
        })
    }

    pub fn is_consistent(&self) -> bool {
        !self.text.trim().is_empty() && ((self.round == 0) == (self.kind == CaptionKind::Plain))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryChunk {
    pub photo_id: String,
    pub text: String,
}

impl StoryChunk {
    pub fn new(photo_id: impl Into<String>, text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyText("story chunk"));
        }
        Ok(StoryChunk {
            photo_id: photo_id.into(),
            text,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoryStage {
    Initial,
    Refined,
    Ultimate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub album_id: String,
    pub stage: StoryStage,
    pub round: u32,
    pub chunks: Vec<StoryChunk>,
}

impl Story {
    /// Pairs chunk texts with the album's photos in order.
    pub fn for_album<S: AsRef<str>>(album: &Album, stage: StoryStage, round: u32, texts: &[S]) -> Result<Self, ModelError> {
        if texts.len() != album.photos.len() {
            return Err(ModelError::ChunkCount {
                expected: album.photos.len(),
                found: texts.len(),
            });
        }
        let chunks = album
            .photos
            .iter()
            .zip(texts)
            .map(|(p, t)| StoryChunk::new(p.id.clone(), t.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Story {
            album_id: album.id.clone(),
            stage,
            round,
            chunks,
        })
    }

    /// Chunks joined by a single newline.
    pub fn text(&self) -> String {
        self.chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join("\n")
    }

    pub fn texts(&self) -> Vec<String> {
        self.chunks.iter().map(|c| c.text.clone()).collect()
    }

    /// True when chunk `i` belongs to photo `i` for every photo.
    pub fn is_aligned_with(&self, album: &Album) -> bool {
        self.chunks.len() == album.photos.len()
            && self.chunks.iter().zip(&album.photos).all(|(c, p)| c.photo_id == p.id)
    }
}

/// Caption/story record exchanged with the chat model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub img_path: String,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_story: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_story: Option<String>,
}

impl PairRecord {
    pub fn new(img_path: impl Into<String>, caption: impl Into<String>) -> Self {
        PairRecord {
            img_path: img_path.into(),
            caption: caption.into(),
            initial_story: None,
            refine_caption: None,
            refine_story: None,
        }
    }

    /// Records for a round-0 story: one per photo, in album order.
    pub fn from_initial(album: &Album, captions: &[Caption], story: &Story) -> Result<Vec<PairRecord>, ModelError> {
        let n = album.photos.len();
        if captions.len() != n || story.chunks.len() != n {
            return Err(ModelError::ChunkCount {
                expected: n,
                found: if captions.len() != n { captions.len() } else { story.chunks.len() },
            });
        }
        Ok(album
            .photos
            .iter()
            .zip(captions)
            .zip(&story.chunks)
            .map(|((p, c), s)| PairRecord {
                img_path: p.path.clone(),
                caption: c.text.clone(),
                initial_story: Some(s.text.clone()),
                refine_caption: None,
                refine_story: None,
            })
            .collect())
    }

    /// The story text a revision should start from: the latest refined story, else the initial one.
    pub fn current_story(&self) -> Option<&str> {
        self.refine_story.as_deref().or(self.initial_story.as_deref())
    }
}
