use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{Album, Category};

pub const FRAMES_PER_COLLECTION: usize = 10;

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "webp"];

/// One album: its frames in order, relative to the frames root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collection {
    pub album_id: String,
    pub category: String,
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// Source video id per album id.
    pub source_videos: BTreeMap<String, String>,
    /// Exact extractor command lines, when frames were extracted by this tool.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extractor_commands: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub collections: Vec<Collection>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestViolation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ManifestViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} manifest violation(s)", .0.len())]
    Violations(Vec<ManifestViolation>),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Sorted names of the entries of `dir` matching `keep`.
fn sorted_entries(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<String>, ManifestError> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        if !keep(&path) {
            continue;
        }
        if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
            if !name.starts_with('.') {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Scans `<root>/<category>/<album_id>/<frame>` into a manifest.
///
/// Categories, albums and frames are ordered lexicographically. Strict mode
/// requires exactly ten frames per album and one of the five standard
/// categories; otherwise unusual categories are accepted with a note.
pub fn build_manifest(root: &Path, strict: bool) -> Result<Manifest, ManifestError> {
    let mut collections = Vec::new();
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    let mut seen_ids = BTreeSet::new();
    let mut source_videos = BTreeMap::new();

    for category in sorted_entries(root, Path::is_dir)? {
        let cat_dir = root.join(&category);
        let standard = Category::from(category.as_str()).is_standard();
        if !standard {
            if strict {
                violations.push(ManifestViolation {
                    path: category.clone(),
                    message: format!("category '{category}' is not one of birthday, camping, christmas, travel, wedding"),
                });
            } else {
                notes.push(format!("category '{category}' is not one of the five standard categories"));
            }
        }
        for album_id in sorted_entries(&cat_dir, Path::is_dir)? {
            let rel_dir = format!("{category}/{album_id}");
            if !seen_ids.insert(album_id.clone()) {
                violations.push(ManifestViolation {
                    path: rel_dir.clone(),
                    message: format!("album id '{album_id}' appears in more than one category"),
                });
                continue;
            }
            let frames: Vec<String> = sorted_entries(&cat_dir.join(&album_id), is_image)?
                .into_iter()
                .map(|f| format!("{rel_dir}/{f}"))
                .collect();
            if frames.is_empty() {
                violations.push(ManifestViolation {
                    path: rel_dir.clone(),
                    message: "album has no frames".into(),
                });
            } else if strict && frames.len() != FRAMES_PER_COLLECTION {
                violations.push(ManifestViolation {
                    path: rel_dir.clone(),
                    message: format!("expected {FRAMES_PER_COLLECTION}, found {}", frames.len()),
                });
            }
            source_videos.insert(album_id.clone(), album_id.clone());
            collections.push(Collection {
                album_id,
                category: category.clone(),
                frames,
            });
        }
    }
    if !violations.is_empty() {
        return Err(ManifestError::Violations(violations));
    }
    Ok(Manifest {
        collections,
        provenance: Provenance {
            source_videos,
            extractor_commands: Vec::new(),
            notes,
        },
    })
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn albums(&self) -> Vec<Album> {
        self.collections
            .iter()
            .map(|c| Album::from_paths(c.album_id.clone(), c.category.as_str(), c.frames.iter().cloned()))
            .collect()
    }

    pub fn album(&self, id: &str) -> Option<Album> {
        self.albums().into_iter().find(|a| a.id == id)
    }
}
