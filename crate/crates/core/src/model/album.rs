use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Album theme. The five evaluation categories are named; anything else is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Category {
    Birthday,
    Camping,
    Christmas,
    Travel,
    Wedding,
    Other(String),
}

impl Category {
    pub const STANDARD: [Category; 5] = [
        Category::Birthday,
        Category::Camping,
        Category::Christmas,
        Category::Travel,
        Category::Wedding,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            Category::Birthday => "birthday",
            Category::Camping => "camping",
            Category::Christmas => "christmas",
            Category::Travel => "travel",
            Category::Wedding => "wedding",
            Category::Other(s) => s,
        }
    }

    pub fn is_standard(&self) -> bool {
        !matches!(self, Category::Other(_))
    }
}

impl From<String> for Category {
    fn from(s: String) -> Self {
        match s.as_str() {
            "birthday" => Category::Birthday,
            "camping" => Category::Camping,
            "christmas" => Category::Christmas,
            "travel" => Category::Travel,
            "wedding" => Category::Wedding,
            _ => Category::Other(s),
        }
    }
}

impl From<&str> for Category {
    fn from(s: &str) -> Self {
        Category::from(s.to_string())
    }
}

impl From<Category> for String {
    fn from(c: Category) -> Self {
        c.as_str().to_string()
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One photo of an album. `path` is relative to the frames root and never rewritten.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Photo {
    pub id: String,
    pub album_id: String,
    pub path: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Album {
    pub id: String,
    pub category: Category,
    pub photos: Vec<Photo>,
}

impl Album {
    /// Builds an album whose photo ids are their relative paths.
    pub fn from_paths<I, S>(id: impl Into<String>, category: impl Into<Category>, paths: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let id = id.into();
        let photos = paths
            .into_iter()
            .enumerate()
            .map(|(index, p)| {
                let path = p.into();
                Photo {
                    id: path.clone(),
                    album_id: id.clone(),
                    path,
                    index,
                }
            })
            .collect();
        Album {
            id,
            category: category.into(),
            photos,
        }
    }

    pub fn len(&self) -> usize {
        self.photos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photos.is_empty()
    }

    pub fn paths(&self) -> Vec<String> {
        self.photos.iter().map(|p| p.path.clone()).collect()
    }
}

/// A broken album invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub photo_ids: Vec<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.photo_ids.is_empty() {
            write!(f, "{}: {}", self.field, self.message)
        } else {
            write!(f, "{} [{}]: {}", self.field, self.photo_ids.join(", "), self.message)
        }
    }
}

pub fn validate_album(album: &Album) -> Vec<Violation> {
    let mut out = Vec::new();
    if album.photos.is_empty() {
        out.push(Violation {
            field: "photos".into(),
            photo_ids: vec![],
            message: "photos empty".into(),
        });
        return out;
    }

    let mut by_path: BTreeMap<&str, Vec<&Photo>> = BTreeMap::new();
    for (pos, photo) in album.photos.iter().enumerate() {
        if photo.path.is_empty() {
            out.push(Violation {
                field: "path".into(),
                photo_ids: vec![photo.id.clone()],
                message: format!("empty path at index {pos}"),
            });
        } else {
            by_path.entry(photo.path.as_str()).or_default().push(photo);
        }
        if photo.index != pos {
            out.push(Violation {
                field: "index".into(),
                photo_ids: vec![photo.id.clone()],
                message: format!("index {} at position {pos}; indices must run 0..{}", photo.index, album.photos.len()),
            });
        }
        if photo.album_id != album.id {
            out.push(Violation {
                field: "album_id".into(),
                photo_ids: vec![photo.id.clone()],
                message: format!("photo belongs to album '{}', not '{}'", photo.album_id, album.id),
            });
        }
    }

    for (path, photos) in by_path {
        if photos.len() > 1 {
            let indices: Vec<String> = photos.iter().map(|p| p.index.to_string()).collect();
            out.push(Violation {
                field: "path".into(),
                photo_ids: photos.iter().map(|p| p.id.clone()).collect(),
                message: format!("duplicate path '{path}' at indices {}", indices.join(" and ")),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_album_has_no_violations() {
        let album = Album::from_paths("a1", "travel", (0..10).map(|i| format!("travel/a1/{i:02}.jpg")));
        assert!(validate_album(&album).is_empty());
    }

    #[test]
    fn empty_album_is_flagged() {
        let album = Album::from_paths("a1", "travel", Vec::<String>::new());
        let v = validate_album(&album);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "photos empty");
    }

    #[test]
    fn duplicate_paths_name_both_indices() {
        let mut paths: Vec<String> = (0..10).map(|i| format!("p{i}.jpg")).collect();
        paths[7] = paths[2].clone();
        let album = Album::from_paths("a1", "wedding", paths);
        let v = validate_album(&album);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("indices 2 and 7"), "{}", v[0]);
        assert_eq!(v[0].photo_ids.len(), 2);
    }

    #[test]
    fn non_contiguous_indices_flagged() {
        let mut album = Album::from_paths("a1", "wedding", ["x.jpg", "y.jpg"]);
        album.photos[1].index = 5;
        let v = validate_album(&album);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "index");
    }

    #[test]
    fn category_roundtrip() {
        for c in Category::STANDARD {
            let s: String = c.clone().into();
            assert_eq!(Category::from(s), c);
        }
        assert_eq!(Category::from("picnic"), Category::Other("picnic".into()));
        assert!(!Category::from("picnic").is_standard());
    }
}
