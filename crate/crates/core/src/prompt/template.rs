use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    #[serde(rename = "p0")]
    Initial,
    #[serde(rename = "p1")]
    InitialStructure,
    #[serde(rename = "p_r")]
    Refine,
    #[serde(rename = "p_u")]
    Ultimate,
    #[serde(rename = "m_detail")]
    Detail,
    #[serde(rename = "m_coverage")]
    Coverage,
    #[serde(rename = "m_coherence")]
    Coherence,
    #[serde(rename = "s_vivid")]
    VividRewrite,
    #[serde(rename = "s_antonym")]
    AntonymSwap,
}

impl TemplateId {
    pub const ALL: [TemplateId; 9] = [
        TemplateId::Initial,
        TemplateId::InitialStructure,
        TemplateId::Refine,
        TemplateId::Ultimate,
        TemplateId::Detail,
        TemplateId::Coverage,
        TemplateId::Coherence,
        TemplateId::VividRewrite,
        TemplateId::AntonymSwap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Initial => "p0",
            TemplateId::InitialStructure => "p1",
            TemplateId::Refine => "p_r",
            TemplateId::Ultimate => "p_u",
            TemplateId::Detail => "m_detail",
            TemplateId::Coverage => "m_coverage",
            TemplateId::Coherence => "m_coherence",
            TemplateId::VividRewrite => "s_vivid",
            TemplateId::AntonymSwap => "s_antonym",
        }
    }

    /// File name of the shipped default.
    pub fn file_name(self) -> String {
        format!("{}.txt", self.as_str())
    }

    /// Placeholders the renderer fills for this template.
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateId::Initial => &["captions"],
            TemplateId::InitialStructure => &[],
            TemplateId::Refine => &["records"],
            TemplateId::Ultimate => &["stories", "count"],
            TemplateId::Detail | TemplateId::Coherence => &["story"],
            TemplateId::Coverage => &["captions_group1", "captions_group2", "story"],
            TemplateId::VividRewrite => &["caption"],
            TemplateId::AntonymSwap => &["story"],
        }
    }

    fn default_text(self) -> &'static str {
        match self {
            TemplateId::Initial => include_str!("../../templates/p0.txt"),
            TemplateId::InitialStructure => include_str!("../../templates/p1.txt"),
            TemplateId::Refine => include_str!("../../templates/p_r.txt"),
            TemplateId::Ultimate => include_str!("../../templates/p_u.txt"),
            TemplateId::Detail => include_str!("../../templates/m_detail.txt"),
            TemplateId::Coverage => include_str!("../../templates/m_coverage.txt"),
            TemplateId::Coherence => include_str!("../../templates/m_coherence.txt"),
            TemplateId::VividRewrite => include_str!("../../templates/s_vivid.txt"),
            TemplateId::AntonymSwap => include_str!("../../templates/s_antonym.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| TemplateError::UnknownId(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown template id '{0}'")]
    UnknownId(String),
    #[error("template {id} has no placeholder {{{{{name}}}}}")]
    MissingPlaceholder { id: TemplateId, name: String },
    #[error("template {id} leaves placeholder {{{{{name}}}}} unfilled")]
    Unfilled { id: TemplateId, name: String },
    #[error("cannot read template {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([A-Za-z0-9_]+)\}\}").expect("valid regex"))
}

/// Prompt text with `{{name}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub text: String,
}

impl PromptTemplate {
    /// Checks that the text uses exactly the placeholders the renderer fills.
    pub fn new(id: TemplateId, text: impl Into<String>) -> Result<Self, TemplateError> {
        let t = PromptTemplate { id, text: text.into() };
        let found = t.placeholder_names();
        for name in id.placeholders() {
            if !found.contains(*name) {
                return Err(TemplateError::MissingPlaceholder { id, name: name.to_string() });
            }
        }
        if let Some(extra) = found.iter().find(|n| !id.placeholders().contains(&n.as_str())) {
            return Err(TemplateError::Unfilled { id, name: extra.clone() });
        }
        Ok(t)
    }

    pub fn default_for(id: TemplateId) -> Self {
        PromptTemplate {
            id,
            text: id.default_text().to_string(),
        }
    }

    pub fn placeholder_names(&self) -> BTreeSet<String> {
        placeholder_re().captures_iter(&self.text).map(|c| c[1].to_string()).collect()
    }

    /// Substitutes every placeholder in one pass; values are never re-expanded.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        let names = self.placeholder_names();
        for (k, _) in vars {
            if !names.contains(*k) {
                return Err(TemplateError::MissingPlaceholder { id: self.id, name: k.to_string() });
            }
        }
        let mut out = String::with_capacity(self.text.len());
        let mut last = 0;
        for cap in placeholder_re().captures_iter(&self.text) {
            let m = cap.get(0).expect("whole match");
            let name = &cap[1];
            let value = vars
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::Unfilled { id: self.id, name: name.to_string() })?;
            out.push_str(&self.text[last..m.start()]);
            out.push_str(value);
            last = m.end();
        }
        out.push_str(&self.text[last..]);
        Ok(out)
    }
}

/// All templates one run uses: shipped defaults, optionally overridden from files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::defaults()
    }
}

impl TemplateSet {
    pub fn defaults() -> Self {
        TemplateSet {
            templates: TemplateId::ALL.into_iter().map(|id| (id, PromptTemplate::default_for(id))).collect(),
        }
    }

    pub fn with_overrides(overrides: &BTreeMap<String, PathBuf>) -> Result<Self, TemplateError> {
        let mut set = Self::defaults();
        for (key, path) in overrides {
            let id: TemplateId = key.parse()?;
            set.set(PromptTemplate::new(id, read(path)?)?);
        }
        Ok(set)
    }

    pub fn set(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id, template);
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        self.templates.get(&id).expect("every id has a template")
    }

    /// Writes every template to `dir` under its shipped file name.
    pub fn export(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for t in self.templates.values() {
            std::fs::write(dir.join(t.id.file_name()), &t.text)?;
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, TemplateError> {
    std::fs::read_to_string(path).map_err(|e| TemplateError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
