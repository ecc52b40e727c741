use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

/// Invocation contract for the external key-frame extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    pub program: String,
    /// Scene-change score above which a frame is kept.
    pub threshold: f64,
    pub output_pattern: String,
    pub extra_args: Vec<String>,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            program: "ffmpeg".into(),
            threshold: 0.4,
            output_pattern: "%04d.jpg".into(),
            extra_args: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("threshold must be in [0, 1], got {0}")]
    BadThreshold(f64),
    #[error("cannot create {path}: {source}")]
    OutputDir { path: PathBuf, source: std::io::Error },
    #[error("cannot start '{program}': {source}")]
    Spawn { program: String, source: std::io::Error },
    #[error("extractor exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
}

impl ExtractorConfig {
    /// Program arguments for extracting `input` into `out_dir`.
    pub fn args(&self, input: &Path, out_dir: &Path) -> Vec<String> {
        let mut args = vec![
            "-i".to_string(),
            input.display().to_string(),
            "-vf".into(),
            format!("select='gt(scene,{})'", self.threshold),
            "-vsync".into(),
            "vfr".into(),
        ];
        args.extend(self.extra_args.iter().cloned());
        args.push(out_dir.join(&self.output_pattern).display().to_string());
        args
    }

    /// The exact command line, as recorded in provenance notes.
    pub fn command_line(&self, input: &Path, out_dir: &Path) -> String {
        std::iter::once(self.program.clone()).chain(self.args(input, out_dir)).collect::<Vec<_>>().join(" ")
    }

    /// Runs the extractor and returns the command line it ran.
    pub fn run(&self, input: &Path, out_dir: &Path) -> Result<String, ExtractError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ExtractError::BadThreshold(self.threshold));
        }
        std::fs::create_dir_all(out_dir).map_err(|source| ExtractError::OutputDir {
            path: out_dir.to_path_buf(),
            source,
        })?;
        let output = Command::new(&self.program)
            .args(self.args(input, out_dir))
            .output()
            .map_err(|source| ExtractError::Spawn {
                program: self.program.clone(),
                source,
            })?;
        if !output.status.success() {
            return Err(ExtractError::Failed {
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        Ok(self.command_line(input, out_dir))
    }
}
