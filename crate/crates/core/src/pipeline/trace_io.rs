use std::io::Write;
use std::path::{Path, PathBuf};

use crate::model::IterationTrace;

pub const TRACE_FILE: &str = "trace.json";

/// `<out_dir>/<album_id>/trace.json`
pub fn trace_path(out_dir: &Path, album_id: &str) -> PathBuf {
    out_dir.join(album_id).join(TRACE_FILE)
}

/// Serializes a trace as pretty JSON with a trailing newline.
pub fn trace_to_string(trace: &IterationTrace) -> String {
    let mut s = serde_json::to_string_pretty(trace).expect("trace serializes");
    s.push('\n');
    s
}

/// Writes `contents` next to `path` and renames it into place, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

pub fn write_trace(path: &Path, trace: &IterationTrace) -> std::io::Result<()> {
    write_atomic(path, trace_to_string(trace).as_bytes())
}

pub fn read_trace(path: &Path) -> std::io::Result<IterationTrace> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}
