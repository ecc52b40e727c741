//! The storytelling loop: initial story, story-aware refinement rounds until
//! the edit ratio drops below the threshold, then a coherence pass. Traces
//! are checkpointed after each round and runs resume from them.

mod edit;
mod engine;
mod images;
mod trace_io;

pub use edit::{converged, edit_ratio, edit_ratio_text, levenshtein, EditError};
pub use engine::{Engine, PipelineError, STEP_FINALIZE, STEP_INITIAL, STEP_REFINE};
pub use images::{DirImageStore, ImageError, ImageStore, MemoryImageStore};
pub use trace_io::{read_trace, trace_path, trace_to_string, write_atomic, write_trace, TRACE_FILE};
