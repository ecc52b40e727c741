//! Evaluation-album manifests, key-frame extraction, and synthesis of
//! noisy-story training triplets.

mod extractor;
mod manifest;
mod triplets;

pub use extractor::{ExtractError, ExtractorConfig};
pub use manifest::{build_manifest, Collection, Manifest, ManifestError, ManifestViolation, Provenance, FRAMES_PER_COLLECTION};
pub use triplets::{
    read_paragraphs, synthesize_triplets, triplets_to_jsonl, validate_triplet_file, validate_triplet_lines, validate_triplets, ParagraphRecord,
    StoryCaptionTriplet, SynthesisSummary, TripletValidation, DEFAULT_IN_FLIGHT,
};
