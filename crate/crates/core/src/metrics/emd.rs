use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::transport::{SolverError, TransportPlan, TransportProblem};
use crate::backends::{BackendError, Embedder, EmbeddingVector};
use crate::FloatScalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmdError {
    #[error("no {0} to align")]
    Empty(&'static str),
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("embedding is not unit length (norm {0})")]
    NotUnit(f64),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How cosine similarity becomes a transport cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// `1 - cos`, so lower scores mean better alignment.
    #[default]
    Dissimilarity,
    /// `cos` itself, for analysis only: the minimum then picks the least similar pairing.
    RawSimilarity,
}

fn check_unit<S: FloatScalar>(v: &EmbeddingVector<S>) -> Result<(), EmdError> {
    let norm = v.norm();
    if (norm - S::one()).abs() > S::norm_tolerance() {
        return Err(EmdError::NotUnit(norm.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// `1 - <u, v>` for unit vectors, clamped to `[0, 2]` against rounding.
pub fn cosine_cost<S: FloatScalar>(u: &EmbeddingVector<S>, v: &EmbeddingVector<S>) -> Result<S, EmdError> {
    if u.dim() != v.dim() {
        return Err(EmdError::DimMismatch(u.dim(), v.dim()));
    }
    check_unit(u)?;
    check_unit(v)?;
    let two = S::one() + S::one();
    Ok((S::one() - u.dot(v)).max(S::zero()).min(two))
}

/// Cost matrix between images (rows) and sentences (columns).
///
/// In raw-similarity mode the entries are shifted by +1 to stay
/// non-negative; [`emd_from_embeddings`] removes the shift again.
pub fn cost_matrix<S: FloatScalar>(images: &[EmbeddingVector<S>], sentences: &[EmbeddingVector<S>], mode: CostMode) -> Result<Array2<S>, EmdError> {
    let mut cost = Array2::from_elem((images.len(), sentences.len()), S::zero());
    for (i, u) in images.iter().enumerate() {
        for (j, v) in sentences.iter().enumerate() {
            let c = cosine_cost(u, v)?;
            cost[(i, j)] = match mode {
                CostMode::Dissimilarity => c,
                CostMode::RawSimilarity => (S::one() + S::one()) - c,
            };
        }
    }
    Ok(cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmdResult<S> {
    /// `100 x` the optimal transport cost.
    pub score: S,
    pub plan: TransportPlan<S>,
}

/// Exact EMD between uniform distributions over image and sentence embeddings.
pub fn emd_from_embeddings<S: FloatScalar>(
    images: &[EmbeddingVector<S>],
    sentences: &[EmbeddingVector<S>],
    mode: CostMode,
) -> Result<EmdResult<S>, EmdError> {
    if images.is_empty() {
        return Err(EmdError::Empty("images"));
    }
    if sentences.is_empty() {
        return Err(EmdError::Empty("sentences"));
    }
    let cost = cost_matrix(images, sentences, mode)?;
    let plan = TransportProblem::uniform(cost)?.solve()?;
    let total = match mode {
        CostMode::Dissimilarity => plan.total_cost,
        CostMode::RawSimilarity => plan.total_cost - S::one(),
    };
    let hundred = S::from_f64(100.0).expect("representable");
    Ok(EmdResult { score: total * hundred, plan })
}

/// Embeds every image and sentence and returns the EMD score (0 to 200, lower is better).
pub fn emd_score(images: &[Vec<u8>], sentences: &[String], embedder: &dyn Embedder, mode: CostMode) -> Result<f64, EmdError> {
    if images.is_empty() {
        return Err(EmdError::Empty("images"));
    }
    if sentences.is_empty() {
        return Err(EmdError::Empty("sentences"));
    }
    let img: Vec<_> = images.iter().map(|b| embedder.embed_image(b)).collect::<Result<_, _>>()?;
    let txt = embedder.embed_texts(sentences)?;
    Ok(emd_from_embeddings(&img, &txt, mode)?.score)
}
