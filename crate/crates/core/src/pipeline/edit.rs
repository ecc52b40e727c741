use crate::model::Story;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EditError {
    #[error("next story is empty")]
    EmptyNext,
}

/// Character-level Levenshtein distance (Unicode scalar values, unit costs).
pub fn levenshtein(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

/// Edit distance from `prev` to `next` divided by the char length of `next`.
pub fn edit_ratio_text<S: Scalar>(prev: &str, next: &str) -> Result<S, EditError> {
    let len = next.chars().count();
    if len == 0 {
        return Err(EditError::EmptyNext);
    }
    Ok(S::from_count(levenshtein(prev, next)) / S::from_count(len))
}

/// Edit ratio between two stories, each taken as its chunks joined by a newline.
pub fn edit_ratio<S: Scalar>(prev: &Story, next: &Story) -> Result<S, EditError> {
    edit_ratio_text(&prev.text(), &next.text())
}

/// Convergence test: strictly below the threshold.
pub fn converged<S: Scalar>(ratio: S, epsilon: S) -> bool {
    ratio < epsilon
}
