use serde::{Deserialize, Serialize};

use super::BackendError;
use crate::scalar::FloatScalar;

/// Unit-normalized embedding. The dimension is the length of `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct EmbeddingVector<S> {
    values: Vec<S>,
}

impl<S: FloatScalar> EmbeddingVector<S> {
    /// Normalizes `raw` to unit Euclidean length.
    pub fn normalized(raw: Vec<S>) -> Result<Self, BackendError> {
        if raw.is_empty() {
            return Err(BackendError::protocol("embedding has zero dimension"));
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(BackendError::protocol("embedding contains non-finite values"));
        }
        let norm = raw.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt();
        if norm <= S::zero() {
            return Err(BackendError::protocol("embedding has zero norm"));
        }
        Ok(EmbeddingVector {
            values: raw.into_iter().map(|x| x / norm).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn norm(&self) -> S {
        self.values.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt()
    }

    pub fn dot(&self, other: &Self) -> S {
        self.values.iter().zip(&other.values).fold(S::zero(), |acc, (&a, &b)| acc + a * b)
    }

    /// Converts to another float width and renormalizes.
    pub fn cast<T: FloatScalar>(&self) -> EmbeddingVector<T> {
        let raw: Vec<T> = self.values.iter().map(|&x| T::from(x).expect("float conversion")).collect();
        EmbeddingVector::normalized(raw).expect("cast of a unit vector stays normalizable")
    }

    pub fn negated(&self) -> Self {
        EmbeddingVector {
            values: self.values.iter().map(|&x| -x).collect(),
        }
    }
}
