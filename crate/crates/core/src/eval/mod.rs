//! Homogeneity of story sets.
//!
//! Each text is embedded, the set's centroid is taken, and the score is the
//! mean cosine similarity between the centroid and each member. Identical
//! texts score 1. Scores are reported raw: cosine admits negatives, and
//! sentence-embedding sets in practice land in [0, 1].

mod embed;
mod report;

use std::fmt;

use thiserror::Error;

use crate::writer::{Condition, Premise, Story};

pub use embed::{
    build_embedder, EmbedError, Embedder, EmbedderConfig, EmbedderKind, HttpEmbedder, TestEmbedder,
    TEST_EMBEDDER_DIM,
};
pub use report::{emit_chart, emit_report, render_chart, HomogeneityReport, HomogeneityRow, ReportError};

/// Norms at or below this are treated as zero.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    components: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("embedding has no components")]
    EmptyVector,
    #[error("embedding component {index} is not finite")]
    NonFinite { index: usize },
    #[error("no vectors given")]
    NoVectors,
    #[error("need at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("degenerate set: centroid norm {norm:e} (members cancel out)")]
    DegenerateCentroid { norm: f64 },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("invalid story set: {0}")]
    InvalidSet(String),
    #[error("paragraph {index}: {source}")]
    AtParagraph {
        index: usize,
        #[source]
        source: Box<EvalError>,
    },
}

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Result<Self, EvalError> {
        if components.is_empty() {
            return Err(EvalError::EmptyVector);
        }
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(EvalError::NonFinite { index });
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64, EvalError> {
        same_dim(self.dim(), other.dim())?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn scaled(&self, k: f64) -> Result<Self, EvalError> {
        Self::new(self.components.iter().map(|c| c * k).collect())
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.components
    }
}

fn same_dim(expected: usize, found: usize) -> Result<(), EvalError> {
    if expected == found {
        Ok(())
    } else {
        Err(EvalError::DimMismatch { expected, found })
    }
}

/// Componentwise mean.
pub fn centroid(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector, EvalError> {
    let first = vectors.first().ok_or(EvalError::NoVectors)?;
    let dim = first.dim();
    let mut sum = vec![0.0; dim];
    for v in vectors {
        same_dim(dim, v.dim())?;
        for (s, c) in sum.iter_mut().zip(&v.components) {
            *s += c;
        }
    }
    let n = vectors.len() as f64;
    EmbeddingVector::new(sum.into_iter().map(|s| s / n).collect())
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EvalError> {
    let dot = a.dot(b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na <= EPSILON || nb <= EPSILON {
        return Err(EvalError::ZeroNorm);
    }
    Ok(dot / (na * nb))
}

/// Mean cosine similarity between the centroid and each vector.
pub fn homogeneity_score(vectors: &[EmbeddingVector]) -> Result<f64, EvalError> {
    if vectors.len() < 2 {
        return Err(if vectors.is_empty() {
            EvalError::NoVectors
        } else {
            EvalError::TooFewVectors(vectors.len())
        });
    }
    let c = centroid(vectors)?;
    for v in vectors {
        if v.norm() <= EPSILON {
            return Err(EvalError::ZeroNorm);
        }
    }
    let norm = c.norm();
    if norm <= EPSILON {
        return Err(EvalError::DegenerateCentroid { norm });
    }
    let mut total = 0.0;
    for v in vectors {
        total += cosine_similarity(&c, v)?;
    }
    Ok(total / vectors.len() as f64)
}

/// Stories sharing one premise, one condition and one paragraph count.
#[derive(Debug, Clone)]
pub struct StorySet {
    stories: Vec<Story>,
}

impl StorySet {
    pub fn new(stories: Vec<Story>) -> Result<Self, EvalError> {
        let first = match stories.as_slice() {
            [] | [_] => {
                return Err(EvalError::InvalidSet(format!(
                    "need at least 2 stories, got {}",
                    stories.len()
                )))
            }
            [first, ..] => first,
        };
        for (i, s) in stories.iter().enumerate() {
            if s.premise != first.premise {
                return Err(EvalError::InvalidSet(format!(
                    "story {i} has premise `{}`, expected `{}`",
                    s.premise, first.premise
                )));
            }
            if s.condition != first.condition {
                return Err(EvalError::InvalidSet(format!("story {i} is {}, expected {}", s.condition, first.condition)));
            }
            if s.paragraphs.len() != first.paragraphs.len() {
                return Err(EvalError::InvalidSet(format!(
                    "story {i} has {} paragraphs, expected {}",
                    s.paragraphs.len(),
                    first.paragraphs.len()
                )));
            }
        }
        Ok(Self { stories })
    }

    pub fn premise(&self) -> &Premise {
        &self.stories[0].premise
    }

    pub fn condition(&self) -> Condition {
        self.stories[0].condition
    }

    pub fn len(&self) -> usize {
        self.stories.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn paragraph_count(&self) -> usize {
        self.stories[0].paragraphs.len()
    }

    pub fn stories(&self) -> &[Story] {
        &self.stories
    }
}

impl fmt::Display for StorySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {} ({} stories)", self.premise(), self.condition(), self.len())
    }
}

/// One score per paragraph index (0-based positions in the result).
pub fn paragraph_homogeneity(set: &StorySet, embedder: &dyn Embedder) -> Result<Vec<f64>, EvalError> {
    (0..set.paragraph_count())
        .map(|i| {
            let texts: Vec<&str> = set.stories.iter().map(|s| s.paragraphs[i].as_str()).collect();
            embedder
                .embed_batch(&texts)
                .map_err(EvalError::from)
                .and_then(|vs| homogeneity_score(&vs))
                .map_err(|e| EvalError::AtParagraph {
                    index: i + 1,
                    source: Box::new(e),
                })
        })
        .collect()
}
