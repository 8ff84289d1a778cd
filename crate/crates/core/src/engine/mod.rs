//! Outline enumeration.
//!
//! A spec is grounded over its scenes and searched depth first. Models are
//! produced in lexicographic order: scene 1 varies slowest, and within a
//! scene candidates follow function declaration order, then param order.
//! State is updated incrementally (occurrence counts, previous function,
//! used params) and a branch is cut as soon as the remaining scenes cannot
//! cover the unmet `at_least` minima.

mod check;
mod pool;
mod search;

use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{validate_spec, Diagnostic, Outline, OutlineSpec};

pub use check::{check_outline, CheckError, Violation};
pub use pool::{
    read_pool_file, sample_index, sample_uniform, write_pool_file, OutlinePool, PoolError,
    PoolHeader, PoolReader, PoolSummary,
};

use search::{Grounded, Search};

/// Default bound on the number of models a single search may produce.
pub const DEFAULT_MODEL_CAP: u64 = 5_000_000;

/// Written into pool file headers.
pub const GENERATOR_VERSION: &str = concat!("fable-engine ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// A search producing more models than this fails with [`EngineError::CapExceeded`].
    pub max_models: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_models: DEFAULT_MODEL_CAP,
        }
    }
}

impl Limits {
    pub fn with_cap(max_models: u64) -> Self {
        Self { max_models }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("spec has {} problem(s); first: {}", .0.len(), .0[0])]
    InvalidSpec(Vec<Diagnostic>),
    #[error("more than {cap} outlines; raise the model cap or tighten the constraints")]
    CapExceeded { cap: u64 },
    #[error("spec has {0} scene choices, more than a pool row can index")]
    TooManyChoices(usize),
}

fn ground(spec: &OutlineSpec) -> Result<Arc<Grounded>, EngineError> {
    let diagnostics = validate_spec(spec);
    if !diagnostics.is_empty() {
        return Err(EngineError::InvalidSpec(diagnostics));
    }
    let g = Grounded::new(spec);
    if g.choices.len() > usize::from(u16::MAX) {
        return Err(EngineError::TooManyChoices(g.choices.len()));
    }
    Ok(Arc::new(g))
}

/// Content hash of a spec's canonical source form.
pub fn spec_fingerprint(spec: &OutlineSpec) -> String {
    let digest = Sha256::digest(spec.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Streams every model of a spec, in enumeration order.
///
/// Yields `Err(CapExceeded)` once, in place of the model that would exceed
/// the cap, and then ends.
pub struct Outlines {
    g: Arc<Grounded>,
    search: Search,
    emitted: u64,
    cap: u64,
    finished: bool,
}

impl Iterator for Outlines {
    type Item = Result<Outline, EngineError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        if !self.search.next_model() {
            self.finished = true;
            return None;
        }
        if self.emitted == self.cap {
            self.finished = true;
            return Some(Err(EngineError::CapExceeded { cap: self.cap }));
        }
        self.emitted += 1;
        let assignments = self
            .search
            .current()
            .iter()
            .map(|&c| self.g.alphabet[c as usize].clone())
            .collect();
        Some(Ok(Outline::new(assignments)))
    }
}

/// Enumerates all models with the default cap.
pub fn enumerate_all(spec: &OutlineSpec) -> Result<Outlines, EngineError> {
    enumerate_with(spec, Limits::default())
}

pub fn enumerate_with(spec: &OutlineSpec, limits: Limits) -> Result<Outlines, EngineError> {
    let g = ground(spec)?;
    Ok(Outlines {
        search: Search::new(g.clone()),
        g,
        emitted: 0,
        cap: limits.max_models,
        finished: false,
    })
}

/// Counts models without building them.
pub fn count_models(spec: &OutlineSpec) -> Result<u64, EngineError> {
    count_models_with(spec, Limits::default())
}

pub fn count_models_with(spec: &OutlineSpec, limits: Limits) -> Result<u64, EngineError> {
    let g = ground(spec)?;
    count_search(Search::new(g), limits.max_models)
}

fn count_search(mut search: Search, cap: u64) -> Result<u64, EngineError> {
    let mut n = 0u64;
    while search.next_model() {
        if n == cap {
            return Err(EngineError::CapExceeded { cap });
        }
        n += 1;
    }
    Ok(n)
}

/// Counts models with one worker per first-scene choice.
pub fn count_models_parallel(spec: &OutlineSpec, limits: Limits) -> Result<u64, EngineError> {
    let g = ground(spec)?;
    let counts = (0..g.choices.len())
        .into_par_iter()
        .map(|c| count_search(Search::with_first(g.clone(), c), limits.max_models))
        .collect::<Result<Vec<_>, _>>()?;
    let total: u64 = counts.iter().sum();
    if total > limits.max_models {
        return Err(EngineError::CapExceeded {
            cap: limits.max_models,
        });
    }
    Ok(total)
}

/// Runs the search to completion and keeps the compact choice rows.
pub fn collect_pool(spec: &OutlineSpec, limits: Limits) -> Result<OutlinePool, EngineError> {
    let g = ground(spec)?;
    let rows = collect_rows(Search::new(g.clone()), g.num_scenes, limits.max_models)?;
    Ok(OutlinePool::from_parts(
        spec_fingerprint(spec),
        g.num_scenes,
        g.alphabet.clone(),
        rows,
    ))
}

/// Like [`collect_pool`], but searches first-scene subtrees in parallel and
/// concatenates them in choice order, so the result is identical.
pub fn collect_pool_parallel(
    spec: &OutlineSpec,
    limits: Limits,
) -> Result<OutlinePool, EngineError> {
    let g = ground(spec)?;
    let parts = (0..g.choices.len())
        .into_par_iter()
        .map(|c| collect_rows(Search::with_first(g.clone(), c), g.num_scenes, limits.max_models))
        .collect::<Result<Vec<_>, _>>()?;
    let total: usize = parts.iter().map(|p| p.len() / g.num_scenes).sum();
    if total as u64 > limits.max_models {
        return Err(EngineError::CapExceeded {
            cap: limits.max_models,
        });
    }
    Ok(OutlinePool::from_parts(
        spec_fingerprint(spec),
        g.num_scenes,
        g.alphabet.clone(),
        parts.concat(),
    ))
}

fn collect_rows(mut search: Search, width: usize, cap: u64) -> Result<Vec<u16>, EngineError> {
    let mut rows = Vec::new();
    let mut n = 0u64;
    while search.next_model() {
        if n == cap {
            return Err(EngineError::CapExceeded { cap });
        }
        n += 1;
        rows.extend_from_slice(search.current());
    }
    debug_assert_eq!(rows.len() as u64, n * width as u64);
    Ok(rows)
}
