//! Outline tokens to writing instructions.
//!
//! A map file is a JSON object from token (`function` or `function:param`)
//! to instruction text. A `function` entry may contain `{param}`, which is
//! filled with the scene's param. An optional `_default` entry, using
//! `{function}` and `{param}`, covers tokens nothing else matches; without
//! it, unmatched tokens are an error.
//!
//! The shipped map ([`InstructionMap::builtin`]) covers every token of the
//! default outline spec.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::Deserializer;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{Outline, OutlineSpec, SceneAssignment};

pub const DEFAULT_KEY: &str = "_default";

const BUILTIN_JSON: &str = include_str!("../data/instructions.json");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DefaultPolicy {
    Error,
    /// Template with `{function}` and `{param}` placeholders.
    Generic(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionMap {
    entries: BTreeMap<String, String>,
    default_policy: DefaultPolicy,
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("cannot read instruction map: {0}")]
    Io(#[from] std::io::Error),
    #[error("instruction map is not a JSON object of strings: {0}")]
    Parse(String),
    #[error("duplicate key `{0}` in instruction map")]
    DuplicateKey(String),
    #[error("`{0}` is not a valid outline token")]
    InvalidKey(String),
    #[error("empty template for `{0}`")]
    EmptyTemplate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("scene {scene}: no instruction for `{token}`")]
pub struct UnmappedToken {
    pub scene: usize,
    pub token: String,
}

impl InstructionMap {
    /// Validates entries; `_default`, when present, selects the generic policy.
    pub fn from_entries<I>(entries: I) -> Result<Self, MapError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut map = BTreeMap::new();
        let mut default_policy = DefaultPolicy::Error;
        for (key, template) in entries {
            if template.trim().is_empty() {
                return Err(MapError::EmptyTemplate(key));
            }
            if key == DEFAULT_KEY {
                if matches!(default_policy, DefaultPolicy::Generic(_)) {
                    return Err(MapError::DuplicateKey(key));
                }
                default_policy = DefaultPolicy::Generic(template);
                continue;
            }
            if key.parse::<SceneAssignment>().is_err() {
                return Err(MapError::InvalidKey(key));
            }
            if map.contains_key(&key) {
                return Err(MapError::DuplicateKey(key));
            }
            map.insert(key, template);
        }
        Ok(Self {
            entries: map,
            default_policy,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let pairs = de
            .deserialize_map(OrderedPairs)
            .map_err(|e| MapError::Parse(e.to_string()))?;
        de.end().map_err(|e| MapError::Parse(e.to_string()))?;
        Self::from_entries(pairs)
    }

    /// The map shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_JSON).expect("shipped instruction map is valid")
    }

    pub fn with_default_policy(mut self, policy: DefaultPolicy) -> Self {
        self.default_policy = policy;
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn default_policy(&self) -> &DefaultPolicy {
        &self.default_policy
    }

    /// Resolves one assignment: exact `function:param`, then `function` with
    /// `{param}` filled in, then the default policy.
    pub fn resolve(&self, assignment: &SceneAssignment) -> Option<String> {
        let param = assignment.param.as_deref().unwrap_or("");
        if assignment.param.is_some() {
            if let Some(t) = self.entries.get(&assignment.token()) {
                return Some(t.clone());
            }
        }
        if let Some(t) = self.entries.get(&assignment.function) {
            return Some(t.replace("{param}", param));
        }
        match &self.default_policy {
            DefaultPolicy::Error => None,
            DefaultPolicy::Generic(t) => Some(
                t.replace("{function}", &assignment.function)
                    .replace("{param}", param),
            ),
        }
    }

    /// Tokens of `spec` this map cannot resolve. Empty means full coverage.
    pub fn uncovered(&self, spec: &OutlineSpec) -> Vec<String> {
        spec.scene_choices()
            .into_iter()
            .filter(|a| self.resolve(a).is_none())
            .map(|a| a.token())
            .collect()
    }

    /// Content hash over entries and default policy.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.as_bytes());
            h.update([0]);
            h.update(v.as_bytes());
            h.update([0]);
        }
        if let DefaultPolicy::Generic(t) = &self.default_policy {
            h.update(DEFAULT_KEY.as_bytes());
            h.update([0]);
            h.update(t.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads and validates a map file.
pub fn load_map(path: &Path) -> Result<InstructionMap, MapError> {
    InstructionMap::from_json(&std::fs::read_to_string(path)?)
}

/// One instruction per scene, in order.
pub fn translate(outline: &Outline, map: &InstructionMap) -> Result<Vec<String>, UnmappedToken> {
    outline
        .assignments
        .iter()
        .enumerate()
        .map(|(i, a)| {
            map.resolve(a).ok_or_else(|| UnmappedToken {
                scene: i + 1,
                token: a.token(),
            })
        })
        .collect()
}

/// Collects a JSON object as ordered key/value pairs so duplicate keys are
/// visible instead of silently overwritten.
struct OrderedPairs;

impl<'de> Visitor<'de> for OrderedPairs {
    type Value = Vec<(String, String)>;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an object mapping tokens to instruction strings")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
        let mut out = Vec::new();
        while let Some((k, v)) = access.next_entry::<String, String>()? {
            out.push((k, v));
        }
        Ok(out)
    }
}
