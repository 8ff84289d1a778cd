//! The outline design-space language.
//!
//! An [`OutlineSpec`] declares how many scenes a story has, which narrative
//! functions a scene may perform (optionally refined by a parameter), and the
//! sequencing constraints that rule out incoherent combinations. The surface
//! syntax is line oriented:
//!
//! ```text
//! # seven scenes, one function each
//! scenes 7
//! function introduce_character params [sunny, mysterious, clumsy]
//! function add_conflict
//! function add_twist
//! constraint no_adjacent_repeat
//! constraint require_count_before add_conflict introduce_character 2
//! ```
//!
//! [`parse_spec`] turns source text into a spec and rejects anything that
//! [`validate_spec`] would flag. Specs built in code can be checked with
//! [`validate_spec`] directly. `Display` on a spec prints canonical source
//! that parses back to an equal value.

mod parse;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_spec, ParseError, SyntaxError};
pub use validate::{validate_spec, Diagnostic, DiagnosticKind};

/// Source of the shipped 7-scene, 9-function spec.
pub const DEFAULT_SPEC_SOURCE: &str = include_str!("../../data/default.outline");

/// The shipped spec, parsed.
pub fn default_spec() -> OutlineSpec {
    parse_spec(DEFAULT_SPEC_SOURCE).expect("shipped spec is valid")
}

/// Scene count used when a spec has no `scenes` statement.
pub const DEFAULT_NUM_SCENES: usize = 7;

/// A narrative function and the parameters that may refine it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
}

impl FunctionDef {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: Vec::new(),
        }
    }

    pub fn with_params<I, S>(name: impl Into<String>, params: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.into(),
            params: params.into_iter().map(Into::into).collect(),
        }
    }

    pub fn has_params(&self) -> bool {
        !self.params.is_empty()
    }
}

/// One sequencing constraint. Scene indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConstraintRule {
    /// Two consecutive scenes never perform the same function. Params are ignored.
    NoAdjacentRepeat,
    /// Every scene performing `function` is preceded by at least `min_count`
    /// scenes performing `prior`.
    RequireCountBefore {
        function: String,
        prior: String,
        min_count: u32,
    },
    AtMost { function: String, max: u32 },
    AtLeast { function: String, min: u32 },
    ForbidAtScene { function: String, scene: usize },
    RequireAtScene { function: String, scene: usize },
    /// When both functions occur, the first `first` comes before the first `then`.
    FirstPrecedes { first: String, then: String },
    /// All occurrences of a parameterised function use different params.
    DistinctParams { function: String },
}

impl ConstraintRule {
    /// Function names the rule refers to, in source order.
    pub fn referenced_functions(&self) -> Vec<&str> {
        match self {
            ConstraintRule::NoAdjacentRepeat => vec![],
            ConstraintRule::RequireCountBefore {
                function, prior, ..
            } => vec![function, prior],
            ConstraintRule::AtMost { function, .. }
            | ConstraintRule::AtLeast { function, .. }
            | ConstraintRule::ForbidAtScene { function, .. }
            | ConstraintRule::RequireAtScene { function, .. }
            | ConstraintRule::DistinctParams { function } => vec![function],
            ConstraintRule::FirstPrecedes { first, then } => vec![first, then],
        }
    }
}

impl fmt::Display for ConstraintRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintRule::NoAdjacentRepeat => write!(f, "no_adjacent_repeat"),
            ConstraintRule::RequireCountBefore {
                function,
                prior,
                min_count,
            } => write!(f, "require_count_before {function} {prior} {min_count}"),
            ConstraintRule::AtMost { function, max } => write!(f, "at_most {function} {max}"),
            ConstraintRule::AtLeast { function, min } => write!(f, "at_least {function} {min}"),
            ConstraintRule::ForbidAtScene { function, scene } => {
                write!(f, "forbid_at {function} {scene}")
            }
            ConstraintRule::RequireAtScene { function, scene } => {
                write!(f, "require_at {function} {scene}")
            }
            ConstraintRule::FirstPrecedes { first, then } => {
                write!(f, "first_precedes {first} {then}")
            }
            ConstraintRule::DistinctParams { function } => write!(f, "distinct_params {function}"),
        }
    }
}

/// The complete design space of outlines.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutlineSpec {
    pub num_scenes: usize,
    pub functions: Vec<FunctionDef>,
    pub constraints: Vec<ConstraintRule>,
}

impl OutlineSpec {
    pub fn new(num_scenes: usize, functions: Vec<FunctionDef>) -> Self {
        Self {
            num_scenes,
            functions,
            constraints: Vec::new(),
        }
    }

    pub fn with_constraint(mut self, rule: ConstraintRule) -> Self {
        self.constraints.push(rule);
        self
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    /// Every assignment a single scene may take, in enumeration order:
    /// functions in declaration order, then params in declaration order.
    pub fn scene_choices(&self) -> Vec<SceneAssignment> {
        let mut out = Vec::new();
        for def in &self.functions {
            if def.params.is_empty() {
                out.push(SceneAssignment::new(def.name.clone()));
            } else {
                for p in &def.params {
                    out.push(SceneAssignment::with_param(def.name.clone(), p.clone()));
                }
            }
        }
        out
    }
}

impl fmt::Display for OutlineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenes {}", self.num_scenes)?;
        for def in &self.functions {
            if def.params.is_empty() {
                writeln!(f, "function {}", def.name)?;
            } else {
                writeln!(f, "function {} params [{}]", def.name, def.params.join(", "))?;
            }
        }
        for rule in &self.constraints {
            writeln!(f, "constraint {rule}")?;
        }
        Ok(())
    }
}

impl FromStr for OutlineSpec {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_spec(s)
    }
}

/// What one scene does: a function, plus a param when the function takes one.
///
/// The token form is `function` or `function:param`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SceneAssignment {
    pub function: String,
    pub param: Option<String>,
}

impl SceneAssignment {
    pub fn new(function: impl Into<String>) -> Self {
        Self {
            function: function.into(),
            param: None,
        }
    }

    pub fn with_param(function: impl Into<String>, param: impl Into<String>) -> Self {
        Self {
            function: function.into(),
            param: Some(param.into()),
        }
    }

    pub fn token(&self) -> String {
        self.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed outline token `{0}`")]
pub struct TokenError(pub String);

impl FromStr for SceneAssignment {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TokenError(s.to_string());
        match s.split_once(':') {
            None if is_identifier(s) => Ok(SceneAssignment::new(s)),
            Some((f, p)) if is_identifier(f) && is_identifier(p) => {
                Ok(SceneAssignment::with_param(f, p))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SceneAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.param {
            Some(p) => write!(f, "{}:{}", self.function, p),
            None => f.write_str(&self.function),
        }
    }
}

impl Serialize for SceneAssignment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SceneAssignment {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One assignment per scene. Serialises as a JSON array of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Outline {
    pub assignments: Vec<SceneAssignment>,
}

impl Outline {
    pub fn new(assignments: Vec<SceneAssignment>) -> Self {
        Self { assignments }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn tokens(&self) -> Vec<String> {
        self.assignments.iter().map(SceneAssignment::token).collect()
    }

    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, TokenError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        tokens
            .into_iter()
            .map(|t| t.as_ref().parse())
            .collect::<Result<Vec<_>, _>>()
            .map(Outline::new)
    }
}

impl fmt::Display for Outline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, a) in self.assignments.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("]")
    }
}

/// `[a-z][a-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}
