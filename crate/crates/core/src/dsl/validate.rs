use std::collections::HashSet;
use std::fmt;

use super::{is_identifier, ConstraintRule, OutlineSpec};

/// Largest param set a single function may declare.
pub const MAX_PARAMS_PER_FUNCTION: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    NoScenes,
    NoFunctions,
    InvalidFunctionName(String),
    DuplicateFunction(String),
    InvalidParamName { function: String, param: String },
    DuplicateParam { function: String, param: String },
    TooManyParams { function: String, count: usize },
    UndeclaredFunction(String),
    SceneOutOfRange { scene: usize, num_scenes: usize },
    ZeroMinCount,
    DistinctParamsWithoutParams(String),
    SelfPrecedence(String),
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticKind::NoScenes => f.write_str("scene count must be at least 1"),
            DiagnosticKind::NoFunctions => f.write_str("no functions declared"),
            DiagnosticKind::InvalidFunctionName(n) => {
                write!(f, "function name `{n}` does not match [a-z][a-z0-9_]*")
            }
            DiagnosticKind::DuplicateFunction(n) => write!(f, "function `{n}` declared twice"),
            DiagnosticKind::InvalidParamName { function, param } => {
                write!(f, "param `{param}` of `{function}` does not match [a-z][a-z0-9_]*")
            }
            DiagnosticKind::DuplicateParam { function, param } => {
                write!(f, "param `{param}` listed twice for `{function}`")
            }
            DiagnosticKind::TooManyParams { function, count } => write!(
                f,
                "`{function}` declares {count} params, limit is {MAX_PARAMS_PER_FUNCTION}"
            ),
            DiagnosticKind::UndeclaredFunction(n) => write!(f, "undeclared function `{n}`"),
            DiagnosticKind::SceneOutOfRange { scene, num_scenes } => {
                write!(f, "scene {scene} is outside 1..={num_scenes}")
            }
            DiagnosticKind::ZeroMinCount => f.write_str("min_count must be at least 1"),
            DiagnosticKind::DistinctParamsWithoutParams(n) => {
                write!(f, "distinct_params on `{n}`, which declares no params")
            }
            DiagnosticKind::SelfPrecedence(n) => {
                write!(f, "first_precedes relates `{n}` to itself")
            }
        }
    }
}

/// A problem found in a spec, attributed to the statement that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// The offending statement, rendered as DSL source.
    pub subject: String,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.kind)
    }
}

/// Lists every invariant violation in `spec`. Empty means valid.
pub fn validate_spec(spec: &OutlineSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |subject: String, kind| out.push(Diagnostic { subject, kind });

    if spec.num_scenes == 0 {
        push(format!("scenes {}", spec.num_scenes), DiagnosticKind::NoScenes);
    }
    if spec.functions.is_empty() {
        push("spec".into(), DiagnosticKind::NoFunctions);
    }

    let mut seen = HashSet::new();
    for def in &spec.functions {
        let subject = format!("function {}", def.name);
        if !is_identifier(&def.name) {
            push(subject.clone(), DiagnosticKind::InvalidFunctionName(def.name.clone()));
        }
        if !seen.insert(def.name.as_str()) {
            push(subject.clone(), DiagnosticKind::DuplicateFunction(def.name.clone()));
        }
        if def.params.len() > MAX_PARAMS_PER_FUNCTION {
            push(
                subject.clone(),
                DiagnosticKind::TooManyParams {
                    function: def.name.clone(),
                    count: def.params.len(),
                },
            );
        }
        let mut params = HashSet::new();
        for p in &def.params {
            if !is_identifier(p) {
                push(
                    subject.clone(),
                    DiagnosticKind::InvalidParamName {
                        function: def.name.clone(),
                        param: p.clone(),
                    },
                );
            }
            if !params.insert(p.as_str()) {
                push(
                    subject.clone(),
                    DiagnosticKind::DuplicateParam {
                        function: def.name.clone(),
                        param: p.clone(),
                    },
                );
            }
        }
    }

    for rule in &spec.constraints {
        let subject = format!("constraint {rule}");
        for name in rule.referenced_functions() {
            if spec.function(name).is_none() {
                push(subject.clone(), DiagnosticKind::UndeclaredFunction(name.to_string()));
            }
        }
        match rule {
            ConstraintRule::ForbidAtScene { scene, .. }
            | ConstraintRule::RequireAtScene { scene, .. } => {
                if *scene == 0 || *scene > spec.num_scenes {
                    push(
                        subject.clone(),
                        DiagnosticKind::SceneOutOfRange {
                            scene: *scene,
                            num_scenes: spec.num_scenes,
                        },
                    );
                }
            }
            ConstraintRule::RequireCountBefore { min_count: 0, .. } => {
                push(subject.clone(), DiagnosticKind::ZeroMinCount);
            }
            ConstraintRule::DistinctParams { function } => {
                if spec.function(function).is_some_and(|f| !f.has_params()) {
                    push(
                        subject.clone(),
                        DiagnosticKind::DistinctParamsWithoutParams(function.clone()),
                    );
                }
            }
            ConstraintRule::FirstPrecedes { first, then } if first == then => {
                push(subject.clone(), DiagnosticKind::SelfPrecedence(first.clone()));
            }
            _ => {}
        }
    }
    out
}
