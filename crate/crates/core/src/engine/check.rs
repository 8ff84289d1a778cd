//! Whole-outline constraint checking.
//!
//! This is a direct reading of each rule over a finished outline and shares
//! no code with the incremental search, so the two can be compared.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::dsl::{ConstraintRule, Outline, OutlineSpec};

/// One violated rule and the 1-based scenes involved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: String,
    pub scenes: Vec<usize>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scenes: Vec<_> = self.scenes.iter().map(ToString::to_string).collect();
        write!(f, "{} at scenes [{}]: {}", self.rule, scenes.join(", "), self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("outline has {found} scenes, spec expects {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("scene {scene}: unknown function in `{token}`")]
    UnknownFunction { scene: usize, token: String },
    #[error("scene {scene}: unknown param in `{token}`")]
    UnknownParam { scene: usize, token: String },
}

/// Checks an outline against every rule of `spec`.
///
/// Returns the list of violations; an empty list means the outline is a
/// model of the spec.
pub fn check_outline(spec: &OutlineSpec, outline: &Outline) -> Result<Vec<Violation>, CheckError> {
    if outline.len() != spec.num_scenes {
        return Err(CheckError::LengthMismatch {
            expected: spec.num_scenes,
            found: outline.len(),
        });
    }
    let mut violations = Vec::new();
    for (i, a) in outline.assignments.iter().enumerate() {
        let scene = i + 1;
        let def = spec
            .function(&a.function)
            .ok_or_else(|| CheckError::UnknownFunction {
                scene,
                token: a.token(),
            })?;
        match &a.param {
            Some(_) if !def.has_params() => violations.push(Violation {
                rule: "assignment".into(),
                scenes: vec![scene],
                reason: format!("`{}` takes no params", def.name),
            }),
            Some(p) if !def.params.contains(p) => {
                return Err(CheckError::UnknownParam {
                    scene,
                    token: a.token(),
                })
            }
            None if def.has_params() => violations.push(Violation {
                rule: "assignment".into(),
                scenes: vec![scene],
                reason: format!("`{}` requires a param", def.name),
            }),
            _ => {}
        }
    }

    let scenes_of = |name: &str| -> Vec<usize> {
        outline
            .assignments
            .iter()
            .enumerate()
            .filter(|(_, a)| a.function == name)
            .map(|(i, _)| i + 1)
            .collect()
    };

    for rule in &spec.constraints {
        let label = rule.to_string();
        let mut flag = |scenes: Vec<usize>, reason: String| {
            violations.push(Violation {
                rule: label.clone(),
                scenes,
                reason,
            })
        };
        match rule {
            ConstraintRule::NoAdjacentRepeat => {
                for (i, pair) in outline.assignments.windows(2).enumerate() {
                    if pair[0].function == pair[1].function {
                        flag(
                            vec![i + 1, i + 2],
                            format!("`{}` in consecutive scenes", pair[0].function),
                        );
                    }
                }
            }
            ConstraintRule::RequireCountBefore {
                function,
                prior,
                min_count,
            } => {
                let priors = scenes_of(prior);
                for s in scenes_of(function) {
                    let before = priors.iter().filter(|&&p| p < s).count();
                    if before < *min_count as usize {
                        flag(
                            vec![s],
                            format!("{before} earlier `{prior}` scenes, need {min_count}"),
                        );
                    }
                }
            }
            ConstraintRule::AtMost { function, max } => {
                let at = scenes_of(function);
                if at.len() > *max as usize {
                    let n = at.len();
                    flag(at, format!("{n} occurrences, at most {max} allowed"));
                }
            }
            ConstraintRule::AtLeast { function, min } => {
                let at = scenes_of(function);
                if at.len() < *min as usize {
                    let n = at.len();
                    flag(at, format!("{n} occurrences, at least {min} required"));
                }
            }
            ConstraintRule::ForbidAtScene { function, scene } => {
                if outline.assignments[scene - 1].function == *function {
                    flag(vec![*scene], format!("`{function}` is forbidden here"));
                }
            }
            ConstraintRule::RequireAtScene { function, scene } => {
                let got = &outline.assignments[scene - 1].function;
                if got != function {
                    flag(vec![*scene], format!("expected `{function}`, found `{got}`"));
                }
            }
            ConstraintRule::FirstPrecedes { first, then } => {
                if let (Some(&a), Some(&b)) = (scenes_of(first).first(), scenes_of(then).first()) {
                    if b < a {
                        flag(vec![b, a], format!("`{then}` occurs before the first `{first}`"));
                    }
                }
            }
            ConstraintRule::DistinctParams { function } => {
                let mut first_use: HashMap<&str, usize> = HashMap::new();
                for (i, a) in outline.assignments.iter().enumerate() {
                    if a.function != *function {
                        continue;
                    }
                    if let Some(p) = &a.param {
                        if let Some(&earlier) = first_use.get(p.as_str()) {
                            flag(vec![earlier, i + 1], format!("param `{p}` reused"));
                        } else {
                            first_use.insert(p, i + 1);
                        }
                    }
                }
            }
        }
    }
    Ok(violations)
}
