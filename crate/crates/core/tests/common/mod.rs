//! Shared helpers for integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use fable::{check_outline, validate_spec, ConstraintRule, FunctionDef, Outline, OutlineSpec, SceneAssignment};
use rand::Rng;

/// Small random spec: up to 4 scenes, 3 functions, 2 params each, and a
/// random handful of constraints. Always valid.
pub fn random_spec<R: Rng>(rng: &mut R) -> OutlineSpec {
    let scenes = rng.gen_range(1..=4);
    let nf = rng.gen_range(1..=3);
    let functions: Vec<FunctionDef> = (0..nf)
        .map(|i| {
            let np = rng.gen_range(0..=2);
            FunctionDef::with_params(format!("f{i}"), (0..np).map(|j| format!("p{j}")))
        })
        .collect();
    let mut spec = OutlineSpec::new(scenes, functions.clone());
    let f = |rng: &mut R| functions[rng.gen_range(0..nf)].name.clone();
    for _ in 0..rng.gen_range(0..=5) {
        let rule = match rng.gen_range(0..8) {
            0 => ConstraintRule::NoAdjacentRepeat,
            1 => ConstraintRule::RequireCountBefore {
                function: f(rng),
                prior: f(rng),
                min_count: rng.gen_range(1..=2),
            },
            2 => ConstraintRule::AtMost {
                function: f(rng),
                max: rng.gen_range(0..=2),
            },
            3 => ConstraintRule::AtLeast {
                function: f(rng),
                min: rng.gen_range(0..=2),
            },
            4 => ConstraintRule::ForbidAtScene {
                function: f(rng),
                scene: rng.gen_range(1..=scenes),
            },
            5 => ConstraintRule::RequireAtScene {
                function: f(rng),
                scene: rng.gen_range(1..=scenes),
            },
            6 if nf >= 2 => {
                let a = rng.gen_range(0..nf);
                let b = (a + rng.gen_range(1..nf)) % nf;
                ConstraintRule::FirstPrecedes {
                    first: functions[a].name.clone(),
                    then: functions[b].name.clone(),
                }
            }
            7 => match functions.iter().find(|d| d.has_params()) {
                Some(d) => ConstraintRule::DistinctParams {
                    function: d.name.clone(),
                },
                None => ConstraintRule::NoAdjacentRepeat,
            },
            _ => ConstraintRule::NoAdjacentRepeat,
        };
        spec = spec.with_constraint(rule);
    }
    assert_eq!(validate_spec(&spec), vec![], "generator produced an invalid spec:\n{spec}");
    spec
}

/// Every assignment of scene choices, filtered by the whole-outline checker.
pub fn brute_force(spec: &OutlineSpec) -> BTreeSet<Vec<String>> {
    let choices: Vec<SceneAssignment> = spec.scene_choices();
    let n = spec.num_scenes;
    let k = choices.len();
    let total = k.pow(n as u32);
    let mut out = BTreeSet::new();
    for code in 0..total {
        let mut c = code;
        let mut picks = Vec::with_capacity(n);
        for _ in 0..n {
            picks.push(choices[c % k].clone());
            c /= k;
        }
        let outline = Outline::new(picks);
        if check_outline(spec, &outline).expect("well formed").is_empty() {
            out.insert(outline.tokens());
        }
    }
    out
}

/// The engine's models as token lists, asserting they arrive without repeats.
pub fn engine_models(spec: &OutlineSpec) -> BTreeSet<Vec<String>> {
    let mut out = BTreeSet::new();
    for o in fable::enumerate_all(spec).expect("valid spec") {
        assert!(out.insert(o.expect("under cap").tokens()), "duplicate model");
    }
    out
}

/// Minimal outline spec used by CLI tests: 12 models.
pub const DEMO_SPEC: &str = "scenes 3\nfunction add_twist\nfunction add_conflict\nfunction add_bonding\nconstraint no_adjacent_repeat\n";
