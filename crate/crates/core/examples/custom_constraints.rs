//! Build a spec in code, compare it with its text form, and watch each
//! added constraint shrink the outline space.

use fable::engine::count_models;
use fable::{check_outline, parse_spec, ConstraintRule, FunctionDef, Outline, OutlineSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = OutlineSpec::new(
        5,
        vec![
            FunctionDef::with_params("introduce_character", ["brave", "shy"]),
            FunctionDef::new("add_conflict"),
            FunctionDef::new("add_bonding"),
            FunctionDef::new("add_twist"),
        ],
    );
    let rules = [
        ConstraintRule::NoAdjacentRepeat,
        ConstraintRule::RequireAtScene {
            function: "introduce_character".into(),
            scene: 1,
        },
        ConstraintRule::RequireCountBefore {
            function: "add_conflict".into(),
            prior: "introduce_character".into(),
            min_count: 2,
        },
        ConstraintRule::DistinctParams {
            function: "introduce_character".into(),
        },
        ConstraintRule::AtMost {
            function: "add_twist".into(),
            max: 1,
        },
        ConstraintRule::ForbidAtScene {
            function: "add_twist".into(),
            scene: 5,
        },
    ];

    let mut spec = base;
    println!("{:>8}  unconstrained", count_models(&spec)?);
    for rule in rules {
        spec = spec.with_constraint(rule.clone());
        println!("{:>8}  + {rule}", count_models(&spec)?);
    }

    // the text form parses back to the same spec
    let text = spec.to_string();
    assert_eq!(parse_spec(&text)?, spec);
    println!("\n{text}");

    let o = Outline::from_tokens([
        "introduce_character:brave",
        "add_twist",
        "add_conflict",
        "introduce_character:brave",
        "add_twist",
    ])?;
    for v in check_outline(&spec, &o)? {
        println!("violation: {v}");
    }

    match parse_spec("scenes 3\nfunction a\nconstraint at_most ghost 1\n") {
        Ok(_) => unreachable!(),
        Err(e) => println!("\nrejected: {e}"),
    }
    Ok(())
}
