//! The full guided vs unguided comparison on the mock pipeline.
//!
//!     cargo run --release --example mini_experiment -- [output-dir]

use std::path::PathBuf;

use fable::experiment::{run_experiment, ExperimentConfig};
use fable::Condition;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fable-mini"));
    let config = ExperimentConfig {
        premises: vec!["cat pirate".into(), "dwarven courtroom drama".into()],
        stories_per_condition: 4,
        output_dir: out,
        master_seed: 2024,
        ..Default::default()
    };
    let outcome = run_experiment(config)?;
    println!("{} archives in {}", outcome.archives_written(), outcome.output_dir.display());
    for premise in outcome.report.premises() {
        println!("{premise}");
        let g = outcome.report.series(premise, Condition::Guided);
        let u = outcome.report.series(premise, Condition::Unguided);
        for ((i, gs), (_, us)) in g.iter().zip(&u) {
            println!("  paragraph {i}: guided {gs:.3}  unguided {us:.3}");
        }
    }
    Ok(())
}
