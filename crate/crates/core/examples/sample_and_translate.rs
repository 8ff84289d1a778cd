//! Draw outlines uniformly and turn each scene into a writing instruction.
//!
//!     cargo run --example sample_and_translate -- [seed]

use fable::engine::{collect_pool_parallel, Limits};
use fable::{default_spec, translate, InstructionMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let spec = default_spec();
    let pool = collect_pool_parallel(&spec, Limits::default())?;
    let map = InstructionMap::builtin();
    assert!(map.uncovered(&spec).is_empty());

    let (index, outline) = pool.sample(seed)?;
    println!("outline #{index} of {}:", pool.count());
    for (scene, (a, text)) in outline.assignments.iter().zip(translate(&outline, &map)?).enumerate() {
        let short: String = text.chars().take(90).collect();
        println!("{:>2}. {:<34} {short}...", scene + 1, a.token());
    }
    Ok(())
}
