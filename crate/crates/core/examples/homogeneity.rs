//! Score small text sets with the test embedder.

use fable::eval::{homogeneity_score, Embedder, TestEmbedder};

fn score(texts: &[&str]) -> Result<f64, Box<dyn std::error::Error>> {
    let vs = TestEmbedder.embed_batch(texts)?;
    Ok(homogeneity_score(&vs)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let same = ["the cat sails at dawn"; 4];
    let close = [
        "the cat sails at dawn",
        "the cat sails at dusk",
        "a cat sails at dawn",
        "the cat sails before dawn",
    ];
    let far = [
        "the cat sails at dawn",
        "a dwarf argues in court",
        "emus mass on the frozen border",
        "the baker kneads dough through time",
    ];
    println!("identical  {:.4}", score(&same)?);
    println!("similar    {:.4}", score(&close)?);
    println!("unrelated  {:.4}", score(&far)?);
    Ok(())
}
