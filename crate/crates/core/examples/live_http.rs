//! One story against a real chat endpoint, scored by a real embedding
//! endpoint. Costs money.
//!
//!     FABLE_API_KEY=... cargo run --example live_http -- \
//!         https://api.openai.com/v1/chat/completions \
//!         https://api.openai.com/v1/embeddings text-embedding-3-small

use fable::engine::{collect_pool_parallel, Limits};
use fable::eval::{homogeneity_score, Embedder, HttpEmbedder};
use fable::writer::{GenerationParams, HttpChatProvider, StoryWriter};
use fable::{default_spec, InstructionMap, Premise};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [chat_url, embed_url, embed_model] = args.as_slice() else {
        eprintln!("usage: live_http <chat-url> <embedding-url> <embedding-model>");
        std::process::exit(1);
    };
    let provider = HttpChatProvider::from_env(chat_url.as_str())?;
    let embedder = HttpEmbedder::new(embed_url.as_str(), embed_model.as_str(), std::env::var("FABLE_API_KEY").ok())?;

    let spec = default_spec();
    let pool = collect_pool_parallel(&spec, Limits::default())?;
    let (_, outline) = pool.sample(1)?;
    let premise = Premise::new("Cold Emu War")?;
    let writer = StoryWriter::new(&provider, GenerationParams::default());
    let guided = writer.write(&premise, &outline, &InstructionMap::builtin())?;
    let unguided = writer.write_unguided(&premise, spec.num_scenes)?;

    for (i, (g, u)) in guided.story.paragraphs.iter().zip(&unguided.story.paragraphs).enumerate() {
        println!("{}. {}\n   guided: {g}\n   unguided: {u}\n", i + 1, outline.assignments[i].token());
    }
    let texts: Vec<&str> = guided.story.paragraphs.iter().map(String::as_str).collect();
    let score = homogeneity_score(&embedder.embed_batch(&texts)?)?;
    println!("within-story paragraph homogeneity (guided): {score:.4}");
    Ok(())
}
