//! Write one guided and one unguided story with the offline mock provider
//! and print the conversation.

use fable::writer::{GenerationParams, MockChatProvider, StoryWriter};
use fable::{InstructionMap, Outline, Premise};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let premise = Premise::new("cat pirate")?;
    let outline = Outline::from_tokens([
        "introduce_character:sunny",
        "add_obstacle:supernatural",
        "introduce_character:mysterious",
        "add_twist",
        "introduce_character:clumsy",
        "introduce_rival_character",
        "level_up_obstacle",
    ])?;
    let map = InstructionMap::builtin();
    let writer = StoryWriter::new(&MockChatProvider, GenerationParams::default());

    let guided = writer.write(&premise, &outline, &map)?;
    for m in guided.history.messages() {
        println!("[{:?}] {}\n", m.role, m.content);
    }

    let unguided = writer.write_unguided(&premise, 3)?;
    println!("--- unguided ---");
    for p in &unguided.story.paragraphs {
        println!("{p}\n");
    }
    println!("{}", guided.story.to_json());
    Ok(())
}
