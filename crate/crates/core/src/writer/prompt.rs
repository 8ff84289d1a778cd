//! Prompt templates for paragraph-by-paragraph story writing.

use super::Premise;

/// System message sent ahead of every conversation.
pub const SYSTEM_PROMPT: &str =
    "You are a fiction writer. Write vivid, coherent fiction one paragraph at a time, continuing the story so far.";

const FIRST_PREFIX: &str = "You're writing a story about: ";
const FIRST_SUFFIX: &str = ". Write the first paragraph of the story.";
const NEXT_PREFIX: &str = "Write the next paragraph of the story. Remember the story is about: ";
const CLAUSE: &str = " In this paragraph, ";

fn instruction_clause(instruction: Option<&str>) -> String {
    match instruction {
        Some(text) => {
            let text = text.trim();
            let text = text.strip_suffix('.').unwrap_or(text);
            format!("{CLAUSE}{text}.")
        }
        None => String::new(),
    }
}

/// Opening prompt. Without an instruction this is the unguided form.
pub fn render_first_prompt(premise: &Premise, instruction: Option<&str>) -> String {
    format!(
        "{FIRST_PREFIX}{}{FIRST_SUFFIX}{}",
        premise.as_str(),
        instruction_clause(instruction)
    )
}

/// Continuation prompt. Without an instruction this is the unguided form.
pub fn render_next_prompt(premise: &Premise, instruction: Option<&str>) -> String {
    format!(
        "{NEXT_PREFIX}{}.{}",
        premise.as_str(),
        instruction_clause(instruction)
    )
}

/// Pieces recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PromptParts<'a> {
    pub premise: &'a str,
    pub instruction: Option<&'a str>,
    pub first: bool,
}

/// Inverse of the two renderers; `None` for text they could not have produced.
pub(crate) fn parse_prompt(text: &str) -> Option<PromptParts<'_>> {
    let (first, rest) = if let Some(rest) = text.strip_prefix(FIRST_PREFIX) {
        (true, rest)
    } else {
        (false, text.strip_prefix(NEXT_PREFIX)?)
    };
    let (premise, tail) = if first {
        let at = rest.find(FIRST_SUFFIX)?;
        (&rest[..at], &rest[at + FIRST_SUFFIX.len()..])
    } else {
        match rest.find(&format!(".{CLAUSE}")) {
            Some(at) => (&rest[..at], &rest[at + 1..]),
            None => (rest.strip_suffix('.')?, ""),
        }
    };
    let instruction = if tail.is_empty() {
        None
    } else {
        Some(tail.strip_prefix(CLAUSE)?.strip_suffix('.')?)
    };
    Some(PromptParts {
        premise,
        instruction,
        first,
    })
}
