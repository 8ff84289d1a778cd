//! Turning a premise (and optionally an outline) into a story, one
//! paragraph per scene, by chaining chat-completion prompts.

mod mock;
mod prompt;
mod provider;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Outline;
use crate::instructions::{translate, InstructionMap, UnmappedToken};

pub use mock::{instruction_keywords, MockChatProvider};
pub use prompt::{render_first_prompt, render_next_prompt, SYSTEM_PROMPT};
pub use provider::{
    build_provider, ChatMessage, ChatProvider, GenerationParams, HttpChatProvider, ProviderConfig,
    ProviderError, ProviderKind, Role, MAX_RETRIES_LIMIT,
};

pub const MAX_PREMISE_CHARS: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PremiseError {
    #[error("premise is empty")]
    Empty,
    #[error("premise has {0} characters, at most {MAX_PREMISE_CHARS} allowed")]
    TooLong(usize),
}

/// A short story premise, trimmed and nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Premise(String);

impl Premise {
    pub fn new(text: &str) -> Result<Self, PremiseError> {
        let t = text.trim();
        if t.is_empty() {
            return Err(PremiseError::Empty);
        }
        let n = t.chars().count();
        if n > MAX_PREMISE_CHARS {
            return Err(PremiseError::TooLong(n));
        }
        Ok(Self(t.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Premise {
    type Error = PremiseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Premise::new(&s)
    }
}

impl From<Premise> for String {
    fn from(p: Premise) -> String {
        p.0
    }
}

impl fmt::Display for Premise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Guided,
    Unguided,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Guided => "guided",
            Condition::Unguided => "unguided",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryMetadata {
    pub model_id: String,
    pub provider: String,
    pub params: GenerationParams,
    /// RFC 3339; only recorded for non-deterministic providers so mock
    /// archives stay byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

/// A finished story. Construct through [`Story::new`] or deserialization,
/// both of which check the invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStory")]
pub struct Story {
    pub premise: Premise,
    pub condition: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outline: Option<Outline>,
    pub paragraphs: Vec<String>,
    pub metadata: StoryMetadata,
}

#[derive(Deserialize)]
struct RawStory {
    premise: Premise,
    condition: Condition,
    #[serde(default)]
    outline: Option<Outline>,
    paragraphs: Vec<String>,
    metadata: StoryMetadata,
}

impl TryFrom<RawStory> for Story {
    type Error = String;

    fn try_from(r: RawStory) -> Result<Self, String> {
        Story::new(r.premise, r.condition, r.outline, r.paragraphs, r.metadata)
    }
}

impl Story {
    pub fn new(
        premise: Premise,
        condition: Condition,
        outline: Option<Outline>,
        paragraphs: Vec<String>,
        metadata: StoryMetadata,
    ) -> Result<Self, String> {
        match (condition, &outline) {
            (Condition::Guided, None) => return Err("guided story without an outline".into()),
            (Condition::Guided, Some(o)) if o.len() != paragraphs.len() => {
                return Err(format!(
                    "outline has {} scenes but story has {} paragraphs",
                    o.len(),
                    paragraphs.len()
                ))
            }
            (Condition::Unguided, Some(_)) => return Err("unguided story with an outline".into()),
            _ => {}
        }
        if paragraphs.is_empty() {
            return Err("story has no paragraphs".into());
        }
        if let Some(i) = paragraphs.iter().position(|p| p.trim().is_empty()) {
            return Err(format!("paragraph {} is empty", i + 1));
        }
        Ok(Self {
            premise,
            condition,
            outline,
            paragraphs,
            metadata,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("story serializes");
        s.push('\n');
        s
    }
}

/// Message history for one story: the system message, then alternating
/// user and assistant turns.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Conversation {
    messages: Vec<ChatMessage>,
}

impl Conversation {
    pub fn new(system: &str) -> Self {
        Self {
            messages: vec![ChatMessage::system(system)],
        }
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    fn push_user(&mut self, text: String) {
        debug_assert_ne!(self.messages.last().map(|m| m.role), Some(Role::User));
        self.messages.push(ChatMessage::user(text));
    }

    fn push_assistant(&mut self, text: String) {
        debug_assert_eq!(self.messages.last().map(|m| m.role), Some(Role::User));
        self.messages.push(ChatMessage::assistant(text));
    }
}

#[derive(Debug, Error)]
pub enum StoryError {
    #[error(transparent)]
    Translation(#[from] UnmappedToken),
    #[error("invalid generation params: {0}")]
    InvalidParams(String),
    #[error("a story needs at least one paragraph")]
    ZeroParagraphs,
    #[error("provider failed at scene {scene} ({} paragraph(s) kept): {source}", partial.len())]
    Provider {
        scene: usize,
        partial: Vec<String>,
        #[source]
        source: ProviderError,
    },
    #[error("provider returned only whitespace at scene {scene}")]
    EmptyParagraph { scene: usize, partial: Vec<String> },
}

/// A story plus the full conversation that produced it.
#[derive(Debug, Clone)]
pub struct WrittenStory {
    pub story: Story,
    pub history: Conversation,
}

/// Trims the reply and joins blank-line-separated blocks with one space.
pub fn normalize_paragraph(text: &str) -> String {
    let mut blocks: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n"));
    }
    blocks.join(" ")
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Drives one provider through the chained prompts.
pub struct StoryWriter<'a> {
    provider: &'a dyn ChatProvider,
    params: GenerationParams,
}

impl<'a> StoryWriter<'a> {
    pub fn new(provider: &'a dyn ChatProvider, params: GenerationParams) -> Self {
        Self { provider, params }
    }

    /// Guided: one paragraph per outline scene.
    pub fn write(
        &self,
        premise: &Premise,
        outline: &Outline,
        map: &InstructionMap,
    ) -> Result<WrittenStory, StoryError> {
        let instructions = translate(outline, map)?;
        let instr: Vec<Option<&str>> = instructions.iter().map(|s| Some(s.as_str())).collect();
        self.run(premise, Condition::Guided, Some(outline.clone()), &instr)
    }

    /// Unguided: `n` paragraphs from the premise alone.
    pub fn write_unguided(&self, premise: &Premise, n: usize) -> Result<WrittenStory, StoryError> {
        self.run(premise, Condition::Unguided, None, &vec![None; n])
    }

    fn run(
        &self,
        premise: &Premise,
        condition: Condition,
        outline: Option<Outline>,
        instructions: &[Option<&str>],
    ) -> Result<WrittenStory, StoryError> {
        self.params.validate().map_err(StoryError::InvalidParams)?;
        if instructions.is_empty() {
            return Err(StoryError::ZeroParagraphs);
        }
        let timed = !self.provider.is_deterministic();
        let started_at = timed.then(now_rfc3339);
        let mut history = Conversation::new(SYSTEM_PROMPT);
        let mut paragraphs = Vec::with_capacity(instructions.len());
        for (i, instruction) in instructions.iter().enumerate() {
            let prompt = if i == 0 {
                render_first_prompt(premise, *instruction)
            } else {
                render_next_prompt(premise, *instruction)
            };
            history.push_user(prompt);
            let reply = match self.provider.chat_complete(history.messages(), &self.params) {
                Ok(r) => r,
                Err(source) => {
                    return Err(StoryError::Provider {
                        scene: i + 1,
                        partial: paragraphs,
                        source,
                    })
                }
            };
            let paragraph = normalize_paragraph(&reply);
            if paragraph.is_empty() {
                return Err(StoryError::EmptyParagraph {
                    scene: i + 1,
                    partial: paragraphs,
                });
            }
            history.push_assistant(reply);
            paragraphs.push(paragraph);
        }
        let metadata = StoryMetadata {
            model_id: self.params.model_id.clone(),
            provider: self.provider.name().to_string(),
            params: self.params.clone(),
            started_at,
            finished_at: timed.then(now_rfc3339),
        };
        let story = Story::new(premise.clone(), condition, outline, paragraphs, metadata)
            .expect("writer output satisfies story invariants");
        Ok(WrittenStory { story, history })
    }
}

pub fn write_story(
    premise: &Premise,
    outline: &Outline,
    map: &InstructionMap,
    provider: &dyn ChatProvider,
    params: &GenerationParams,
) -> Result<Story, StoryError> {
    StoryWriter::new(provider, params.clone())
        .write(premise, outline, map)
        .map(|w| w.story)
}

pub fn write_story_unguided(
    premise: &Premise,
    n_paragraphs: usize,
    provider: &dyn ChatProvider,
    params: &GenerationParams,
) -> Result<Story, StoryError> {
    StoryWriter::new(provider, params.clone())
        .write_unguided(premise, n_paragraphs)
        .map(|w| w.story)
}
