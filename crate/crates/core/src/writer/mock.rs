//! Offline chat provider for tests and dry runs.
//!
//! The reply to a prompt is a function of the final user message only. It
//! carries the premise, the keywords of the scene instruction (none for
//! unguided prompts) and a few filler words picked by hashing the message.
//! Filler comes from a vocabulary that shares no word with the shipped
//! instructions or the prompt templates, so keyword checks stay exact.

use sha2::{Digest, Sha256};

use super::prompt::parse_prompt;
use super::provider::{check_history, ChatMessage, ChatProvider, GenerationParams, ProviderError};

const STOPWORDS: &[&str] = &[
    "about", "after", "again", "already", "also", "been", "before", "being", "both", "could",
    "does", "each", "even", "from", "have", "here", "into", "just", "more", "most", "much",
    "must", "only", "other", "over", "same", "should", "some", "such", "than", "that", "their",
    "them", "then", "there", "these", "they", "this", "those", "through", "under", "very",
    "what", "when", "where", "which", "while", "will", "with", "within", "without", "would",
    "your",
];

pub(crate) const FILLER: &[&str] = &[
    "lantern", "meadow", "pebble", "velvet", "harbor", "thistle", "copper", "willow", "ember",
    "saffron", "quill", "marble", "juniper", "cobalt", "heron", "orchid", "drizzle", "tundra",
    "walnut", "garnet", "fjord", "bramble", "plinth", "sorrel",
];

const FILLER_PER_SIDE: usize = 3;

/// Distinctive words of an instruction: lowercase alphabetic runs of four
/// or more letters, minus stopwords, first occurrence order.
pub fn instruction_keywords(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for word in text
        .split(|c: char| !c.is_ascii_alphabetic())
        .map(str::to_ascii_lowercase)
    {
        if word.len() >= 4 && !STOPWORDS.contains(&word.as_str()) && !out.contains(&word) {
            out.push(word);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockChatProvider;

impl MockChatProvider {
    /// The reply for one user message.
    pub fn reply_to(&self, user_message: &str) -> String {
        let digest = Sha256::digest(user_message.as_bytes());
        let pick = |k: usize| FILLER[digest[k] as usize % FILLER.len()];
        let (premise, keywords) = match parse_prompt(user_message) {
            Some(parts) => (
                parts.premise.to_string(),
                parts.instruction.map(instruction_keywords).unwrap_or_default(),
            ),
            None => (String::new(), instruction_keywords(user_message)),
        };
        let mut words: Vec<String> = (0..FILLER_PER_SIDE).map(|k| pick(k).to_string()).collect();
        if !premise.is_empty() {
            words.push(premise);
        }
        words.extend(keywords);
        words.extend((FILLER_PER_SIDE..2 * FILLER_PER_SIDE).map(|k| pick(k).to_string()));
        let mut text = words.join(" ");
        text.push('.');
        text
    }
}

impl ChatProvider for MockChatProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn chat_complete(
        &self,
        history: &[ChatMessage],
        _params: &GenerationParams,
    ) -> Result<String, ProviderError> {
        check_history(history)?;
        let last = history.last().expect("checked nonempty");
        Ok(self.reply_to(&last.content))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instructions::InstructionMap;
    use crate::writer::{render_first_prompt, render_next_prompt, Premise, SYSTEM_PROMPT};

    fn history(user: &str) -> Vec<ChatMessage> {
        vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(user)]
    }

    #[test]
    fn keywords() {
        assert_eq!(
            instruction_keywords("introduce an optimistic and brave character, with the brave heart"),
            ["introduce", "optimistic", "brave", "character", "heart"]
        );
        assert!(instruction_keywords("a an the of to").is_empty());
    }

    #[test]
    fn deterministic_and_keyworded() {
        let p = Premise::new("cat pirate").unwrap();
        let prompt = render_first_prompt(&p, Some("introduce an optimistic and brave character"));
        let params = GenerationParams::default();
        let a = MockChatProvider.chat_complete(&history(&prompt), &params).unwrap();
        let b = MockChatProvider.chat_complete(&history(&prompt), &params).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("optimistic") && a.contains("brave"));
        assert!(a.contains("cat pirate"));
    }

    #[test]
    fn baseline_reply_has_no_instruction_words() {
        let p = Premise::new("cat pirate").unwrap();
        let reply = MockChatProvider.reply_to(&render_next_prompt(&p, None));
        let vocab = instruction_vocabulary();
        for w in reply.trim_end_matches('.').split(' ') {
            assert!(!vocab.contains(&w.to_string()), "{w}");
        }
    }

    fn instruction_vocabulary() -> Vec<String> {
        let map = InstructionMap::builtin();
        let spec = crate::dsl::default_spec();
        let mut words = Vec::new();
        for a in spec.scene_choices() {
            words.extend(instruction_keywords(&map.resolve(&a).unwrap()));
        }
        words
    }

    #[test]
    fn filler_is_disjoint_from_instructions_and_templates() {
        let p = Premise::new("x").unwrap();
        let mut texts: Vec<String> = instruction_vocabulary();
        texts.push(SYSTEM_PROMPT.to_lowercase());
        texts.push(render_first_prompt(&p, Some("y")).to_lowercase());
        texts.push(render_next_prompt(&p, Some("y")).to_lowercase());
        let all = texts.join(" ");
        let words: Vec<&str> = all.split(|c: char| !c.is_ascii_alphabetic()).collect();
        for f in FILLER {
            assert!(!words.contains(f), "{f} collides");
        }
        let mut sorted = FILLER.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), FILLER.len());
    }

    #[test]
    fn rejects_bad_history() {
        let params = GenerationParams::default();
        assert!(MockChatProvider.chat_complete(&[], &params).is_err());
        assert!(MockChatProvider
            .chat_complete(&[ChatMessage::user("hi")], &params)
            .is_err());
    }
}
