//! Plan-and-write story generation.
//!
//! The pipeline has two halves. Planning enumerates every outline permitted
//! by a small declarative spec ([`dsl`], [`engine`]). Writing picks an
//! outline, maps each scene to a writing instruction ([`instructions`]) and
//! chains chat-completion prompts to produce one paragraph per scene
//! ([`writer`]). [`eval`] scores how homogeneous a set of stories is,
//! paragraph by paragraph, and [`experiment`] runs the guided-vs-unguided
//! comparison end to end.

pub mod cli;
pub mod dsl;
pub mod engine;
pub mod eval;
pub mod experiment;
pub mod fsutil;
pub mod http;
pub mod instructions;
pub mod writer;

pub use dsl::{default_spec, parse_spec, validate_spec, ConstraintRule, FunctionDef, Outline, OutlineSpec, SceneAssignment};
pub use engine::{check_outline, count_models, enumerate_all, OutlinePool};
pub use instructions::{translate, InstructionMap};
pub use writer::{write_story, write_story_unguided, Condition, Premise, Story};
