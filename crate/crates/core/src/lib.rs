//! Multi-agent collective innovation on crafting knowledge graphs.
//!
//! Agents (random, empowerment-driven, or backed by a chat-completion model)
//! combine items from their inventories under a configurable social
//! connectivity. Every run is seeded and logged as JSONL so it can be
//! replayed and re-scored.

pub mod agents;
pub mod collective;
pub mod env;
pub mod kgraph;
pub mod llm_client;
pub mod util;
pub mod xrun;
