//! Two-tier winner prediction for two-party game-chat threads.
//!
//! Tier one labels each utterance with rhetorical strategies (Friendship,
//! Reasoning, Game Move, Share Information) using weakly-supervised binary
//! classifiers, then reduces them to a single action per utterance. Tier
//! two estimates a linear reward function over discounted state-feature
//! maps by least squares on final scores (score-based inverse
//! reinforcement learning), in a context-agnostic or graph-aware encoding,
//! and predicts each thread's winner as the player with the greater
//! average estimated reward.

pub mod corpus;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod labeler;
pub mod pipeline;
pub mod sbirl;
pub mod synth;

pub use error::{Error, Result};
