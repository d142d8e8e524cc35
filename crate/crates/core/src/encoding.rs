//! State feature encodings and the discounted feature map.
//!
//! A state is one utterance. The context-agnostic encoding carries a bias,
//! the score difference between the two players, and a one-hot of the
//! speaker's action. The graph-aware encoding appends differences of five
//! communication-graph centralities between speaker and opponent. The
//! feature map of a subthread is the discounted sum of its state vectors.

use serde::{Deserialize, Serialize};

use crate::corpus::{Message, Subthread, Thread};
use crate::error::{Error, Result};
use crate::graph::CentralityScores;
use crate::labeler::{assign_action, Action, VoteTarget};

pub const CONTEXT_AGNOSTIC_NAMES: [&str; 5] =
    ["bias", "score_diff", "act_friendship", "act_reasoning", "act_neutral"];
pub const GRAPH_AWARE_EXTRA_NAMES: [&str; 5] = [
    "eigen_diff",
    "authority_diff",
    "hub_diff",
    "in_degree_diff",
    "out_degree_diff",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    ContextAgnostic,
    GraphAware,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::ContextAgnostic => write!(f, "context-agnostic"),
            Variant::GraphAware => write!(f, "graph-aware"),
        }
    }
}

/// Whether the discount exponent counts the player's own utterances or the
/// global thread position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeIndex {
    #[default]
    OwnUtterance,
    GlobalSeq,
}

/// The feature layout a model was trained with. Serialized alongside the
/// model so evaluation cannot mix encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub variant: Variant,
    pub names: Vec<String>,
    pub gamma: f64,
    #[serde(default)]
    pub time_index: TimeIndex,
}

impl FeatureSchema {
    pub fn new(variant: Variant, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Validation(format!("gamma {gamma} outside [0,1)")));
        }
        let names: Vec<String> = match variant {
            Variant::ContextAgnostic => {
                CONTEXT_AGNOSTIC_NAMES.iter().map(|s| s.to_string()).collect()
            }
            Variant::GraphAware => CONTEXT_AGNOSTIC_NAMES
                .iter()
                .chain(GRAPH_AWARE_EXTRA_NAMES.iter())
                .map(|s| s.to_string())
                .collect(),
        };
        Ok(Self { variant, names, gamma, time_index: TimeIndex::default() })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub values: Vec<f64>,
}

/// Discounted feature map of one subthread.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub mu: Vec<f64>,
    pub horizon: usize,
}

/// The action attached to a message: explicit if present, otherwise
/// derived from predicted (preferred) or gold labels, Neutral if unlabeled.
pub fn message_action(msg: &Message) -> Action {
    if let Some(action) = msg.action {
        return action;
    }
    match msg.predicted.or(msg.labels) {
        Some(labels) => assign_action(&labels, 0.5, VoteTarget::default()),
        None => Action::Neutral,
    }
}

/// Opponent's most recent sender_score at or before this message, 0 if the
/// opponent has not yet spoken.
fn opponent_score(msg: &Message, thread: &Thread) -> f64 {
    let opponent = thread.other(&msg.sender_id);
    thread
        .messages
        .iter()
        .filter(|m| m.seq < msg.seq && m.sender_id == opponent)
        .next_back()
        .map(|m| m.sender_score)
        .unwrap_or(0.0)
}

/// Encode one state. Graph scores must be present iff the schema is
/// graph-aware, and must come from the graph at this message's turn.
pub fn encode_state(
    msg: &Message,
    thread: &Thread,
    scores: Option<&CentralityScores>,
    schema: &FeatureSchema,
) -> Result<StateVector> {
    match (schema.variant, scores.is_some()) {
        (Variant::GraphAware, false) => {
            return Err(Error::SchemaMismatch(
                "graph-aware schema requires centrality scores".into(),
            ))
        }
        (Variant::ContextAgnostic, true) => {
            return Err(Error::SchemaMismatch(
                "context-agnostic schema given centrality scores".into(),
            ))
        }
        _ => {}
    }
    let action = message_action(msg);
    let score_diff = msg.sender_score - opponent_score(msg, thread);
    let mut values = vec![
        1.0,
        score_diff,
        (action == Action::Friendship) as u8 as f64,
        (action == Action::Reasoning) as u8 as f64,
        (action == Action::Neutral) as u8 as f64,
    ];
    if let Some(scores) = scores {
        let own = scores.for_node(&msg.sender_id);
        let opp = scores.for_node(thread.other(&msg.sender_id));
        values.extend(own.iter().zip(&opp).map(|(a, b)| a - b));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state vector".into()));
    }
    Ok(StateVector { values })
}

/// mu = sum of gamma^t phi(s_t), t indexing the player's own utterances
/// (or the global seq under `TimeIndex::GlobalSeq`).
pub fn feature_map(
    subthread: &Subthread,
    schema: &FeatureSchema,
    vectors: &[StateVector],
) -> Result<FeatureMap> {
    if vectors.is_empty() {
        return Err(Error::EmptySubthread(subthread.player_id.clone()));
    }
    if vectors.len() != subthread.states.len() {
        return Err(Error::DimensionMismatch {
            expected: subthread.states.len(),
            got: vectors.len(),
        });
    }
    let d = schema.dim();
    let mut mu = vec![0.0; d];
    for (t, (phi, msg)) in vectors.iter().zip(&subthread.states).enumerate() {
        if phi.values.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: phi.values.len() });
        }
        let exponent = match schema.time_index {
            TimeIndex::OwnUtterance => t as i32,
            TimeIndex::GlobalSeq => msg.seq as i32,
        };
        let w = schema.gamma.powi(exponent);
        for (m, v) in mu.iter_mut().zip(&phi.values) {
            *m += w * v;
        }
    }
    Ok(FeatureMap { mu, horizon: vectors.len() - 1 })
}

/// Keep only the player's first n utterances; final score unchanged.
pub fn truncate_subthread(subthread: &Subthread, n: usize) -> Subthread {
    assert!(n >= 1, "truncation length must be at least 1");
    Subthread {
        player_id: subthread.player_id.clone(),
        states: subthread.states.iter().take(n).cloned().collect(),
        final_score: subthread.final_score,
    }
}
