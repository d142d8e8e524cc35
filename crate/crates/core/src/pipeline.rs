//! Corpus-to-dataset assembly: encode every non-degenerate thread's two
//! subthreads into (mu, f) pairs plus per-state vectors for reward
//! averaging.

use crate::corpus::{extract_subthreads, Corpus, Thread};
use crate::encoding::{
    encode_state, feature_map, truncate_subthread, FeatureMap, FeatureSchema, StateVector, Variant,
};
use crate::error::Result;
use crate::graph::CentralityCache;

#[derive(Debug, Clone)]
pub struct EncodedSubthread {
    pub player_id: String,
    pub final_score: f64,
    pub mu: FeatureMap,
    pub vectors: Vec<StateVector>,
}

#[derive(Debug, Clone)]
pub struct EncodedThread {
    pub game_id: String,
    pub thread_id: String,
    pub players: [EncodedSubthread; 2],
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub threads: Vec<EncodedThread>,
    /// Threads skipped because a participant never spoke or is missing a
    /// final score.
    pub n_degenerate: usize,
}

impl Dataset {
    /// Flattened (mu, f) training pairs, two per thread.
    pub fn pairs(&self) -> Vec<(FeatureMap, f64)> {
        self.threads
            .iter()
            .flat_map(|t| t.players.iter().map(|p| (p.mu.clone(), p.final_score)))
            .collect()
    }
}

/// Options shared by encoding, training, and evaluation.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub schema: FeatureSchema,
    pub eigen_directed: bool,
}

impl PipelineOptions {
    pub fn new(schema: FeatureSchema) -> Self {
        Self { schema, eigen_directed: false }
    }
}

pub fn encode_thread(
    corpus: &Corpus,
    thread: &Thread,
    opts: &PipelineOptions,
    cache: &mut CentralityCache,
    truncate: Option<usize>,
) -> Result<Option<EncodedThread>> {
    if thread.is_degenerate() {
        return Ok(None);
    }
    let mut players = Vec::with_capacity(2);
    for sub in extract_subthreads(thread) {
        let sub = match truncate {
            Some(n) => truncate_subthread(&sub, n),
            None => sub,
        };
        let mut vectors = Vec::with_capacity(sub.states.len());
        for msg in &sub.states {
            let scores = match opts.schema.variant {
                Variant::ContextAgnostic => None,
                Variant::GraphAware => {
                    Some(cache.scores(corpus, &thread.game_id, msg.turn)?.clone())
                }
            };
            vectors.push(encode_state(msg, thread, scores.as_ref(), &opts.schema)?);
        }
        let mu = feature_map(&sub, &opts.schema, &vectors)?;
        players.push(EncodedSubthread {
            player_id: sub.player_id.clone(),
            final_score: sub.final_score.expect("non-degenerate thread has final scores"),
            mu,
            vectors,
        });
    }
    let players: [EncodedSubthread; 2] = players.try_into().expect("two participants");
    Ok(Some(EncodedThread {
        game_id: thread.game_id.clone(),
        thread_id: thread.thread_id.clone(),
        players,
    }))
}

/// Encode the whole corpus, optionally truncating every subthread to its
/// first n utterances.
pub fn build_dataset(
    corpus: &Corpus,
    opts: &PipelineOptions,
    truncate: Option<usize>,
) -> Result<Dataset> {
    let mut cache = CentralityCache::new(opts.eigen_directed);
    let mut dataset = Dataset::default();
    for thread in corpus.threads() {
        match encode_thread(corpus, thread, opts, &mut cache, truncate)? {
            Some(encoded) => dataset.threads.push(encoded),
            None => dataset.n_degenerate += 1,
        }
    }
    Ok(dataset)
}
