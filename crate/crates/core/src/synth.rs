//! Deterministic synthetic corpus generator with planted ground truth.
//!
//! Two score modes:
//! - planted-regression: each player's final score is exactly
//!   theta_star . mu(h) (plus optional Gaussian noise), with mu computed by
//!   the encoding module itself. Within a thread each player keeps one
//!   action and the communication graph is frozen (all turns equal), so
//!   per-state rewards are constant per subthread and the winner ordering
//!   agrees between discounted sums and plain means.
//! - behavioral: scores evolve during play. A Reasoning message earns the
//!   sender their current eigenvector centrality; every message costs a
//!   small drift. Winners are genuinely graph-dependent.
//!
//! Also hosts the brute-force pseudo-inverse oracle used to cross-check
//! the main least-squares solver; it is built on a hand-rolled Jacobi
//! eigendecomposition, independent of the solver path.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Game, Message, StrategyLabels, Thread};
use crate::encoding::{FeatureSchema, Variant};
use crate::error::{Error, Result};
use crate::graph::{eigen_centrality, CentralityCache, CommGraph};
use crate::labeler::{assign_action, Action, VoteTarget};
use crate::pipeline::{encode_thread, PipelineOptions};

pub const FRIENDSHIP_TOKENS: [&str; 6] = ["friend", "ally", "trust", "together", "loyal", "promise"];
pub const REASONING_TOKENS: [&str; 6] = ["because", "therefore", "logic", "consider", "plan", "reason"];
pub const GAME_MOVE_TOKENS: [&str; 6] = ["army", "fleet", "move", "attack", "hold", "support"];
pub const SHARE_INFO_TOKENS: [&str; 6] = ["news", "report", "heard", "info", "tell", "update"];
pub const FILLER_TOKENS: [&str; 6] = ["hello", "well", "okay", "hmm", "right", "season"];

/// Default planted reward vector for the 10-dimensional graph-aware
/// encoding. The score-difference weight is zero (final scores feed back
/// into that feature, so a nonzero weight would make the construction
/// circular) and the bias weight equals the sum of the action weights (the
/// bias column is exactly the sum of the one-hot columns, so only
/// coefficients orthogonal to that null direction are identifiable).
pub const DEFAULT_THETA_STAR: [f64; 10] =
    [0.6, 0.0, 0.3, 0.2, 0.1, 1.5, -0.8, 0.7, 0.05, -0.04];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    PlantedRegression,
    Behavioral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_players: usize,
    pub n_games: usize,
    pub threads_per_game: usize,
    /// Inclusive (min, max) messages per thread.
    pub messages_per_thread: (usize, usize),
    pub mode: ScoreMode,
    /// Planted reward vector (planted-regression mode); defaults to
    /// [`DEFAULT_THETA_STAR`].
    pub theta_star: Option<Vec<f64>>,
    pub noise_sigma: f64,
    pub gamma: f64,
    /// Fraction of messages that keep their gold labels.
    pub labeled_fraction: f64,
    /// Alternate players between Friendship-leaning and Reasoning-leaning
    /// types, planting the co-occurrence structure of strategy rates.
    pub typed_players: bool,
    /// Probability that a strategy token is swapped for one from another
    /// pool, degrading classifier separability. 0 keeps pools disjoint.
    pub vocab_overlap: f64,
    /// Per-message score decay in behavioral mode.
    pub drift: f64,
    /// Std-dev of observation noise on mid-thread score snapshots in
    /// behavioral mode. Each player's last message of a thread always
    /// records the exact score, so final scores stay noise-free.
    pub obs_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_players: 6,
            n_games: 4,
            threads_per_game: 8,
            messages_per_thread: (6, 12),
            mode: ScoreMode::PlantedRegression,
            theta_star: None,
            noise_sigma: 0.0,
            gamma: 0.9,
            labeled_fraction: 1.0,
            typed_players: true,
            vocab_overlap: 0.0,
            drift: 0.02,
            obs_sigma: 30.0,
        }
    }
}

/// Per-thread planted truth, consistent with the emitted corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadLedger {
    pub game_id: String,
    pub thread_id: String,
    pub winner: Option<String>,
    pub message_counts: BTreeMap<String, usize>,
    pub final_scores: BTreeMap<String, f64>,
    /// Exact feature maps per player (planted-regression mode only).
    pub mu: Option<BTreeMap<String, Vec<f64>>>,
    /// True strategy flags per message, in seq order.
    pub true_labels: Vec<[u8; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorLedger {
    pub theta_star: Option<Vec<f64>>,
    pub token_inventory: BTreeSet<String>,
    /// Realized flag rates over all messages, order F, R, GM, SI.
    pub strategy_rates: [f64; 4],
    pub threads: Vec<ThreadLedger>,
}

impl GeneratorLedger {
    /// JSONL: a header line followed by one line per thread.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Header<'a> {
            theta_star: &'a Option<Vec<f64>>,
            token_inventory: &'a BTreeSet<String>,
            strategy_rates: [f64; 4],
        }
        let mut out = serde_json::to_string(&Header {
            theta_star: &self.theta_star,
            token_inventory: &self.token_inventory,
            strategy_rates: self.strategy_rates,
        })
        .expect("ledger header serializes");
        out.push('\n');
        for t in &self.threads {
            out.push_str(&serde_json::to_string(t).expect("ledger thread serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            theta_star: Option<Vec<f64>>,
            token_inventory: BTreeSet<String>,
            strategy_rates: [f64; 4],
        }
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let header: Header = serde_json::from_str(
            lines.next().ok_or_else(|| Error::EmptyInput("empty ledger".into()))?,
        )
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let mut threads = Vec::new();
        for (i, line) in lines.enumerate() {
            threads.push(
                serde_json::from_str(line)
                    .map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?,
            );
        }
        Ok(Self {
            theta_star: header.theta_star,
            token_inventory: header.token_inventory,
            strategy_rates: header.strategy_rates,
            threads,
        })
    }
}

fn validate_config(config: &SynthConfig) -> Result<Vec<f64>> {
    let (lo, hi) = config.messages_per_thread;
    if lo == 0 || lo > hi {
        return Err(Error::InfeasibleConfig(format!("messages_per_thread ({lo}, {hi})")));
    }
    if config.n_players < 2 || config.n_games == 0 || config.threads_per_game == 0 {
        return Err(Error::InfeasibleConfig("need >= 2 players, >= 1 game and thread".into()));
    }
    if config.noise_sigma < 0.0 {
        return Err(Error::InfeasibleConfig(format!("noise_sigma {}", config.noise_sigma)));
    }
    if !(0.0..1.0).contains(&config.gamma) {
        return Err(Error::InfeasibleConfig(format!("gamma {}", config.gamma)));
    }
    if !(0.0..=1.0).contains(&config.labeled_fraction) || !(0.0..=1.0).contains(&config.vocab_overlap)
    {
        return Err(Error::InfeasibleConfig("fractions must lie in [0,1]".into()));
    }
    let theta = config.theta_star.clone().unwrap_or_else(|| DEFAULT_THETA_STAR.to_vec());
    if config.mode == ScoreMode::PlantedRegression {
        if theta.len() != 10 {
            return Err(Error::InfeasibleConfig(format!(
                "planted theta has {} components, need 10",
                theta.len()
            )));
        }
        if theta[1] != 0.0 {
            return Err(Error::InfeasibleConfig(
                "planted theta must have a zero score_diff weight; final scores feed back into that feature".into(),
            ));
        }
        if config.labeled_fraction != 1.0 {
            return Err(Error::InfeasibleConfig(
                "planted-regression mode needs labeled_fraction = 1 so actions are recoverable".into(),
            ));
        }
    }
    Ok(theta)
}

fn strategy_rates(player_index: usize, typed: bool) -> [f64; 4] {
    if !typed {
        return [0.3, 0.5, 0.3, 0.3];
    }
    if player_index % 2 == 0 {
        // Reasoning-leaning: R, GM, SI co-occur.
        [0.1, 0.7, 0.55, 0.55]
    } else {
        // Friendship-leaning.
        [0.8, 0.1, 0.08, 0.08]
    }
}

fn token_inventory() -> BTreeSet<String> {
    FRIENDSHIP_TOKENS
        .iter()
        .chain(&REASONING_TOKENS)
        .chain(&GAME_MOVE_TOKENS)
        .chain(&SHARE_INFO_TOKENS)
        .chain(&FILLER_TOKENS)
        .map(|s| s.to_string())
        .collect()
}

fn render_text(labels: &StrategyLabels, overlap: f64, rng: &mut ChaCha8Rng) -> String {
    let pools: [(&[&str; 6], f64); 4] = [
        (&FRIENDSHIP_TOKENS, labels.friendship),
        (&REASONING_TOKENS, labels.reasoning),
        (&GAME_MOVE_TOKENS, labels.game_move),
        (&SHARE_INFO_TOKENS, labels.share_info),
    ];
    let all: Vec<&str> = FRIENDSHIP_TOKENS
        .iter()
        .chain(&REASONING_TOKENS)
        .chain(&GAME_MOVE_TOKENS)
        .chain(&SHARE_INFO_TOKENS)
        .chain(&FILLER_TOKENS)
        .copied()
        .collect();
    let mut tokens: Vec<&str> = Vec::new();
    for (pool, flag) in pools {
        if flag >= 0.5 {
            for _ in 0..2 {
                tokens.push(pool[rng.gen_range(0..pool.len())]);
            }
        }
    }
    tokens.push(FILLER_TOKENS[rng.gen_range(0..FILLER_TOKENS.len())]);
    if tokens.len() == 1 {
        tokens.push(FILLER_TOKENS[rng.gen_range(0..FILLER_TOKENS.len())]);
    }
    if overlap > 0.0 {
        for t in tokens.iter_mut() {
            if rng.gen_bool(overlap) {
                *t = all[rng.gen_range(0..all.len())];
            }
        }
    }
    tokens.join(" ")
}

fn weighted_pair(n: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    // Chattiness decays with player index, spreading centrality.
    let weights: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let pick = |rng: &mut ChaCha8Rng, skip: Option<usize>| {
        let total: f64 = weights
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, w)| w)
            .sum();
        let mut r = rng.gen_range(0.0..total);
        for (i, w) in weights.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            if r < *w {
                return i;
            }
            r -= w;
        }
        n - 1
    };
    let a = pick(rng, None);
    let b = pick(rng, Some(a));
    (a, b)
}

#[derive(Clone)]
struct MessagePlan {
    thread_index: usize,
    sender: usize,
    recipient: usize,
    labels: StrategyLabels,
}

/// Generate a corpus plus its ledger. Deterministic given the seed.
pub fn generate(config: &SynthConfig) -> Result<(Corpus, GeneratorLedger)> {
    let theta = validate_config(config)?;
    let mut corpus = Corpus::default();
    let mut ledger = GeneratorLedger {
        theta_star: (config.mode == ScoreMode::PlantedRegression).then(|| theta.clone()),
        token_inventory: token_inventory(),
        strategy_rates: [0.0; 4],
        threads: Vec::new(),
    };
    let mut flag_totals = [0.0f64; 4];
    let mut n_messages = 0usize;
    for gi in 0..config.n_games {
        let seed = config.seed.wrapping_add((gi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let game_id = format!("g{gi}");
        let entries = match config.mode {
            ScoreMode::PlantedRegression => {
                generate_planted_game(config, &theta, &game_id, &mut rng, &mut corpus)?
            }
            ScoreMode::Behavioral => {
                generate_behavioral_game(config, &game_id, &mut rng, &mut corpus)?
            }
        };
        for entry in &entries {
            for flags in &entry.true_labels {
                for k in 0..4 {
                    flag_totals[k] += flags[k] as f64;
                }
                n_messages += 1;
            }
        }
        ledger.threads.extend(entries);
    }
    ledger.strategy_rates = flag_totals.map(|t| t / n_messages.max(1) as f64);
    Ok((corpus, ledger))
}

fn push_message(
    corpus: &mut Corpus,
    game_id: &str,
    thread_id: &str,
    seq: u32,
    turn: u32,
    sender: &str,
    recipient: &str,
    score: f64,
    labels: StrategyLabels,
    keep_labels: bool,
    text: String,
) {
    let game = corpus
        .games
        .entry(game_id.to_string())
        .or_insert_with(|| Game { game_id: game_id.to_string(), ..Game::default() });
    game.players.insert(sender.to_string());
    game.players.insert(recipient.to_string());
    let thread = game.threads.entry(thread_id.to_string()).or_insert_with(|| Thread {
        game_id: game_id.to_string(),
        thread_id: thread_id.to_string(),
        participants: [sender.to_string(), recipient.to_string()],
        messages: Vec::new(),
        final_scores: BTreeMap::new(),
    });
    thread.messages.push(Message {
        game_id: game_id.to_string(),
        thread_id: thread_id.to_string(),
        seq,
        sender_id: sender.to_string(),
        recipient_id: recipient.to_string(),
        turn,
        text,
        sender_score: score,
        labels: keep_labels.then_some(labels),
        predicted: None,
        action: None,
    });
    thread.final_scores.insert(sender.to_string(), score);
}

fn sample_labels(rates: [f64; 4], action: Option<Action>, rng: &mut ChaCha8Rng) -> StrategyLabels {
    let gm = rng.gen_bool(rates[2]);
    let si = rng.gen_bool(rates[3]);
    match action {
        // Constant planted action: F and R flags are forced so the voting
        // rule reproduces the action exactly; GM/SI stay free.
        Some(Action::Friendship) => StrategyLabels::from_flags(true, false, gm, si),
        Some(Action::Reasoning) => StrategyLabels::from_flags(false, true, gm, si),
        Some(Action::Neutral) => StrategyLabels::from_flags(false, false, gm, si),
        None => StrategyLabels::from_flags(rng.gen_bool(rates[0]), rng.gen_bool(rates[1]), gm, si),
    }
}

fn sample_action(player_index: usize, typed: bool, rng: &mut ChaCha8Rng) -> Action {
    let (f, r) = if !typed {
        (0.35, 0.45)
    } else if player_index % 2 == 0 {
        (0.15, 0.70)
    } else {
        (0.70, 0.15)
    };
    let x: f64 = rng.gen();
    if x < f {
        Action::Friendship
    } else if x < f + r {
        Action::Reasoning
    } else {
        Action::Neutral
    }
}

fn generate_planted_game(
    config: &SynthConfig,
    theta: &[f64],
    game_id: &str,
    rng: &mut ChaCha8Rng,
    corpus: &mut Corpus,
) -> Result<Vec<ThreadLedger>> {
    let (lo, hi) = config.messages_per_thread;
    let normal = StdNormal;
    let mut thread_ids = Vec::new();
    let mut walk: BTreeMap<String, f64> = BTreeMap::new();
    // Lay down messages first; the communication graph is fixed by who
    // talks to whom, not by scores or labels, so scores can be patched
    // afterwards without disturbing centralities. All turns are 0: every
    // state sees the same frozen game graph.
    for ti in 0..config.threads_per_game {
        let thread_id = format!("{game_id}_t{ti}");
        let (a, b) = weighted_pair(config.n_players, rng);
        let mut length = rng.gen_range(lo..=hi).max(2);
        if length % 2 == 1 {
            length += 1;
        }
        let first = if rng.gen_bool(0.5) { a } else { b };
        let second = if first == a { b } else { a };
        let actions = BTreeMap::from([
            (first, sample_action(first, config.typed_players, rng)),
            (second, sample_action(second, config.typed_players, rng)),
        ]);
        for seq in 0..length {
            let (s, r) = if seq % 2 == 0 { (first, second) } else { (second, first) };
            let sender = format!("p{s}");
            let recipient = format!("p{r}");
            let action = actions[&s];
            let labels =
                sample_labels(strategy_rates(s, config.typed_players), Some(action), rng);
            let score = {
                let entry = walk.entry(sender.clone()).or_insert(5.0);
                *entry += rng.gen_range(-0.2..0.2);
                *entry
            };
            let text = render_text(&labels, config.vocab_overlap, rng);
            push_message(
                corpus,
                game_id,
                &thread_id,
                seq as u32,
                0,
                &sender,
                &recipient,
                score,
                labels,
                true,
                text,
            );
        }
        thread_ids.push(thread_id);
    }
    // One-sided broadcast threads: a single speaker, never answered. They
    // are degenerate (excluded from fitting and evaluation) but they break
    // the symmetry of the game graph, so eigen, authority, hub and the two
    // degrees carry independent signal.
    for ai in 0..(config.threads_per_game / 2 + 1) {
        let thread_id = format!("{game_id}_a{ai}");
        let (u, v) = weighted_pair(config.n_players, rng);
        let length = rng.gen_range(1..=3);
        let action = sample_action(u, config.typed_players, rng);
        for seq in 0..length {
            let sender = format!("p{u}");
            let recipient = format!("p{v}");
            let labels =
                sample_labels(strategy_rates(u, config.typed_players), Some(action), rng);
            let score = {
                let entry = walk.entry(sender.clone()).or_insert(5.0);
                *entry += rng.gen_range(-0.2..0.2);
                *entry
            };
            let text = render_text(&labels, config.vocab_overlap, rng);
            push_message(
                corpus, game_id, &thread_id, seq, 0, &sender, &recipient, score, labels, true,
                text,
            );
        }
    }

    // Now plant the regression targets and, where the constant per-state
    // rewards tie, re-roll one player's action until they separate.
    let schema = FeatureSchema::new(Variant::GraphAware, config.gamma)?;
    let opts = PipelineOptions::new(schema.clone());
    let mut entries = Vec::new();
    for thread_id in thread_ids {
        let mut attempts = 0;
        loop {
            let mut cache = CentralityCache::new(false);
            let thread = corpus.games[game_id].threads[&thread_id].clone();
            let encoded = encode_thread(corpus, &thread, &opts, &mut cache, None)?
                .expect("planted threads have both speakers");
            let fs: Vec<f64> = encoded
                .players
                .iter()
                .map(|p| {
                    let exact: f64 =
                        p.mu.mu.iter().zip(theta).map(|(m, t)| m * t).sum();
                    exact + config.noise_sigma * normal.sample(rng)
                })
                .collect();
            // A healthy separation margin keeps the winner ordering stable
            // under the solver's own (tiny) recovery error.
            let tied = config.noise_sigma == 0.0 && (fs[0] - fs[1]).abs() < 1e-3;
            if tied && attempts < 8 {
                attempts += 1;
                reroll_action(corpus, game_id, &thread_id, rng);
                continue;
            }
            if tied {
                return Err(Error::InfeasibleConfig(format!(
                    "could not separate planted scores in thread {thread_id}"
                )));
            }
            // Patch each player's last message; the corpus-level final
            // score definition then yields exactly f.
            {
                let thread =
                    corpus.games.get_mut(game_id).unwrap().threads.get_mut(&thread_id).unwrap();
                for (p, f) in encoded.players.iter().zip(&fs) {
                    if let Some(m) =
                        thread.messages.iter_mut().rev().find(|m| m.sender_id == p.player_id)
                    {
                        m.sender_score = *f;
                    }
                    thread.final_scores.insert(p.player_id.clone(), *f);
                }
            }
            // Re-encode with the patched scores for the ledger mu; the
            // targets are unchanged because theta's score weight is zero.
            let mut cache = CentralityCache::new(false);
            let thread = corpus.games[game_id].threads[&thread_id].clone();
            let encoded = encode_thread(corpus, &thread, &opts, &mut cache, None)?.unwrap();
            let mut mu_map = BTreeMap::new();
            let mut counts = BTreeMap::new();
            let mut final_scores = BTreeMap::new();
            for (p, f) in encoded.players.iter().zip(&fs) {
                mu_map.insert(p.player_id.clone(), p.mu.mu.clone());
                counts.insert(p.player_id.clone(), p.vectors.len());
                final_scores.insert(p.player_id.clone(), *f);
            }
            let winner = if fs[0] > fs[1] {
                Some(encoded.players[0].player_id.clone())
            } else if fs[1] > fs[0] {
                Some(encoded.players[1].player_id.clone())
            } else {
                None
            };
            entries.push(ThreadLedger {
                game_id: game_id.to_string(),
                thread_id: thread_id.clone(),
                winner,
                message_counts: counts,
                final_scores,
                mu: Some(mu_map),
                true_labels: thread
                    .messages
                    .iter()
                    .map(|m| m.labels.unwrap().flags(0.5).map(|b| b as u8))
                    .collect(),
            });
            break;
        }
    }
    Ok(entries)
}

/// Switch the first speaker's constant action to a different one so the
/// two planted per-state rewards separate.
fn reroll_action(corpus: &mut Corpus, game_id: &str, thread_id: &str, rng: &mut ChaCha8Rng) {
    let thread = corpus.games.get_mut(game_id).unwrap().threads.get_mut(thread_id).unwrap();
    let player = thread.messages[0].sender_id.clone();
    let current = thread
        .messages
        .iter()
        .find(|m| m.sender_id == player)
        .and_then(|m| m.labels)
        .map(|l| assign_action(&l, 0.5, VoteTarget::default()))
        .unwrap_or(Action::Neutral);
    let others: Vec<Action> = [Action::Friendship, Action::Reasoning, Action::Neutral]
        .into_iter()
        .filter(|a| *a != current)
        .collect();
    let action = others[rng.gen_range(0..others.len())];
    for m in thread.messages.iter_mut().filter(|m| m.sender_id == player) {
        let old = m.labels.unwrap();
        m.labels = Some(StrategyLabels::from_flags(
            action == Action::Friendship,
            action == Action::Reasoning,
            old.game_move >= 0.5,
            old.share_info >= 0.5,
        ));
    }
}

fn generate_behavioral_game(
    config: &SynthConfig,
    game_id: &str,
    rng: &mut ChaCha8Rng,
    corpus: &mut Corpus,
) -> Result<Vec<ThreadLedger>> {
    let (lo, hi) = config.messages_per_thread;
    let normal = StdNormal;
    // Plan all threads, then interleave their messages into one global
    // turn order so the graph grows as the game unfolds.
    let mut plans: Vec<Vec<MessagePlan>> = Vec::new();
    for ti in 0..config.threads_per_game {
        let (a, b) = weighted_pair(config.n_players, rng);
        let length = rng.gen_range(lo..=hi);
        let first = if rng.gen_bool(0.5) { a } else { b };
        let second = if first == a { b } else { a };
        let mut plan = Vec::with_capacity(length);
        for seq in 0..length {
            let (s, r) = if seq % 2 == 0 { (first, second) } else { (second, first) };
            let labels = sample_labels(strategy_rates(s, config.typed_players), None, rng);
            plan.push(MessagePlan {
                thread_index: ti,
                sender: s,
                recipient: r,
                labels,
            });
        }
        plans.push(plan);
    }
    // Interleave.
    let mut order: Vec<MessagePlan> = Vec::new();
    let mut cursors = vec![0usize; plans.len()];
    let mut remaining: usize = plans.iter().map(|p| p.len()).sum();
    while remaining > 0 {
        let live: Vec<usize> =
            (0..plans.len()).filter(|&i| cursors[i] < plans[i].len()).collect();
        let pick = live[rng.gen_range(0..live.len())];
        order.push(plans[pick][cursors[pick]].clone());
        cursors[pick] += 1;
        remaining -= 1;
    }

    let nodes: Vec<String> = (0..config.n_players).map(|i| format!("p{i}")).collect();
    // Position of each sender's last message within its thread; only that
    // snapshot records the exact score.
    let mut last_by_sender: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); plans.len()];
    for (ti, plan) in plans.iter().enumerate() {
        for (seq, m) in plan.iter().enumerate() {
            last_by_sender[ti].insert(m.sender, seq);
        }
    }
    let mut adj = vec![vec![0.0; config.n_players]; config.n_players];
    let mut scores: BTreeMap<usize, f64> = (0..config.n_players).map(|i| (i, 10.0)).collect();
    let mut seqs = vec![0u32; plans.len()];
    let mut true_labels: Vec<Vec<[u8; 4]>> = vec![Vec::new(); plans.len()];
    let mut counts: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); plans.len()];
    let mut finals: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new(); plans.len()];
    for (turn, plan) in order.iter().enumerate() {
        adj[plan.sender][plan.recipient] += 1.0;
        let graph =
            CommGraph { nodes: nodes.clone(), adj: adj.clone(), cutoff: turn as u32 };
        let eigen = eigen_centrality(&graph, false);
        let score = scores.get_mut(&plan.sender).unwrap();
        // Score dynamics follow network position, not rhetoric: every
        // message earns the sender its current eigen centrality.
        *score += eigen[&nodes[plan.sender]];
        *score -= config.drift;
        if config.noise_sigma > 0.0 {
            *score += config.noise_sigma * normal.sample(rng);
        }
        let thread_id = format!("{game_id}_t{}", plan.thread_index);
        let sender = nodes[plan.sender].clone();
        let recipient = nodes[plan.recipient].clone();
        let keep_labels = config.labeled_fraction >= 1.0 || rng.gen_bool(config.labeled_fraction);
        let text = render_text(&plan.labels, config.vocab_overlap, rng);
        let truth = *score;
        let is_last = last_by_sender[plan.thread_index][&plan.sender]
            == seqs[plan.thread_index] as usize;
        let score = if is_last || config.obs_sigma == 0.0 {
            truth
        } else {
            truth + config.obs_sigma * normal.sample(rng)
        };
        push_message(
            corpus,
            game_id,
            &thread_id,
            seqs[plan.thread_index],
            turn as u32,
            &sender,
            &recipient,
            score,
            plan.labels,
            keep_labels,
            text,
        );
        seqs[plan.thread_index] += 1;
        true_labels[plan.thread_index].push(plan.labels.flags(0.5).map(|b| b as u8));
        *counts[plan.thread_index].entry(sender.clone()).or_insert(0) += 1;
        finals[plan.thread_index].insert(sender, score);
    }
    let mut entries = Vec::new();
    for ti in 0..plans.len() {
        let fs = &finals[ti];
        let winner = match fs.len() {
            2 => {
                let mut it = fs.iter();
                let (pa, &fa) = it.next().unwrap();
                let (pb, &fb) = it.next().unwrap();
                if fa > fb {
                    Some(pa.clone())
                } else if fb > fa {
                    Some(pb.clone())
                } else {
                    None
                }
            }
            _ => None,
        };
        entries.push(ThreadLedger {
            game_id: game_id.to_string(),
            thread_id: format!("{game_id}_t{ti}"),
            winner,
            message_counts: counts[ti].clone(),
            final_scores: fs.clone(),
            mu: None,
            true_labels: true_labels[ti].clone(),
        });
    }
    Ok(entries)
}

// Box-Muller standard normal; keeps the generator free of extra deps.
struct StdNormal;

impl Distribution<f64> for StdNormal {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Brute-force ridge/minimum-norm least squares via an explicit Jacobi
/// eigendecomposition of the Gram matrix. Independent of the main solver.
pub fn pseudo_inverse_oracle(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if rows.is_empty() || rows.len() != targets.len() {
        return Err(Error::EmptyInput("oracle needs matching rows and targets".into()));
    }
    let n = rows.len();
    let d = rows[0].len();
    let mut gram = vec![vec![0.0; d]; d];
    for row in rows {
        for i in 0..d {
            for j in 0..d {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    let (eigvecs, eigvals) = jacobi_eigen(&gram);
    let mut xty = vec![0.0; d];
    for (row, &t) in rows.iter().zip(targets) {
        for i in 0..d {
            xty[i] += row[i] * t;
        }
    }
    let reg = n as f64 * lambda;
    let max_eig = eigvals.iter().cloned().fold(0.0f64, f64::max);
    // theta = Q g(L) Q^T X^T y, with g inverting eigenvalues (regularized,
    // or thresholded for the minimum-norm pseudo-inverse).
    let mut qt_b = vec![0.0; d];
    for k in 0..d {
        for i in 0..d {
            qt_b[k] += eigvecs[i][k] * xty[i];
        }
    }
    for k in 0..d {
        let l = eigvals[k];
        qt_b[k] *= if reg > 0.0 {
            1.0 / (l + reg)
        } else if l > max_eig * 1e-12 {
            1.0 / l
        } else {
            0.0
        };
    }
    let mut theta = vec![0.0; d];
    for i in 0..d {
        for k in 0..d {
            theta[i] += eigvecs[i][k] * qt_b[k];
        }
    }
    Ok(theta)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// column eigenvector matrix and the eigenvalues.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut q = vec![vec![0.0; d]; d];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = matrix
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                off = off.max(a[i][j].abs());
            }
        }
        if off <= scale * 1e-14 {
            break;
        }
        for p in 0..d {
            for r in (p + 1)..d {
                if a[p][r].abs() <= scale * 1e-16 {
                    continue;
                }
                let tau = (a[r][r] - a[p][p]) / (2.0 * a[p][r]);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akr = a[k][r];
                    a[k][p] = c * akp - s * akr;
                    a[k][r] = s * akp + c * akr;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let ark = a[r][k];
                    a[p][k] = c * apk - s * ark;
                    a[r][k] = s * apk + c * ark;
                }
                for k in 0..d {
                    let qkp = q[k][p];
                    let qkr = q[k][r];
                    q[k][p] = c * qkp - s * qkr;
                    q[k][r] = s * qkp + c * qkr;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
    (q, eigvals)
}
