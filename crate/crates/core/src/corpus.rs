//! Conversation data model: JSONL ingestion, validation, and per-player
//! subthread extraction.
//!
//! One JSONL line is one message. Messages group into two-party threads,
//! threads group into games. A thread is the ordered state sequence a
//! reward model is fit on; each participant's own messages form a
//! subthread paired with that player's final score.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::labeler::Action;

/// Per-utterance rhetorical-strategy labels. Gold labels are 0/1 flags;
/// predicted labels are probabilities in [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct StrategyLabels {
    pub friendship: f64,
    pub reasoning: f64,
    pub game_move: f64,
    pub share_info: f64,
}

impl StrategyLabels {
    pub const STRATEGY_NAMES: [&'static str; 4] =
        ["friendship", "reasoning", "game_move", "share_info"];

    pub fn new(friendship: f64, reasoning: f64, game_move: f64, share_info: f64) -> Self {
        Self { friendship, reasoning, game_move, share_info }
    }

    pub fn from_flags(f: bool, r: bool, gm: bool, si: bool) -> Self {
        Self::new(f as u8 as f64, r as u8 as f64, gm as u8 as f64, si as u8 as f64)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.friendship, self.reasoning, self.game_move, self.share_info]
    }

    pub fn in_range(&self) -> bool {
        self.as_array().iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p))
    }

    /// Thresholded flags.
    pub fn flags(&self, threshold: f64) -> [bool; 4] {
        let a = self.as_array();
        [a[0] >= threshold, a[1] >= threshold, a[2] >= threshold, a[3] >= threshold]
    }
}

// Gold flags stay integers on the wire; probabilities stay floats.
fn ser_prob<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && (0.0..=1.0).contains(v) {
        s.serialize_u8(*v as u8)
    } else {
        s.serialize_f64(*v)
    }
}

impl Serialize for StrategyLabels {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("StrategyLabels", 4)?;
        struct P(f64);
        impl Serialize for P {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                ser_prob(&self.0, s)
            }
        }
        st.serialize_field("friendship", &P(self.friendship))?;
        st.serialize_field("reasoning", &P(self.reasoning))?;
        st.serialize_field("game_move", &P(self.game_move))?;
        st.serialize_field("share_info", &P(self.share_info))?;
        st.end()
    }
}

/// One utterance; the carrier of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub game_id: String,
    pub thread_id: String,
    pub seq: u32,
    #[serde(rename = "sender")]
    pub sender_id: String,
    #[serde(rename = "recipient")]
    pub recipient_id: String,
    pub turn: u32,
    pub text: String,
    pub sender_score: f64,
    pub labels: Option<StrategyLabels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<StrategyLabels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
}

/// A two-party conversation thread.
#[derive(Debug, Clone, PartialEq)]
pub struct Thread {
    pub game_id: String,
    pub thread_id: String,
    pub participants: [String; 2],
    pub messages: Vec<Message>,
    /// Player score at thread end: the player's sender_score on their last
    /// message. A participant who never spoke has no entry and the thread
    /// is degenerate (excluded from training and evaluation).
    pub final_scores: BTreeMap<String, f64>,
}

impl Thread {
    pub fn other(&self, player: &str) -> &str {
        if self.participants[0] == player {
            &self.participants[1]
        } else {
            &self.participants[0]
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.final_scores.len() != 2
            || self.participants.iter().any(|p| {
                !self.messages.iter().any(|m| &m.sender_id == p)
            })
    }
}

/// One player's state subsequence within a thread, paired with their final
/// score f.
#[derive(Debug, Clone, PartialEq)]
pub struct Subthread {
    pub player_id: String,
    pub states: Vec<Message>,
    pub final_score: Option<f64>,
}

impl Subthread {
    pub fn is_degenerate(&self) -> bool {
        self.states.is_empty() || self.final_score.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Game {
    pub game_id: String,
    pub players: BTreeSet<String>,
    pub threads: BTreeMap<String, Thread>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub games: BTreeMap<String, Game>,
}

impl Corpus {
    pub fn threads(&self) -> impl Iterator<Item = &Thread> {
        self.games.values().flat_map(|g| g.threads.values())
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.threads().flat_map(|t| t.messages.iter())
    }

    pub fn messages_mut(&mut self) -> impl Iterator<Item = &mut Message> {
        self.games
            .values_mut()
            .flat_map(|g| g.threads.values_mut())
            .flat_map(|t| t.messages.iter_mut())
    }

    pub fn n_threads(&self) -> usize {
        self.games.values().map(|g| g.threads.len()).sum()
    }
}

/// A data-level invariant failure. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub thread_id: String,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "thread {}: {}", self.thread_id, self.detail)
    }
}

/// Parse a JSONL message stream into a corpus grouped by game then thread,
/// messages sorted by seq.
///
/// Hard errors: malformed lines (reported with line number), duplicate
/// (thread_id, seq), self-addressed messages, more than two participants,
/// non-finite scores.
pub fn parse_corpus<R: BufRead>(input: R) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let msg: Message = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        if msg.sender_id == msg.recipient_id {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("sender and recipient are both {:?}", msg.sender_id),
            });
        }
        if !msg.sender_score.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("non-finite sender_score {}", msg.sender_score),
            });
        }
        if let Some(l) = &msg.labels {
            if !l.in_range() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "labels outside [0,1]".into(),
                });
            }
        }
        let game = corpus
            .games
            .entry(msg.game_id.clone())
            .or_insert_with(|| Game { game_id: msg.game_id.clone(), ..Game::default() });
        game.players.insert(msg.sender_id.clone());
        game.players.insert(msg.recipient_id.clone());
        let thread = game.threads.entry(msg.thread_id.clone()).or_insert_with(|| Thread {
            game_id: msg.game_id.clone(),
            thread_id: msg.thread_id.clone(),
            participants: [msg.sender_id.clone(), msg.recipient_id.clone()],
            messages: Vec::new(),
            final_scores: BTreeMap::new(),
        });
        let pair = {
            let mut p = [msg.sender_id.clone(), msg.recipient_id.clone()];
            p.sort();
            p
        };
        let mut known = thread.participants.clone();
        known.sort();
        if pair != known {
            return Err(Error::Parse {
                line: lineno,
                msg: format!(
                    "thread {:?} has more than two participants ({:?} vs {:?})",
                    msg.thread_id, pair, known
                ),
            });
        }
        if thread.messages.iter().any(|m| m.seq == msg.seq) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate seq {} in thread {:?}", msg.seq, msg.thread_id),
            });
        }
        thread.messages.push(msg);
    }
    for game in corpus.games.values_mut() {
        for thread in game.threads.values_mut() {
            thread.messages.sort_by_key(|m| m.seq);
            thread.final_scores = final_scores(&thread.messages);
        }
    }
    Ok(corpus)
}

fn final_scores(messages: &[Message]) -> BTreeMap<String, f64> {
    let mut scores = BTreeMap::new();
    for m in messages {
        scores.insert(m.sender_id.clone(), m.sender_score);
    }
    scores
}

/// Serialize a corpus back to JSONL, one message per line, in (game,
/// thread, seq) order. `parse_corpus` of the output reproduces the input
/// corpus exactly.
pub fn serialize_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for thread in corpus.threads() {
        for msg in &thread.messages {
            serde_json::to_writer(&mut out, msg)
                .map_err(|e| Error::Validation(format!("serialize: {e}")))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Split a thread into the two participants' subthreads, preserving
/// within-player message order. A silent participant yields an
/// empty-states, degenerate subthread.
pub fn extract_subthreads(thread: &Thread) -> [Subthread; 2] {
    let mk = |player: &String| Subthread {
        player_id: player.clone(),
        states: thread
            .messages
            .iter()
            .filter(|m| &m.sender_id == player)
            .cloned()
            .collect(),
        final_score: thread.final_scores.get(player).copied(),
    };
    [mk(&thread.participants[0]), mk(&thread.participants[1])]
}

/// Check every type invariant; returns the empty list iff the corpus is
/// clean.
pub fn validate_corpus(corpus: &Corpus) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen_threads: BTreeSet<&str> = BTreeSet::new();
    for game in corpus.games.values() {
        for thread in game.threads.values() {
            if !seen_threads.insert(&thread.thread_id) {
                violations.push(Violation {
                    thread_id: thread.thread_id.clone(),
                    detail: "duplicate thread_id across games".into(),
                });
            }
            for (expect, m) in thread.messages.iter().enumerate() {
                if m.seq as usize != expect {
                    violations.push(Violation {
                        thread_id: thread.thread_id.clone(),
                        detail: format!("seq gap: expected seq {expect}, found {}", m.seq),
                    });
                    break;
                }
            }
            for m in &thread.messages {
                if m.sender_id == m.recipient_id {
                    violations.push(Violation {
                        thread_id: thread.thread_id.clone(),
                        detail: format!("self-addressed message at seq {}", m.seq),
                    });
                }
                if !m.sender_score.is_finite() {
                    violations.push(Violation {
                        thread_id: thread.thread_id.clone(),
                        detail: format!("non-finite sender_score at seq {}", m.seq),
                    });
                }
                for labels in [&m.labels, &m.predicted].into_iter().flatten() {
                    if !labels.in_range() {
                        violations.push(Violation {
                            thread_id: thread.thread_id.clone(),
                            detail: format!("labels outside [0,1] at seq {}", m.seq),
                        });
                    }
                }
                let belongs = thread.participants.contains(&m.sender_id)
                    && thread.participants.contains(&m.recipient_id);
                if !belongs {
                    violations.push(Violation {
                        thread_id: thread.thread_id.clone(),
                        detail: format!("message at seq {} names a non-participant", m.seq),
                    });
                }
                if !game.players.contains(&m.sender_id) || !game.players.contains(&m.recipient_id)
                {
                    violations.push(Violation {
                        thread_id: thread.thread_id.clone(),
                        detail: format!("undeclared player referenced at seq {}", m.seq),
                    });
                }
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn line(thread: &str, seq: u32, sender: &str, recipient: &str, score: f64) -> String {
        format!(
            r#"{{"game_id":"g1","thread_id":"{thread}","seq":{seq},"sender":"{sender}","recipient":"{recipient}","turn":{seq},"text":"hi","sender_score":{score},"labels":null}}"#
        )
    }

    #[test]
    fn parses_minimal_two_message_thread() {
        let input = format!("{}\n{}\n", line("t1", 0, "A", "B", 1.0), line("t1", 1, "B", "A", 2.0));
        let corpus = parse_corpus(Cursor::new(input)).unwrap();
        assert_eq!(corpus.games.len(), 1);
        let game = &corpus.games["g1"];
        assert_eq!(game.threads.len(), 1);
        let thread = &game.threads["t1"];
        assert_eq!(thread.messages.len(), 2);
        assert_eq!(thread.final_scores["A"], 1.0);
        assert_eq!(thread.final_scores["B"], 2.0);
    }

    #[test]
    fn rejects_self_addressed_message() {
        let input = line("t1", 0, "A", "A", 1.0);
        let err = parse_corpus(Cursor::new(input)).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn rejects_duplicate_seq() {
        let input = format!("{}\n{}\n", line("t1", 0, "A", "B", 1.0), line("t1", 0, "A", "B", 1.0));
        let err = parse_corpus(Cursor::new(input)).unwrap_err();
        assert!(err.to_string().contains("duplicate seq"), "{err}");
    }

    #[test]
    fn rejects_third_participant() {
        let input = format!("{}\n{}\n", line("t1", 0, "A", "B", 1.0), line("t1", 1, "C", "A", 1.0));
        let err = parse_corpus(Cursor::new(input)).unwrap_err();
        assert!(err.to_string().contains("two participants"), "{err}");
    }

    #[test]
    fn rejects_non_finite_score() {
        let input = line("t1", 0, "A", "B", 1.0).replace("\"sender_score\":1", "\"sender_score\":1e999");
        assert!(parse_corpus(Cursor::new(input)).is_err());
    }

    #[test]
    fn subthreads_partition_messages_by_sender() {
        let input = format!(
            "{}\n{}\n{}\n",
            line("t1", 0, "A", "B", 1.0),
            line("t1", 1, "B", "A", 2.0),
            line("t1", 2, "A", "B", 3.0)
        );
        let corpus = parse_corpus(Cursor::new(input)).unwrap();
        let thread = &corpus.games["g1"].threads["t1"];
        let [a, b] = extract_subthreads(thread);
        assert_eq!(a.states.iter().map(|m| m.seq).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(b.states.iter().map(|m| m.seq).collect::<Vec<_>>(), vec![1]);
        assert_eq!(a.final_score, Some(3.0));
        assert_eq!(b.final_score, Some(2.0));
    }

    #[test]
    fn silent_participant_is_degenerate() {
        let input = format!("{}\n{}\n", line("t1", 0, "A", "B", 1.0), line("t1", 1, "A", "B", 2.0));
        let corpus = parse_corpus(Cursor::new(input)).unwrap();
        let thread = &corpus.games["g1"].threads["t1"];
        assert!(thread.is_degenerate());
        let [a, b] = extract_subthreads(thread);
        assert!(!a.is_degenerate());
        assert!(b.is_degenerate());
        assert!(b.states.is_empty());
        assert_eq!(b.final_score, None);
    }

    #[test]
    fn validate_clean_corpus_is_empty() {
        let input = format!("{}\n{}\n", line("t1", 0, "A", "B", 1.0), line("t1", 1, "B", "A", 2.0));
        let corpus = parse_corpus(Cursor::new(input)).unwrap();
        assert!(validate_corpus(&corpus).is_empty());
    }

    #[test]
    fn validate_reports_seq_gap() {
        let input = format!("{}\n{}\n", line("t1", 0, "A", "B", 1.0), line("t1", 2, "B", "A", 2.0));
        let corpus = parse_corpus(Cursor::new(input)).unwrap();
        let violations = validate_corpus(&corpus);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].detail.contains("expected seq 1"), "{}", violations[0]);
    }

    #[test]
    fn validate_reports_injected_nan_score() {
        let input = format!("{}\n{}\n", line("t1", 0, "A", "B", 1.0), line("t1", 1, "B", "A", 2.0));
        let mut corpus = parse_corpus(Cursor::new(input)).unwrap();
        corpus.messages_mut().next().unwrap().sender_score = f64::NAN;
        let violations = validate_corpus(&corpus);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].detail.contains("non-finite"), "{}", violations[0]);
    }

    #[test]
    fn round_trip_preserves_corpus() {
        let input = format!(
            "{}\n{}\n{}\n",
            line("t1", 0, "A", "B", 1.5),
            line("t1", 1, "B", "A", 2.25),
            line("t2", 0, "A", "C", 0.0)
        );
        let corpus = parse_corpus(Cursor::new(input)).unwrap();
        let mut buf = Vec::new();
        serialize_corpus(&corpus, &mut buf).unwrap();
        let reparsed = parse_corpus(Cursor::new(buf)).unwrap();
        assert_eq!(corpus, reparsed);
    }
}
