//! Winner definition, reward-accuracy metric, and the first-n ablation.
//!
//! Accuracy is the fraction of threads where the winner (strictly higher
//! final score) also has the strictly greater average estimated reward.
//! Tie threads and degenerate threads are excluded from the denominator
//! and reported separately.

use crate::corpus::{Corpus, Thread};
use crate::error::{Error, Result};
use crate::pipeline::{build_dataset, Dataset, EncodedThread, PipelineOptions};
use crate::sbirl::{fit, RewardModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Winner {
    Player(String),
    Tie,
}

/// The participant with the strictly higher final score.
pub fn thread_winner(thread: &Thread) -> Result<Winner> {
    let [a, b] = &thread.participants;
    let (fa, fb) = match (thread.final_scores.get(a), thread.final_scores.get(b)) {
        (Some(&fa), Some(&fb)) => (fa, fb),
        _ => {
            return Err(Error::Validation(format!(
                "thread {:?} is missing a final score",
                thread.thread_id
            )))
        }
    };
    Ok(if fa > fb {
        Winner::Player(a.clone())
    } else if fb > fa {
        Winner::Player(b.clone())
    } else {
        Winner::Tie
    })
}

/// How per-state rewards aggregate into a subthread's score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardAveraging {
    #[default]
    Mean,
    DiscountedMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// 5-fold cross-validation over threads with fold-wise refit.
    #[default]
    CrossValidation,
    /// Single fit on all threads, evaluated on the same threads.
    InSample,
}

#[derive(Debug, Clone)]
pub struct ThreadRecord {
    pub thread_id: String,
    pub winner: String,
    pub winner_avg_reward: f64,
    pub loser_avg_reward: f64,
    pub correct: bool,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub variant: String,
    pub n_threads_used: usize,
    pub n_ties: usize,
    pub n_degenerate: usize,
    pub accuracy: f64,
    pub records: Vec<ThreadRecord>,
}

fn avg_reward(
    model: &RewardModel,
    sub: &crate::pipeline::EncodedSubthread,
    averaging: RewardAveraging,
) -> Result<f64> {
    match averaging {
        RewardAveraging::Mean => model.average_reward(&sub.vectors),
        RewardAveraging::DiscountedMean => model.discounted_average_reward(&sub.vectors),
    }
}

/// Score pre-encoded threads with a fitted model. `n_degenerate` carries
/// the count of threads already excluded during encoding.
pub fn accuracy(
    model: &RewardModel,
    threads: &[EncodedThread],
    n_degenerate: usize,
    averaging: RewardAveraging,
) -> Result<EvalReport> {
    let mut records = Vec::new();
    let mut n_ties = 0usize;
    for thread in threads {
        let [a, b] = &thread.players;
        if a.final_score == b.final_score {
            n_ties += 1;
            continue;
        }
        let (winner, loser) = if a.final_score > b.final_score { (a, b) } else { (b, a) };
        let wr = avg_reward(model, winner, averaging)?;
        let lr = avg_reward(model, loser, averaging)?;
        records.push(ThreadRecord {
            thread_id: thread.thread_id.clone(),
            winner: winner.player_id.clone(),
            winner_avg_reward: wr,
            loser_avg_reward: lr,
            correct: wr > lr,
        });
    }
    if records.is_empty() {
        return Err(Error::NoUsableThreads);
    }
    let correct = records.iter().filter(|r| r.correct).count();
    Ok(EvalReport {
        variant: model.schema.variant.to_string(),
        n_threads_used: records.len(),
        n_ties,
        n_degenerate,
        accuracy: correct as f64 / records.len() as f64,
        records,
    })
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub pipeline: PipelineOptions,
    pub lambda: f64,
    pub mode: EvalMode,
    pub averaging: RewardAveraging,
    pub folds: usize,
}

impl EvalOptions {
    pub fn new(pipeline: PipelineOptions, lambda: f64) -> Self {
        Self {
            pipeline,
            lambda,
            mode: EvalMode::default(),
            averaging: RewardAveraging::default(),
            folds: 5,
        }
    }
}

fn evaluate_dataset(dataset: &Dataset, opts: &EvalOptions) -> Result<EvalReport> {
    let schema = &opts.pipeline.schema;
    match opts.mode {
        EvalMode::InSample => {
            let model = fit(schema, &dataset.pairs(), opts.lambda)?;
            accuracy(&model, &dataset.threads, dataset.n_degenerate, opts.averaging)
        }
        EvalMode::CrossValidation => {
            // Deterministic fold assignment by position in (game, thread)
            // order. Report accuracy pooled over held-out folds so that
            // accuracy = correct / n_threads_used holds exactly.
            let k = opts.folds.min(dataset.threads.len()).max(2);
            let mut all_records = Vec::new();
            let mut n_ties = 0usize;
            let mut variant = String::new();
            for fold in 0..k {
                let train: Vec<EncodedThread> = dataset
                    .threads
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % k != fold)
                    .map(|(_, t)| t.clone())
                    .collect();
                let test: Vec<EncodedThread> = dataset
                    .threads
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % k == fold)
                    .map(|(_, t)| t.clone())
                    .collect();
                if test.is_empty() {
                    continue;
                }
                let train_ds = Dataset { threads: train, n_degenerate: 0 };
                let model = fit(schema, &train_ds.pairs(), opts.lambda)?;
                match accuracy(&model, &test, 0, opts.averaging) {
                    Ok(report) => {
                        n_ties += report.n_ties;
                        variant = report.variant;
                        all_records.extend(report.records);
                    }
                    Err(Error::NoUsableThreads) => n_ties += test.len(),
                    Err(e) => return Err(e),
                }
            }
            if all_records.is_empty() {
                return Err(Error::NoUsableThreads);
            }
            let correct = all_records.iter().filter(|r| r.correct).count();
            Ok(EvalReport {
                variant,
                n_threads_used: all_records.len(),
                n_ties,
                n_degenerate: dataset.n_degenerate,
                accuracy: correct as f64 / all_records.len() as f64,
                records: all_records,
            })
        }
    }
}

/// Encode, fit, and score a corpus under the given options.
pub fn evaluate(corpus: &Corpus, opts: &EvalOptions) -> Result<EvalReport> {
    let dataset = build_dataset(corpus, &opts.pipeline, None)?;
    evaluate_dataset(&dataset, opts)
}

/// For each n, truncate every subthread to its first n utterances, refit,
/// and re-evaluate. Returns one (n, accuracy) row per n.
pub fn ablation(corpus: &Corpus, opts: &EvalOptions, ns: &[usize]) -> Result<Vec<(usize, f64)>> {
    let mut curve = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 {
            return Err(Error::Validation("ablation n values must be positive".into()));
        }
        let dataset = build_dataset(corpus, &opts.pipeline, Some(n))?;
        let report = evaluate_dataset(&dataset, opts)?;
        curve.push((n, report.accuracy));
    }
    Ok(curve)
}

/// Summary CSV body: one row per report.
pub fn summary_csv(reports: &[&EvalReport]) -> String {
    let mut out = String::from("variant,n_threads_used,n_ties,n_degenerate,accuracy\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.variant, r.n_threads_used, r.n_ties, r.n_degenerate, r.accuracy
        ));
    }
    out
}

/// Per-thread detail CSV body.
pub fn detail_csv(report: &EvalReport) -> String {
    let mut out = String::from("thread_id,winner,winner_avg_reward,loser_avg_reward,correct\n");
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.thread_id, r.winner, r.winner_avg_reward, r.loser_avg_reward, r.correct
        ));
    }
    out
}

/// Ablation curve CSV body: columns n, variant, accuracy.
pub fn ablation_csv(curves: &[(String, Vec<(usize, f64)>)]) -> String {
    let mut out = String::from("n,variant,accuracy\n");
    for (variant, curve) in curves {
        for (n, acc) in curve {
            out.push_str(&format!("{n},{variant},{acc}\n"));
        }
    }
    out
}
