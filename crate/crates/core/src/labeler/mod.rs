//! Weakly-supervised labeling of rhetorical strategies.
//!
//! Four binary classifiers (one per strategy: Friendship, Reasoning, Game
//! Move, Share Information) are trained on the gold-labeled subset of a
//! corpus and used to predict labels for the rest. A voting mechanism then
//! reduces the four flags to a single action per utterance: Friendship and
//! Reasoning are mutually exclusive, with Game Move and Share Information
//! breaking ties.

mod adaboost;
mod gnb;
mod logreg;

pub use adaboost::AdaBoost;
pub use gnb::GaussianNb;
pub use logreg::LogisticRegression;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Message, StrategyLabels};
use crate::error::{Error, Result};

/// The single action an utterance reduces to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Friendship,
    Reasoning,
    Neutral,
}

/// Which action Game Move / Share Information vote for when both
/// Friendship and Reasoning flags are set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VoteTarget {
    #[default]
    Reasoning,
    Friendship,
}

/// Reduce thresholded strategy flags to one action.
///
/// Friendship alone maps to Friendship, Reasoning alone to Reasoning.
/// When both are set, Game Move and Share Information cast the deciding
/// vote (they correlate with Reasoning and anti-correlate with Friendship,
/// so by default one or more of them flips the label to Reasoning).
/// Neither flag set means Neutral.
pub fn assign_action(labels: &StrategyLabels, threshold: f64, vote: VoteTarget) -> Action {
    let [f, r, gm, si] = labels.flags(threshold);
    match (f, r) {
        (true, false) => Action::Friendship,
        (false, true) => Action::Reasoning,
        (false, false) => Action::Neutral,
        (true, true) => {
            let votes = gm as u8 + si as u8;
            match (votes >= 1, vote) {
                (true, VoteTarget::Reasoning) | (false, VoteTarget::Friendship) => {
                    Action::Reasoning
                }
                (true, VoteTarget::Friendship) | (false, VoteTarget::Reasoning) => {
                    Action::Friendship
                }
            }
        }
    }
}

/// Token-to-index map built from a training split; frozen after build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> Vec<&str> {
        let mut out = vec![""; self.index.len()];
        for (tok, &i) in &self.index {
            out[i] = tok.as_str();
        }
        out
    }
}

/// Lowercase, split on non-alphanumerics. No stemming.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

/// Build a vocabulary from training texts. Tokens are indexed by
/// descending frequency, ties broken lexicographically, so the result is
/// deterministic.
pub fn build_vocabulary<'a, I>(texts: I, min_freq: usize, max_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut seen_any = false;
    for text in texts {
        seen_any = true;
        for tok in tokenize(text) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    if !seen_any {
        return Err(Error::EmptyInput("no texts for vocabulary".into()));
    }
    let mut ranked: Vec<(String, usize)> =
        counts.into_iter().filter(|&(_, c)| c >= min_freq).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size);
    let index = ranked.into_iter().enumerate().map(|(i, (tok, _))| (tok, i)).collect();
    Ok(Vocabulary { index })
}

/// Sparse token-count vector over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TextFeatures {
    /// (index, count) pairs, strictly increasing in index.
    pub counts: Vec<(usize, f64)>,
    pub dim: usize,
}

impl TextFeatures {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, c) in &self.counts {
            v[i] = c;
        }
        v
    }
}

/// Count in-vocabulary tokens; out-of-vocabulary tokens are dropped.
pub fn featurize(text: &str, vocab: &Vocabulary) -> TextFeatures {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for tok in tokenize(text) {
        if let Some(i) = vocab.index_of(&tok) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    TextFeatures { counts: counts.into_iter().collect(), dim: vocab.len() }
}

/// Classifier family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    LogisticRegression,
    GaussianNb,
    AdaBoost,
}

/// Training hyperparameters, fixed defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub lr_step: f64,
    pub lr_epochs: usize,
    pub lr_l2: f64,
    pub adaboost_rounds: usize,
    pub nb_var_floor: f64,
    pub threshold: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lr_step: 0.1,
            lr_epochs: 500,
            lr_l2: 1e-3,
            adaboost_rounds: 50,
            nb_var_floor: 1e-9,
            threshold: 0.5,
        }
    }
}

/// A trained binary strategy classifier.
#[derive(Debug, Clone)]
pub enum BinaryClassifier {
    LogisticRegression(LogisticRegression),
    GaussianNb(GaussianNb),
    AdaBoost(AdaBoost),
}

impl BinaryClassifier {
    /// Probability of the positive class, in [0,1].
    pub fn predict_proba(&self, features: &TextFeatures) -> f64 {
        match self {
            Self::LogisticRegression(m) => m.predict_proba(features),
            Self::GaussianNb(m) => m.predict_proba(features),
            Self::AdaBoost(m) => m.predict_proba(features),
        }
    }
}

/// Train one binary classifier. Deterministic given hyperparameters.
pub fn train_classifier(
    kind: ClassifierKind,
    examples: &[(TextFeatures, bool)],
    params: &Hyperparams,
) -> Result<BinaryClassifier> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("no training examples".into()));
    }
    let positives = examples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::SingleClass(format!(
            "{positives} positive of {} examples",
            examples.len()
        )));
    }
    for (x, _) in examples {
        if x.counts.iter().any(|&(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite("feature value".into()));
        }
    }
    Ok(match kind {
        ClassifierKind::LogisticRegression => {
            BinaryClassifier::LogisticRegression(LogisticRegression::train(examples, params))
        }
        ClassifierKind::GaussianNb => {
            BinaryClassifier::GaussianNb(GaussianNb::train(examples, params))
        }
        ClassifierKind::AdaBoost => BinaryClassifier::AdaBoost(AdaBoost::train(examples, params)),
    })
}

/// One classifier per strategy, sharing a vocabulary.
#[derive(Debug, Clone)]
pub struct StrategyClassifiers {
    pub vocab: Vocabulary,
    pub classifiers: [BinaryClassifier; 4],
    pub threshold: f64,
}

impl StrategyClassifiers {
    /// Train on the gold-labeled subset of a corpus.
    pub fn train(corpus: &Corpus, kind: ClassifierKind, params: &Hyperparams) -> Result<Self> {
        let gold: Vec<&Message> =
            corpus.messages().filter(|m| m.labels.is_some()).collect();
        if gold.is_empty() {
            return Err(Error::EmptyInput(
                "corpus has no gold-labeled messages to train on".into(),
            ));
        }
        let vocab =
            build_vocabulary(gold.iter().map(|m| m.text.as_str()), 1, usize::MAX)?;
        let features: Vec<TextFeatures> =
            gold.iter().map(|m| featurize(&m.text, &vocab)).collect();
        let mut classifiers = Vec::with_capacity(4);
        for k in 0..4 {
            let examples: Vec<(TextFeatures, bool)> = gold
                .iter()
                .zip(&features)
                .map(|(m, x)| (x.clone(), m.labels.unwrap().as_array()[k] >= 0.5))
                .collect();
            let clf = train_classifier(kind, &examples, params).map_err(|e| match e {
                Error::SingleClass(_) => {
                    Error::SingleClass(StrategyLabels::STRATEGY_NAMES[k].into())
                }
                other => other,
            })?;
            classifiers.push(clf);
        }
        let classifiers: [BinaryClassifier; 4] =
            classifiers.try_into().map_err(|_| Error::EmptyInput("unreachable".into())).unwrap();
        Ok(Self { vocab, classifiers, threshold: params.threshold })
    }

    /// Predict the four strategy probabilities for one message text.
    pub fn predict_strategies(&self, text: &str) -> StrategyLabels {
        let x = featurize(text, &self.vocab);
        let p: Vec<f64> = self.classifiers.iter().map(|c| c.predict_proba(&x)).collect();
        StrategyLabels::new(p[0], p[1], p[2], p[3])
    }

    /// Fill `predicted` and `action` on every message in place.
    pub fn label_corpus(&self, corpus: &mut Corpus, vote: VoteTarget) {
        for msg in corpus.messages_mut() {
            let predicted = self.predict_strategies(&msg.text);
            msg.predicted = Some(predicted);
            msg.action = Some(assign_action(&predicted, self.threshold, vote));
        }
    }
}

/// Unweighted mean of per-class F1 over the classes {0, 1}. A class absent
/// from both gold and predictions contributes F1 = 1.
pub fn macro_f1(predicted: &[bool], gold: &[bool]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(Error::DimensionMismatch { expected: gold.len(), got: predicted.len() });
    }
    let f1_for = |positive: bool| {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (&p, &g) in predicted.iter().zip(gold) {
            match (p == positive, g == positive) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        if 2 * tp + fp + fn_ == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    Ok((f1_for(true) + f1_for(false)) / 2.0)
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput("pearson needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance(if sxx == 0.0 { "x" } else { "y" }.into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Per-player rate of each strategy, over the player's sent messages.
/// Predicted labels take precedence over gold.
pub fn player_strategy_rates(corpus: &Corpus, threshold: f64) -> BTreeMap<String, [f64; 4]> {
    let mut sums: BTreeMap<String, ([f64; 4], usize)> = BTreeMap::new();
    for msg in corpus.messages() {
        let labels = msg.predicted.or(msg.labels);
        let Some(labels) = labels else { continue };
        let entry = sums.entry(msg.sender_id.clone()).or_insert(([0.0; 4], 0));
        for (k, &flag) in labels.flags(threshold).iter().enumerate() {
            entry.0[k] += flag as u8 as f64;
        }
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(p, (s, n))| (p, s.map(|v| v / n as f64)))
        .collect()
}

/// 4x4 matrix of pairwise Pearson correlations between per-player strategy
/// rates. Symmetric with unit diagonal. Order: F, R, GM, SI.
pub fn correlation_report(corpus: &Corpus, threshold: f64) -> Result<[[f64; 4]; 4]> {
    let rates = player_strategy_rates(corpus, threshold);
    if rates.len() < 2 {
        return Err(Error::EmptyInput("correlation needs at least two players".into()));
    }
    let columns: Vec<Vec<f64>> = (0..4)
        .map(|k| rates.values().map(|r| r[k]).collect())
        .collect();
    let mut matrix = [[1.0; 4]; 4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            let r = pearson(&columns[i], &columns[j]).map_err(|e| match e {
                Error::ZeroVariance(axis) => Error::ZeroVariance(format!(
                    "strategy {}",
                    StrategyLabels::STRATEGY_NAMES[if axis == "x" { i } else { j }]
                )),
                other => other,
            })?;
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    Ok(matrix)
}
