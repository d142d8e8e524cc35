//! Python bindings over the core pipeline: corpus I/O, synthetic data,
//! weak labeling, reward fitting, and winner-prediction evaluation.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sbirl_core::corpus;
use sbirl_core::encoding::{FeatureSchema, Variant};
use sbirl_core::eval::{self, EvalMode, EvalOptions};
use sbirl_core::labeler::{ClassifierKind, Hyperparams, StrategyClassifiers, VoteTarget};
use sbirl_core::pipeline::{build_dataset, PipelineOptions};
use sbirl_core::sbirl as reward;
use sbirl_core::synth::{self, ScoreMode, SynthConfig};

fn err(e: sbirl_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_variant(tag: &str) -> PyResult<Variant> {
    match tag {
        "context" | "context-agnostic" => Ok(Variant::ContextAgnostic),
        "graph" | "graph-aware" => Ok(Variant::GraphAware),
        other => Err(PyValueError::new_err(format!(
            "variant must be context|graph, got {other:?}"
        ))),
    }
}

/// A parsed two-party game-chat corpus.
#[pyclass(name = "Corpus", skip_from_py_object)]
#[derive(Clone)]
struct PyCorpus {
    inner: corpus::Corpus,
}

#[pymethods]
impl PyCorpus {
    /// Parse a corpus from JSONL text (comment lines starting with # are
    /// skipped).
    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        let inner = corpus::parse_corpus(text.as_bytes()).map_err(err)?;
        Ok(Self { inner })
    }

    fn to_jsonl(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        corpus::serialize_corpus(&self.inner, &mut buf).map_err(err)?;
        Ok(String::from_utf8(buf).expect("jsonl is utf8"))
    }

    fn n_games(&self) -> usize {
        self.inner.games.len()
    }

    fn n_threads(&self) -> usize {
        self.inner.n_threads()
    }

    fn n_messages(&self) -> usize {
        self.inner.messages().count()
    }

    /// Schema violations as (thread_id, description) pairs; empty = clean.
    fn validate(&self) -> Vec<(String, String)> {
        corpus::validate_corpus(&self.inner)
            .into_iter()
            .map(|v| (v.thread_id, v.detail))
            .collect()
    }

    /// Train strategy classifiers on the gold subset and fill predicted
    /// labels plus a voted action on every message, in place.
    #[pyo3(signature = (classifier="logreg", threshold=0.5))]
    fn label(&mut self, classifier: &str, threshold: f64) -> PyResult<()> {
        let kind = match classifier {
            "logreg" => ClassifierKind::LogisticRegression,
            "gnb" => ClassifierKind::GaussianNb,
            "adaboost" => ClassifierKind::AdaBoost,
            other => {
                return Err(PyValueError::new_err(format!(
                    "classifier must be logreg|gnb|adaboost, got {other:?}"
                )))
            }
        };
        let params = Hyperparams { threshold, ..Hyperparams::default() };
        let clf = StrategyClassifiers::train(&self.inner, kind, &params).map_err(err)?;
        clf.label_corpus(&mut self.inner, VoteTarget::default());
        Ok(())
    }
}

/// A fitted linear reward model.
#[pyclass(name = "RewardModel")]
struct PyRewardModel {
    inner: reward::RewardModel,
}

#[pymethods]
impl PyRewardModel {
    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta.clone()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.schema.names.clone()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.schema.gamma
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: reward::parse_model(text).map_err(err)? })
    }
}

/// Generate a synthetic corpus; returns (Corpus, ledger_jsonl).
#[pyfunction]
#[pyo3(signature = (seed=0, mode="behavioral", n_players=6, n_games=4, threads_per_game=8, gamma=0.9, noise_sigma=0.0, labeled_fraction=1.0))]
#[allow(clippy::too_many_arguments)]
fn generate_synth(
    seed: u64,
    mode: &str,
    n_players: usize,
    n_games: usize,
    threads_per_game: usize,
    gamma: f64,
    noise_sigma: f64,
    labeled_fraction: f64,
) -> PyResult<(PyCorpus, String)> {
    let mode = match mode {
        "planted" => ScoreMode::PlantedRegression,
        "behavioral" => ScoreMode::Behavioral,
        other => {
            return Err(PyValueError::new_err(format!(
                "mode must be planted|behavioral, got {other:?}"
            )))
        }
    };
    let config = SynthConfig {
        seed,
        mode,
        n_players,
        n_games,
        threads_per_game,
        gamma,
        noise_sigma,
        labeled_fraction,
        ..SynthConfig::default()
    };
    let (corpus, ledger) = synth::generate(&config).map_err(err)?;
    Ok((PyCorpus { inner: corpus }, ledger.to_jsonl()))
}

/// Fit a reward model on all usable subthreads of the corpus.
#[pyfunction]
#[pyo3(signature = (corpus, variant="graph", gamma=0.9, lambda_=0.0))]
fn fit_reward(corpus: &PyCorpus, variant: &str, gamma: f64, lambda_: f64) -> PyResult<PyRewardModel> {
    let schema = FeatureSchema::new(parse_variant(variant)?, gamma).map_err(err)?;
    let opts = PipelineOptions::new(schema.clone());
    let dataset = build_dataset(&corpus.inner, &opts, None).map_err(err)?;
    let model = reward::fit(&schema, &dataset.pairs(), lambda_).map_err(err)?;
    Ok(PyRewardModel { inner: model })
}

/// Winner-prediction accuracy; returns a dict with accuracy and counts.
#[pyfunction]
#[pyo3(signature = (corpus, variant="graph", gamma=0.9, lambda_=0.0, eval_mode="cv"))]
fn evaluate<'py>(
    py: Python<'py>,
    corpus: &PyCorpus,
    variant: &str,
    gamma: f64,
    lambda_: f64,
    eval_mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let schema = FeatureSchema::new(parse_variant(variant)?, gamma).map_err(err)?;
    let mut opts = EvalOptions::new(PipelineOptions::new(schema), lambda_);
    opts.mode = match eval_mode {
        "cv" => EvalMode::CrossValidation,
        "in-sample" => EvalMode::InSample,
        other => {
            return Err(PyValueError::new_err(format!(
                "eval_mode must be cv|in-sample, got {other:?}"
            )))
        }
    };
    let report = eval::evaluate(&corpus.inner, &opts).map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("variant", report.variant.to_string())?;
    dict.set_item("accuracy", report.accuracy)?;
    dict.set_item("n_threads_used", report.n_threads_used)?;
    dict.set_item("n_ties", report.n_ties)?;
    dict.set_item("n_degenerate", report.n_degenerate)?;
    Ok(dict)
}

/// First-n utterance ablation; returns [(n, accuracy), ...].
#[pyfunction]
#[pyo3(signature = (corpus, ns, variant="graph", gamma=0.9, lambda_=0.0))]
fn ablation(
    corpus: &PyCorpus,
    ns: Vec<usize>,
    variant: &str,
    gamma: f64,
    lambda_: f64,
) -> PyResult<Vec<(usize, f64)>> {
    let schema = FeatureSchema::new(parse_variant(variant)?, gamma).map_err(err)?;
    let opts = EvalOptions::new(PipelineOptions::new(schema), lambda_);
    eval::ablation(&corpus.inner, &opts, &ns).map_err(err)
}

#[pymodule]
fn sbirl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyRewardModel>()?;
    m.add_function(wrap_pyfunction!(generate_synth, m)?)?;
    m.add_function(wrap_pyfunction!(fit_reward, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(ablation, m)?)?;
    Ok(())
}
