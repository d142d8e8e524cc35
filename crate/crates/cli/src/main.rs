//! Batch driver: synth | label | train | eval | ablate.
//!
//! Exit codes: 0 success, 2 usage, 3 data validation, 4 numerical, 5 I/O.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbirl_core::corpus::{parse_corpus, serialize_corpus, Corpus};
use sbirl_core::encoding::{FeatureSchema, Variant};
use sbirl_core::eval::{
    ablation, ablation_csv, detail_csv, evaluate, summary_csv, EvalMode, EvalOptions, EvalReport,
};
use sbirl_core::labeler::{
    correlation_report, macro_f1, ClassifierKind, Hyperparams, StrategyClassifiers, VoteTarget,
};
use sbirl_core::pipeline::PipelineOptions;
use sbirl_core::sbirl::fit;
use sbirl_core::synth::{generate, ScoreMode, SynthConfig};
use sbirl_core::corpus::StrategyLabels;
use sbirl_core::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "sbirl", about = "Score-based IRL pipeline over two-party game chats")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus plus its generator ledger.
    Synth(CommonArgs),
    /// Train strategy classifiers on the gold subset and label every message.
    Label(CommonArgs),
    /// Fit a reward model and write it as a plain-text model file.
    Train(CommonArgs),
    /// Evaluate winner-prediction accuracy; both variants unless --variant.
    Eval(CommonArgs),
    /// First-n utterance ablation over the --ns list.
    Ablate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Plain-text key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input corpus JSONL.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Feature variant: context | graph.
    #[arg(long)]
    variant: Option<String>,
    /// Discount factor in [0, 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Ridge strength, >= 0.
    #[arg(long)]
    lambda: Option<f64>,
    /// cv | in-sample.
    #[arg(long)]
    eval_mode: Option<String>,
    /// Comma-separated first-n cutoffs, e.g. "1,2,4,6".
    #[arg(long)]
    ns: Option<String>,
    /// Seed for all randomness.
    #[arg(long)]
    seed: Option<u64>,
}

/// Effective run configuration after defaults < config file < flags.
struct RunConfig {
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    variant: Option<Variant>,
    gamma: f64,
    lambda: f64,
    eval_mode: EvalMode,
    ns: Vec<usize>,
    seed: u64,
    folds: usize,
    classifier: ClassifierKind,
    threshold: f64,
    // Generator knobs, config-file only.
    mode: ScoreMode,
    n_players: usize,
    n_games: usize,
    threads_per_game: usize,
    messages_min: usize,
    messages_max: usize,
    noise_sigma: f64,
    obs_sigma: f64,
    labeled_fraction: f64,
    typed_players: bool,
    vocab_overlap: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        Self {
            input: None,
            output: None,
            variant: None,
            gamma: 0.9,
            lambda: 0.0,
            eval_mode: EvalMode::CrossValidation,
            ns: Vec::new(),
            seed: 0,
            folds: 5,
            classifier: ClassifierKind::LogisticRegression,
            threshold: 0.5,
            mode: ScoreMode::Behavioral,
            n_players: synth.n_players,
            n_games: synth.n_games,
            threads_per_game: synth.threads_per_game,
            messages_min: synth.messages_per_thread.0,
            messages_max: synth.messages_per_thread.1,
            noise_sigma: synth.noise_sigma,
            obs_sigma: synth.obs_sigma,
            labeled_fraction: synth.labeled_fraction,
            typed_players: synth.typed_players,
            vocab_overlap: synth.vocab_overlap,
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("usage error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |e: &dyn std::fmt::Display| format!("{key}: {e}");
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "variant" => {
                self.variant = Some(match value {
                    "context" => Variant::ContextAgnostic,
                    "graph" => Variant::GraphAware,
                    other => return Err(format!("variant must be context|graph, got {other:?}")),
                })
            }
            "gamma" => self.gamma = value.parse().map_err(|e| bad(&e))?,
            "lambda" => self.lambda = value.parse().map_err(|e| bad(&e))?,
            "eval_mode" => {
                self.eval_mode = match value {
                    "cv" => EvalMode::CrossValidation,
                    "in-sample" => EvalMode::InSample,
                    other => return Err(format!("eval_mode must be cv|in-sample, got {other:?}")),
                }
            }
            "ns" => {
                self.ns = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| bad(&e))?;
                if self.ns.is_empty() || self.ns.contains(&0) {
                    return Err("ns must be a non-empty list of positive integers".into());
                }
            }
            "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
            "folds" => self.folds = value.parse().map_err(|e| bad(&e))?,
            "classifier" => {
                self.classifier = match value {
                    "logreg" => ClassifierKind::LogisticRegression,
                    "gnb" => ClassifierKind::GaussianNb,
                    "adaboost" => ClassifierKind::AdaBoost,
                    other => {
                        return Err(format!(
                            "classifier must be logreg|gnb|adaboost, got {other:?}"
                        ))
                    }
                }
            }
            "threshold" => self.threshold = value.parse().map_err(|e| bad(&e))?,
            "mode" => {
                self.mode = match value {
                    "planted" => ScoreMode::PlantedRegression,
                    "behavioral" => ScoreMode::Behavioral,
                    other => return Err(format!("mode must be planted|behavioral, got {other:?}")),
                }
            }
            "n_players" => self.n_players = value.parse().map_err(|e| bad(&e))?,
            "n_games" => self.n_games = value.parse().map_err(|e| bad(&e))?,
            "threads_per_game" => self.threads_per_game = value.parse().map_err(|e| bad(&e))?,
            "messages_min" => self.messages_min = value.parse().map_err(|e| bad(&e))?,
            "messages_max" => self.messages_max = value.parse().map_err(|e| bad(&e))?,
            "noise_sigma" => self.noise_sigma = value.parse().map_err(|e| bad(&e))?,
            "obs_sigma" => self.obs_sigma = value.parse().map_err(|e| bad(&e))?,
            "labeled_fraction" => self.labeled_fraction = value.parse().map_err(|e| bad(&e))?,
            "typed_players" => self.typed_players = value.parse().map_err(|e| bad(&e))?,
            "vocab_overlap" => self.vocab_overlap = value.parse().map_err(|e| bad(&e))?,
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    fn load(args: &CommonArgs) -> Result<Self, String> {
        let mut cfg = Self::default();
        if let Some(path) = &args.config {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("config {}: {e}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| format!("config line {}: expected key=value", lineno + 1))?;
                cfg.set(key.trim(), value.trim())?;
            }
        }
        if let Some(v) = &args.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &args.output {
            cfg.output = Some(v.clone());
        }
        if let Some(v) = &args.variant {
            cfg.set("variant", v)?;
        }
        if let Some(v) = args.gamma {
            cfg.set("gamma", &v.to_string())?;
        }
        if let Some(v) = args.lambda {
            cfg.set("lambda", &v.to_string())?;
        }
        if let Some(v) = &args.eval_mode {
            cfg.set("eval_mode", v)?;
        }
        if let Some(v) = &args.ns {
            cfg.set("ns", v)?;
        }
        if let Some(v) = args.seed {
            cfg.set("seed", &v.to_string())?;
        }
        if !(0.0..1.0).contains(&cfg.gamma) {
            return Err(format!("gamma must be in [0, 1), got {}", cfg.gamma));
        }
        if cfg.lambda < 0.0 || !cfg.lambda.is_finite() {
            return Err(format!("lambda must be finite and >= 0, got {}", cfg.lambda));
        }
        if cfg.folds < 2 {
            return Err("folds must be >= 2".into());
        }
        if let (Some(i), Some(o)) = (&cfg.input, &cfg.output) {
            if i == o {
                return Err("input and output paths must be distinct".into());
            }
        }
        Ok(cfg)
    }

    /// One-line provenance header embedded in every output file.
    fn echo(&self, subcommand: &str) -> String {
        let mut s = format!("# sbirl {subcommand}");
        let _ = write!(
            s,
            " seed={} gamma={} lambda={} variant={} eval_mode={} folds={}",
            self.seed,
            self.gamma,
            self.lambda,
            match self.variant {
                None => "both".into(),
                Some(v) => v.to_string(),
            },
            match self.eval_mode {
                EvalMode::CrossValidation => "cv",
                EvalMode::InSample => "in-sample",
            },
            self.folds,
        );
        if !self.ns.is_empty() {
            let list: Vec<String> = self.ns.iter().map(|n| n.to_string()).collect();
            let _ = write!(s, " ns={}", list.join(","));
        }
        if subcommand == "synth" {
            let _ = write!(
                s,
                " mode={} n_players={} n_games={} threads_per_game={} messages={}..{} \
                 noise_sigma={} obs_sigma={} labeled_fraction={} typed_players={} vocab_overlap={}",
                match self.mode {
                    ScoreMode::PlantedRegression => "planted",
                    ScoreMode::Behavioral => "behavioral",
                },
                self.n_players,
                self.n_games,
                self.threads_per_game,
                self.messages_min,
                self.messages_max,
                self.noise_sigma,
                self.obs_sigma,
                self.labeled_fraction,
                self.typed_players,
                self.vocab_overlap,
            );
        }
        if subcommand == "label" {
            let _ = write!(
                s,
                " classifier={} threshold={}",
                match self.classifier {
                    ClassifierKind::LogisticRegression => "logreg",
                    ClassifierKind::GaussianNb => "gnb",
                    ClassifierKind::AdaBoost => "adaboost",
                },
                self.threshold,
            );
        }
        s.push('\n');
        s
    }

    fn variants(&self) -> Vec<Variant> {
        match self.variant {
            Some(v) => vec![v],
            None => vec![Variant::ContextAgnostic, Variant::GraphAware],
        }
    }

    fn eval_options(&self, variant: Variant) -> Result<EvalOptions, Error> {
        let schema = FeatureSchema::new(variant, self.gamma)?;
        let mut opts = EvalOptions::new(PipelineOptions::new(schema), self.lambda);
        opts.mode = self.eval_mode;
        opts.folds = self.folds;
        Ok(opts)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.cmd {
        Cmd::Synth(a) => ("synth", a),
        Cmd::Label(a) => ("label", a),
        Cmd::Train(a) => ("train", a),
        Cmd::Eval(a) => ("eval", a),
        Cmd::Ablate(a) => ("ablate", a),
    };
    let cfg = match RunConfig::load(args) {
        Ok(cfg) => cfg,
        Err(msg) => return usage(msg),
    };
    if cfg.output.is_none() {
        return usage("--output is required");
    }
    if name != "synth" && cfg.input.is_none() {
        return usage("--input is required");
    }
    if name == "ablate" && cfg.ns.is_empty() {
        return usage("--ns is required for ablate");
    }
    let result = match name {
        "synth" => cmd_synth(&cfg),
        "label" => cmd_label(&cfg),
        "train" => cmd_train(&cfg),
        "eval" => cmd_eval(&cfg),
        "ablate" => cmd_ablate(&cfg),
        _ => unreachable!(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) => EXIT_IO,
                Error::Solver { .. } | Error::NonFinite(_) | Error::ZeroVariance(_) => {
                    EXIT_NUMERICAL
                }
                _ => EXIT_DATA,
            })
        }
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, Error> {
    let dir = cfg.output.as_deref().expect("checked in main");
    fs::create_dir_all(dir)?;
    Ok(dir)
}

fn read_input(cfg: &RunConfig) -> Result<Corpus, Error> {
    let path = cfg.input.as_deref().expect("checked in main");
    let file = fs::File::open(path)?;
    parse_corpus(BufReader::new(file))
}

fn write_file(dir: &Path, name: &str, header: &str, body: &str) -> Result<(), Error> {
    let mut content = String::with_capacity(header.len() + body.len());
    content.push_str(header);
    content.push_str(body);
    fs::write(dir.join(name), content)?;
    Ok(())
}

fn cmd_synth(cfg: &RunConfig) -> Result<(), Error> {
    let synth_cfg = SynthConfig {
        seed: cfg.seed,
        n_players: cfg.n_players,
        n_games: cfg.n_games,
        threads_per_game: cfg.threads_per_game,
        messages_per_thread: (cfg.messages_min, cfg.messages_max),
        mode: cfg.mode,
        theta_star: None,
        noise_sigma: cfg.noise_sigma,
        gamma: cfg.gamma,
        labeled_fraction: cfg.labeled_fraction,
        typed_players: cfg.typed_players,
        vocab_overlap: cfg.vocab_overlap,
        ..SynthConfig::default()
    };
    let (corpus, ledger) = generate(&SynthConfig { obs_sigma: cfg.obs_sigma, ..synth_cfg })?;
    let dir = out_dir(cfg)?;
    let mut body = Vec::new();
    serialize_corpus(&corpus, &mut body)?;
    let header = cfg.echo("synth");
    write_file(dir, "corpus.jsonl", &header, std::str::from_utf8(&body).expect("jsonl is utf8"))?;
    write_file(dir, "ledger.jsonl", &header, &ledger.to_jsonl())?;
    Ok(())
}

fn cmd_label(cfg: &RunConfig) -> Result<(), Error> {
    let mut corpus = read_input(cfg)?;
    let params = Hyperparams { threshold: cfg.threshold, ..Hyperparams::default() };
    let clf = StrategyClassifiers::train(&corpus, cfg.classifier, &params)?;
    clf.label_corpus(&mut corpus, VoteTarget::default());

    // Macro-F1 of predictions against the gold subset, per strategy.
    let mut f1_rows = String::new();
    for (k, strategy) in StrategyLabels::STRATEGY_NAMES.iter().enumerate() {
        let mut predicted = Vec::new();
        let mut gold = Vec::new();
        for msg in corpus.messages() {
            let (Some(g), Some(p)) = (msg.labels, msg.predicted) else { continue };
            gold.push(g.flags(cfg.threshold)[k]);
            predicted.push(p.flags(cfg.threshold)[k]);
        }
        let f1 = macro_f1(&predicted, &gold)?;
        let _ = writeln!(f1_rows, "{strategy},{f1}");
    }

    let report = correlation_report(&corpus, cfg.threshold)?;
    let mut corr = String::from("strategy");
    for name in StrategyLabels::STRATEGY_NAMES {
        let _ = write!(corr, ",{name}");
    }
    corr.push('\n');
    for (i, name) in StrategyLabels::STRATEGY_NAMES.iter().enumerate() {
        let _ = write!(corr, "{name}");
        for j in 0..4 {
            let _ = write!(corr, ",{}", report[i][j]);
        }
        corr.push('\n');
    }

    let dir = out_dir(cfg)?;
    let header = cfg.echo("label");
    let mut body = Vec::new();
    serialize_corpus(&corpus, &mut body)?;
    write_file(dir, "labeled.jsonl", &header, std::str::from_utf8(&body).expect("jsonl is utf8"))?;
    write_file(dir, "f1.csv", &header, &format!("strategy,macro_f1\n{f1_rows}"))?;
    write_file(dir, "correlations.csv", &header, &corr)?;
    Ok(())
}

fn cmd_train(cfg: &RunConfig) -> Result<(), Error> {
    let corpus = read_input(cfg)?;
    let variant = cfg.variant.unwrap_or(Variant::GraphAware);
    let schema = FeatureSchema::new(variant, cfg.gamma)?;
    let opts = PipelineOptions::new(schema.clone());
    let dataset = sbirl_core::pipeline::build_dataset(&corpus, &opts, None)?;
    let pairs = dataset.pairs();
    let model = fit(&schema, &pairs, cfg.lambda)?;
    let dir = out_dir(cfg)?;
    write_file(dir, "model.txt", &cfg.echo("train"), &model.to_text())?;
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<(), Error> {
    let corpus = read_input(cfg)?;
    let dir = out_dir(cfg)?;
    let header = cfg.echo("eval");
    let mut reports: Vec<EvalReport> = Vec::new();
    for variant in cfg.variants() {
        let report = evaluate(&corpus, &cfg.eval_options(variant)?)?;
        let tag = match variant {
            Variant::ContextAgnostic => "context",
            Variant::GraphAware => "graph",
        };
        write_file(dir, &format!("detail_{tag}.csv"), &header, &detail_csv(&report))?;
        reports.push(report);
    }
    let refs: Vec<&EvalReport> = reports.iter().collect();
    write_file(dir, "summary.csv", &header, &summary_csv(&refs))?;
    Ok(())
}

fn cmd_ablate(cfg: &RunConfig) -> Result<(), Error> {
    let corpus = read_input(cfg)?;
    let mut curves = Vec::new();
    for variant in cfg.variants() {
        let curve = ablation(&corpus, &cfg.eval_options(variant)?, &cfg.ns)?;
        curves.push((variant.to_string(), curve));
    }
    let dir = out_dir(cfg)?;
    write_file(dir, "ablation.csv", &cfg.echo("ablate"), &ablation_csv(&curves))?;
    Ok(())
}
