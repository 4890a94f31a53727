//! `prge` — knowledge-graph error-detection toolkit.
//!
//! Subcommands mirror the pipeline stages: `impute` corrupts a graph,
//! `score` assigns path-ranking confidence to every triple, `train` fits
//! translation embeddings (optionally confidence-weighted), `evaluate`
//! computes error-detection metrics, `classify` runs held-out triple
//! classification, `pipeline` orchestrates the full grid with caching, and
//! `compare` tabulates reports.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use prge_cli::compare::emit_comparison;
use prge_cli::config::{parse_methods, parse_ratios, ExperimentConfig, Method, Overrides};
use prge_cli::pipeline::{classification_outcome, detection_report, run_pipeline};
use prge_core::embed::{train, EmbeddingModel, ModelFormat, TrainingConfig};
use prge_core::eval::{model_energies, MetricsReport};
use prge_core::graph::{
    load_graph, load_graph_with_labels, load_split_files, save_graph, save_noise_labels, Split,
};
use prge_core::noise::{impute_noise, NoiseConfig, Protocol};
use prge_core::pathrank::{
    score_graph, score_graph_kfold, train_scorers, ConfidenceTable, PathRankParams,
};

#[derive(Parser)]
#[command(
    name = "prge",
    version,
    about = "Knowledge-graph error detection: noise imputation, path-ranking confidence, weighted translation embeddings, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add controlled noise to a triple file
    Impute(ImputeArgs),
    /// Score every triple's plausibility with the path-ranking classifier
    Score(ScoreArgs),
    /// Train translation embeddings, optionally weighted by confidence scores
    Train(TrainArgs),
    /// Rank triples by energy and compute fMR / fMRR / AUC against noise labels
    Evaluate(EvaluateArgs),
    /// Held-out triple classification with per-relation energy thresholds
    Classify(ClassifyArgs),
    /// Run the full impute -> score -> train -> evaluate grid with caching
    Pipeline(PipelineArgs),
    /// Aggregate report files into a comparison table
    Compare(CompareArgs),
}

#[derive(Args)]
struct ImputeArgs {
    /// Input triple file (TSV: subject, relation, object)
    #[arg(long = "in")]
    input: PathBuf,
    /// Fraction of the triple count added as noise, in (0, 1]
    #[arg(long)]
    ratio: f64,
    /// Corruption protocol
    #[arg(long, default_value = "random")]
    protocol: Protocol,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output triple file (originals plus noise)
    #[arg(long)]
    out: PathBuf,
    /// Noise-label sidecar (one 0/1 line per output triple)
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Maximum path length
    #[arg(long = "max-len", default_value_t = 2)]
    max_len: usize,
    /// Paths kept per relation
    #[arg(long = "features-per-relation", default_value_t = 50)]
    features_per_relation: usize,
    /// Corrupted pairs per positive pair during scorer training
    #[arg(long = "neg-ratio", default_value_t = 2)]
    neg_ratio: usize,
    /// Relations with fewer triples fall back to the 0.5 prior
    #[arg(long = "min-support", default_value_t = 5)]
    min_support: usize,
    /// Use path presence instead of walk counts
    #[arg(long, default_value_t = false)]
    binarize: bool,
    /// Cross-validate confidences with k folds instead of scoring in-sample
    #[arg(long, default_value_t = 0)]
    kfold: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output score file (triple-index TAB score)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Input triple file; trains on every triple unless --split is given
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Three triple files train,valid,test interned together
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<PathBuf>>,
    /// Split assignment for --in: lines `triple-index<TAB>{train|valid|test}`
    #[arg(long = "split-assignment")]
    split_assignment: Option<PathBuf>,
    /// Confidence score file, or "none" for unweighted training
    #[arg(long, default_value = "none")]
    scores: String,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long, default_value_t = 5.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 1024)]
    batch: usize,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Accepted for interface stability; this build always trains
    /// single-threaded and reproducibly
    #[arg(long, default_value_t = true)]
    deterministic: bool,
    #[arg(long)]
    out: PathBuf,
    /// Model file variant
    #[arg(long, value_parser = ["binary", "text"], default_value = "binary")]
    format: String,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Graph the model was trained on
    #[arg(long)]
    graph: PathBuf,
    /// Noise-label sidecar for that graph
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Report metadata
    #[arg(long, default_value = "dataset")]
    dataset: String,
    #[arg(long, default_value = "transe")]
    method: String,
    #[arg(long, default_value_t = 0.0)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Three triple files train,valid,test (same files training used)
    #[arg(long, value_delimiter = ',')]
    split: Vec<PathBuf>,
    /// Protocol for generating held-out negatives
    #[arg(long, default_value = "random")]
    protocol: Protocol,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Flat key=value experiment file; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated noise ratios, e.g. 0.1,0.2,0.4
    #[arg(long)]
    ratios: Option<String>,
    /// Comma-separated methods: transe, prge, pathrank-only
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Output directory (default: $PRGE_OUT_ROOT/<dataset-name>)
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    /// Report files (report.kv) to aggregate
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Output prefix; writes <out>.txt and <out>.tsv
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Impute(args) => cmd_impute(args)?,
        Command::Score(args) => cmd_score(args)?,
        Command::Train(args) => cmd_train(args)?,
        Command::Evaluate(args) => cmd_evaluate(args)?,
        Command::Classify(args) => cmd_classify(args)?,
        Command::Pipeline(args) => return cmd_pipeline(args),
        Command::Compare(args) => cmd_compare(args)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_impute(args: ImputeArgs) -> Result<()> {
    let (graph, report) = load_graph(&args.input)?;
    if report.duplicates_dropped > 0 {
        eprintln!(
            "warning: dropped {} duplicate triples",
            report.duplicates_dropped
        );
    }
    let noisy = impute_noise(
        &graph,
        &NoiseConfig::new(args.ratio, args.protocol, args.seed),
    )?;
    save_graph(&noisy, &args.out)?;
    save_noise_labels(&noisy, &args.labels)?;
    println!(
        "imputed {} noisy triples into {} originals -> {}",
        noisy.num_noisy(),
        graph.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let (graph, _) = load_graph(&args.input)?;
    let params = PathRankParams {
        max_len: args.max_len,
        features_per_relation: args.features_per_relation,
        negatives_per_positive: args.neg_ratio,
        min_support: args.min_support,
        binarize: args.binarize,
        seed: args.seed,
    };
    let table = match args.kfold {
        0 => score_graph(&train_scorers(&graph, &params), &graph),
        1 => bail!("--kfold must be 0 (in-sample) or >= 2"),
        k => score_graph_kfold(&graph, &params, k)?,
    };
    table.save(&args.out)?;
    println!("scored {} triples -> {}", table.len(), args.out.display());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let (graph, split) = match (&args.input, &args.split) {
        (Some(input), None) => {
            let (graph, _) = load_graph(input)?;
            let split = match &args.split_assignment {
                Some(path) => prge_core::graph::load_split_assignment(path, &graph)?,
                None => Split::all_train(graph.len()),
            };
            (graph, split)
        }
        (None, Some(files)) => {
            if files.len() != 3 {
                bail!("--split needs exactly three files: train,valid,test");
            }
            let (graph, split, _) = load_split_files(&files[0], &files[1], &files[2])?;
            (graph, split)
        }
        _ => bail!("pass exactly one of --in or --split"),
    };
    let confidences = match args.scores.as_str() {
        "none" => None,
        path => {
            let table = ConfidenceTable::load(path)?;
            table.check_len(graph.len())?;
            Some(table)
        }
    };
    let config = TrainingConfig {
        dim: args.dim,
        margin: args.margin,
        lambda: args.lambda,
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch,
        patience: args.patience,
        seed: args.seed,
        deterministic: args.deterministic,
        ..Default::default()
    };
    let model = train(&graph, &split, confidences.as_ref(), &config)?;
    let format = match args.format.as_str() {
        "text" => ModelFormat::Text,
        _ => ModelFormat::Binary,
    };
    model.save(&args.out, format)?;
    match model.best_validation() {
        Some(v) => println!(
            "trained {} epochs (best validation loss {v:.6}) -> {}",
            model.epochs_trained(),
            args.out.display()
        ),
        None => println!(
            "trained {} epochs -> {}",
            model.epochs_trained(),
            args.out.display()
        ),
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (graph, _) = load_graph_with_labels(&args.graph, &args.labels)?;
    let model = EmbeddingModel::load(&args.model)?;
    model.check_graph(&graph)?;
    let energies = model_energies(&model, &graph)?;

    let config = ExperimentConfig {
        dataset_name: args.dataset.clone(),
        seed: args.seed,
        ..Default::default()
    };
    let method = args.method.parse::<Method>().map_err(|e| anyhow!(e))?;
    let report = detection_report(&config, method, args.ratio, &graph, &energies)?;
    report.save(&args.out)?;
    print!("{}", report.table_string());
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    if args.split.len() != 3 {
        bail!("--split needs exactly three files: train,valid,test");
    }
    let (graph, split, _) = load_split_files(&args.split[0], &args.split[1], &args.split[2])?;
    let model = EmbeddingModel::load(&args.model)?;
    model.check_graph(&graph)?;
    let (outcome, val_accuracy) =
        classification_outcome(&model, &graph, &split, args.protocol, args.seed)?;
    let text = format!(
        "validation_accuracy\t{val_accuracy}\ntest_accuracy\t{}\ntest_roc_auc\t{}\nevaluated\t{}\nskipped\t{}\n",
        outcome.accuracy, outcome.roc_auc, outcome.evaluated, outcome.skipped
    );
    std::fs::write(&args.out, &text).with_context(|| format!("writing {}", args.out.display()))?;
    if outcome.skipped > 0 {
        eprintln!(
            "warning: skipped {} test triples with relations unknown to the model",
            outcome.skipped
        );
    }
    print!("{text}");
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<ExitCode> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        dataset: args.dataset,
        ratios: args.ratios.as_deref().map(parse_ratios).transpose()?,
        protocol: args.protocol,
        methods: args.methods.as_deref().map(parse_methods).transpose()?,
        out_dir: args.out_dir,
        seed: args.seed,
        epochs: args.epochs,
        dim: args.dim,
        lambda: args.lambda,
    };
    config.apply(&overrides);
    config.finalize()?;

    let outcome = run_pipeline(&config)?;
    println!(
        "pipeline finished: {} reports, {} stages run, {} cache hits",
        outcome.reports.len(),
        outcome.stages_run,
        outcome.cache_hits
    );
    println!("manifest: {}", outcome.manifest_path.display());
    if !outcome.reports.is_empty() {
        let comparison = emit_comparison(&outcome.reports)?;
        print!("{}", comparison.text);
    }
    if outcome.failed_cells.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for (cell, error) in &outcome.failed_cells {
            eprintln!("cell {cell} failed: {error}");
        }
        Ok(ExitCode::from(2))
    }
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let reports: Vec<MetricsReport> = args
        .reports
        .iter()
        .map(|p| MetricsReport::load(p).map_err(Into::into))
        .collect::<Result<_>>()?;
    let comparison = emit_comparison(&reports)?;
    if let Some(out) = &args.out {
        std::fs::write(out.with_extension("txt"), &comparison.text)?;
        std::fs::write(out.with_extension("tsv"), &comparison.tsv)?;
    }
    print!("{}", comparison.text);
    Ok(())
}
