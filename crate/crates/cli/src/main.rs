use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tabvec::embed::{BackendKind, Embedder};
use tabvec::join::{
    apply_threshold, encode_keys, evaluate_join, load_gold, nearest_neighbors, sweep_nearest, JoinEncoder, JoinSpec,
    DEFAULT_THRESHOLDS,
};
use tabvec::persist::Persist;
use tabvec::pipeline::{
    column_gains, cross_validate, prepare_dataset, run_bench, AnalyticsMethod, BenchConfig, PipelineConfig, TextPolicy,
    Vectorizer,
};
use tabvec::profile::profile_column;
use tabvec::table::{infer_kind, load_csv, Table};

#[derive(Parser)]
#[command(name = "tabvec", version, about = "Vectorize string columns, evaluate learners and fuzzy joins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Character n-gram diversity of every string column.
    Profile(ProfileArgs),
    /// Encode a table into a numeric feature matrix.
    Vectorize(VectorizeArgs),
    /// Cross-validated ROC-AUC of one method on one table.
    Analyze(AnalyzeArgs),
    /// Nearest-neighbor fuzzy join of two tables.
    Join(JoinArgs),
    /// Run a benchmark described by a JSON config.
    Bench(BenchArgs),
}

/// Pipeline settings shared by the table commands. Flags override the
/// values read from `--config`.
#[derive(Args)]
struct PipelineArgs {
    /// Pipeline config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    /// Embedding model identifier.
    #[arg(long)]
    model: Option<String>,
    /// Base URL of the HTTP embeddings service.
    #[arg(long)]
    endpoint: Option<String>,
    /// JSON-lines vector file for the file backend.
    #[arg(long)]
    embeddings_file: Option<PathBuf>,
    /// Embedding cache journal.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Mock backend dimension, or expected dimension of the others.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s {
        "mock" => Ok(BackendKind::Mock),
        "file" => Ok(BackendKind::File),
        "http" => Ok(BackendKind::Http),
        _ => Err(format!("unknown backend {s:?} (mock, file, http)")),
    }
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s.as_bytes() {
        [b] if b.is_ascii() => Ok(*b),
        _ if s == "\\t" => Ok(b'\t'),
        _ => Err("delimiter must be a single ASCII character".into()),
    }
}

impl PipelineArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        let b = &mut c.backend;
        if let Some(k) = self.backend {
            b.kind = k;
            if self.model.is_none() && k == BackendKind::File {
                b.model_id = "file".into();
            }
        }
        if let Some(m) = &self.model {
            b.model_id = m.clone();
        }
        if let Some(e) = &self.endpoint {
            b.endpoint = Some(e.clone());
        }
        if let Some(p) = &self.embeddings_file {
            b.path = Some(p.clone());
            if self.backend.is_none() {
                b.kind = BackendKind::File;
            }
        }
        if let Some(p) = &self.cache {
            b.cache_path = Some(p.clone());
        }
        if let Some(d) = self.dim {
            b.dim = Some(d);
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct VectorizeArgs {
    /// Table the encoders are fitted on.
    #[arg(long)]
    input: PathBuf,
    /// Table to encode with the fitted state (defaults to the input).
    #[arg(long)]
    apply: Option<PathBuf>,
    /// Columns to leave out, such as the target.
    #[arg(long, value_delimiter = ',')]
    drop: Vec<String>,
    #[arg(long, default_value = "auto")]
    encoder: TextPolicy,
    /// Matrix CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the fitted state as JSON.
    #[arg(long)]
    state_out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    target: String,
    /// auto, minhash, tfidf, embedding, voting or stacking.
    #[arg(long, default_value = "auto")]
    encoder: AnalyticsMethod,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Column whose groups never straddle folds.
    #[arg(long)]
    group: Option<String>,
    #[arg(long, value_delimiter = ',')]
    drop: Vec<String>,
    /// Report the gain of re-encoding each string column with embeddings.
    #[arg(long)]
    per_column: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct JoinArgs {
    /// Reference table.
    #[arg(long)]
    left: PathBuf,
    /// Table whose rows are matched.
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    left_key: String,
    #[arg(long)]
    right_key: String,
    #[arg(long, default_value = "tfidf")]
    encoder: JoinEncoder,
    /// Minimum cosine similarity.
    #[arg(long, conflicts_with = "sweep")]
    tau: Option<f64>,
    /// Sweep the thresholds and keep the best F1 (needs --gold).
    #[arg(long, requires = "gold")]
    sweep: bool,
    /// CSV of right_id,left_id row indices; empty left_id means no match.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// CSV of the threshold curve.
    #[arg(long, requires = "sweep")]
    plot_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// CSV with one row per report cell.
    #[arg(long)]
    plot_out: Option<PathBuf>,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn load(path: &Path, delimiter: u8) -> Result<Table> {
    load_csv(path, delimiter, true).with_context(|| format!("loading {}", path.display()))
}

fn drop_columns(mut table: Table, columns: &[String]) -> Result<Table> {
    for c in columns {
        table = table.drop_column(c)?;
    }
    Ok(table)
}

fn embedder(config: &PipelineConfig) -> Result<Embedder> {
    Embedder::from_config(&config.backend).context("building the embedding backend")
}

fn profile(args: ProfileArgs) -> Result<()> {
    let config = args.pipeline.load()?;
    let table = load(&args.input, args.pipeline.delimiter)?;
    let profiles: Vec<_> = table
        .columns()
        .filter(|(_, v)| infer_kind(v).is_string())
        .map(|(h, v)| profile_column(h, v, &config.profile_params(), config.seed))
        .collect();
    write_output(None, &to_json(&profiles)?)
}

fn vectorize(args: VectorizeArgs) -> Result<()> {
    let mut config = args.pipeline.load()?;
    config.text_encoder_policy = args.encoder;
    let train = drop_columns(load(&args.input, args.pipeline.delimiter)?, &args.drop)?;
    let apply = match &args.apply {
        Some(p) => drop_columns(load(p, args.pipeline.delimiter)?, &args.drop)?,
        None => train.clone(),
    };
    let needs_embedder = args.encoder != TextPolicy::ForceMinHash && args.encoder != TextPolicy::ForceTfidf;
    let emb = needs_embedder.then(|| embedder(&config)).transpose()?;
    let vectorizer = Vectorizer::fit(&train, &config, emb.as_ref())?;
    let matrix = vectorizer.transform(&apply, emb.as_ref())?;
    if let Some(p) = &args.state_out {
        std::fs::write(p, vectorizer.to_json()?).with_context(|| format!("writing {}", p.display()))?;
    }
    for plan in vectorizer.plan() {
        log::info!("{} ({:?}) -> {:?}, {} columns", plan.column, plan.kind, plan.encoding, plan.width);
    }
    match &args.out {
        Some(p) => matrix.write_csv(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))?,
        None => matrix.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let mut config = args.pipeline.load()?;
    if let Some(f) = args.folds {
        config.folds = f;
    }
    let train_size = args.train_size.unwrap_or(config.train_sizes[0]);
    config.train_sizes = vec![train_size];
    config.validate()?;
    let table = drop_columns(load(&args.input, args.pipeline.delimiter)?, &args.drop)?;
    let mut warnings = Vec::new();
    let dataset = prepare_dataset(&table, &args.target, args.group.as_deref(), train_size, config.seed, &mut warnings)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let needs_embedder = args.per_column || args.encoder.uses_embeddings();
    let emb = needs_embedder.then(|| embedder(&config)).transpose()?;
    if args.per_column {
        let gains = column_gains(&dataset, TextPolicy::ForceEmbedding, &config, emb.as_ref(), config.seed)?;
        for g in &gains {
            eprintln!("{}: {:.4} -> {:.4} ({:+.2}%)", g.column, g.baseline_auc, g.method_auc, g.gain_percent);
        }
        return write_output(args.out.as_deref(), &to_json(&gains)?);
    }
    let report = cross_validate(&dataset, args.encoder, &config, emb.as_ref(), config.seed)?;
    eprintln!(
        "{}: ROC-AUC {:.4} ± {:.4} over {} folds, {} rows",
        report.method,
        report.mean,
        report.stderr,
        report.fold_scores.len(),
        report.train_size
    );
    write_output(args.out.as_deref(), &to_json(&report)?)
}

fn join(args: JoinArgs) -> Result<()> {
    let config = args.pipeline.load()?;
    let left = load(&args.left, args.pipeline.delimiter)?;
    let right = load(&args.right, args.pipeline.delimiter)?;
    let tau = args.tau.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&tau) {
        bail!("--tau must lie in [0, 1]");
    }
    let spec = JoinSpec {
        tfidf: config.tfidf,
        minhash: config.minhash,
        ..JoinSpec::new(&args.left_key, &args.right_key, args.encoder, tau)
    };
    let emb = (args.encoder == JoinEncoder::Embedding).then(|| embedder(&config)).transpose()?;
    let keys = encode_keys(
        right.require_column(&args.right_key)?,
        left.require_column(&args.left_key)?,
        &spec,
        emb.as_ref(),
    )?;
    let nearest = nearest_neighbors(&keys);
    let gold = args
        .gold
        .as_ref()
        .map(|p| load_gold(p, right.n_rows(), left.n_rows()))
        .transpose()?;

    let mut doc = serde_json::Map::new();
    let chosen_tau = if args.sweep {
        let gold = gold.as_ref().expect("clap requires --gold with --sweep");
        let sweep = sweep_nearest(&nearest, &DEFAULT_THRESHOLDS, gold)?;
        if let Some(p) = &args.plot_out {
            sweep.write_curve_csv(File::create(p).with_context(|| format!("creating {}", p.display()))?)?;
        }
        eprintln!("best F1 {:.4} at tau {}", sweep.best_f1, sweep.best_tau);
        let best = sweep.best_tau;
        doc.insert("sweep".into(), serde_json::to_value(&sweep)?);
        best
    } else {
        tau
    };
    let result = apply_threshold(&nearest, chosen_tau);
    doc.insert("encoder".into(), serde_json::to_value(args.encoder)?);
    doc.insert("threshold".into(), chosen_tau.into());
    doc.insert("n_predicted".into(), result.n_predicted.into());
    if let Some(g) = &gold {
        let metrics = evaluate_join(&result, g)?;
        eprintln!(
            "precision {:.4} recall {:.4} F1 {:.4}",
            metrics.precision, metrics.recall, metrics.f1
        );
        doc.insert("metrics".into(), serde_json::to_value(metrics)?);
    }
    let matches: Vec<serde_json::Value> = result
        .matches
        .iter()
        .enumerate()
        .map(|(r, m)| serde_json::json!({"right": r, "left": m.left, "similarity": m.similarity}))
        .collect();
    doc.insert("matches".into(), matches.into());
    write_output(args.out.as_deref(), &to_json(&doc)?)
}

fn bench(args: BenchArgs) -> Result<()> {
    let config = BenchConfig::load(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let base_dir = args.config.parent().unwrap_or(Path::new("."));
    let outcome = run_bench(&config, base_dir)?;
    std::fs::write(&args.out, &outcome.json).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(p) = &args.plot_out {
        outcome
            .report
            .write_cells_csv(File::create(p).with_context(|| format!("creating {}", p.display()))?)?;
    }
    for r in outcome.report.mean_ranks.iter().filter(|r| r.train_size.is_none()) {
        eprintln!("{:<10} mean rank {:.3} over {} tasks", r.method, r.mean_rank, r.n_tasks);
    }
    if let Some(s) = outcome.stats {
        eprintln!(
            "embedding backend: {} calls, {} texts sent, {} cache hits",
            s.backend_calls, s.texts_sent, s.cache_hits
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Profile(a) => profile(a),
        Command::Vectorize(a) => vectorize(a),
        Command::Analyze(a) => analyze(a),
        Command::Join(a) => join(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
