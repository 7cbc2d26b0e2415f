use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use softner::pipeline::{
    bootstrap_incidents, clean, evaluate, extract_response, propagate_incidents, run_triage, split_point, write_clean,
    SynthOptions, TriageOptions,
};
use softner::server::{self, ServerConfig};
use softner::PipelineRunManifest;
use softner_core::bootstrap::{BootstrapConfig, EntityCatalog};
use softner_core::corpus::{load_corpus, write_jsonl};
use softner_core::eval::precision_at_rank;
use softner_core::propagation::LabeledCorpus;
use softner_core::synth::{generate, write_synth, GoldRecord};
use softner_nn::model::read_embedding_file;
use softner_nn::{load_model, save_model, train_model, MultiTaskModel, OptimizerKind, TrainingConfig};
use softner_triage::results_csv;

#[derive(Parser)]
#[command(name = "softner", version, about = "Unsupervised entity extraction from incident reports")]
struct Cli {
    /// Record config, inputs, outputs, timings and artifact hashes here
    /// (merged into an existing manifest).
    #[arg(long, global = true, env = "SOFTNER_MANIFEST")]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic incident corpus with gold labels.
    Synth(SynthArgs),
    /// Strip HTML and segment descriptions into sentences and tables.
    Clean(InOut),
    /// Mine the entity-type catalog from key-value and table patterns.
    Bootstrap(BootstrapArgs),
    /// Label the corpus from pattern seeds and propagate values corpus-wide.
    Propagate(PropagateArgs),
    /// Train the multi-task tagger on a labeled corpus.
    Train(TrainArgs),
    /// Score a model against gold labels; optionally the catalog's precision by rank.
    Eval(EvalArgs),
    /// Extract entities from text or from every incident of a corpus.
    Extract(ExtractArgs),
    /// Cross-validate team triage on extracted-entity features.
    Triage(TriageArgs),
    /// Serve POST /extract and GET /health.
    Serve(ServeArgs),
}

#[derive(Args)]
struct InOut {
    #[arg(long = "in", env = "SOFTNER_IN")]
    input: PathBuf,
    #[arg(long, env = "SOFTNER_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus JSONL (the training part when --test-fraction > 0).
    #[arg(long, env = "SOFTNER_OUT")]
    out: PathBuf,
    #[arg(long, env = "SOFTNER_GOLD_OUT")]
    gold_out: PathBuf,
    #[arg(long, env = "SOFTNER_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, env = "SOFTNER_INCIDENTS", default_value_t = 1500)]
    incidents: usize,
    #[arg(long, env = "SOFTNER_TEAMS", default_value_t = 10)]
    teams: usize,
    /// Fraction of entity mentions written as plain prose.
    #[arg(long, env = "SOFTNER_INLINE_RATE", default_value_t = 0.3)]
    inline_rate: f64,
    /// Rate of spurious "word: text" lines.
    #[arg(long, env = "SOFTNER_NOISE_RATE", default_value_t = 0.1)]
    noise_rate: f64,
    /// Use this many generated entity types instead of the default schema.
    #[arg(long, env = "SOFTNER_PLANTED_TYPES", default_value_t = 0)]
    planted_types: usize,
    /// Leave a default-schema type out (repeatable).
    #[arg(long = "drop-type")]
    drop_types: Vec<String>,
    /// Hold out this trailing fraction of incidents.
    #[arg(long, env = "SOFTNER_TEST_FRACTION", default_value_t = 0.0)]
    test_fraction: f64,
    #[arg(long, env = "SOFTNER_TEST_OUT", requires = "test_gold_out")]
    test_out: Option<PathBuf>,
    #[arg(long, env = "SOFTNER_TEST_GOLD_OUT", requires = "test_out")]
    test_gold_out: Option<PathBuf>,
}

#[derive(Args)]
struct PatternArgs {
    /// Number of most frequent n-grams kept as entity types.
    #[arg(long, env = "SOFTNER_TOP_K", default_value_t = 100)]
    top_k: usize,
    #[arg(long, env = "SOFTNER_MIN_SUPPORT", default_value_t = 2)]
    min_support: usize,
    #[arg(long, env = "SOFTNER_MAX_NAME_TOKENS", default_value_t = 6)]
    max_name_tokens: usize,
    /// Let n-grams that never occur as a complete name enter the catalog.
    #[arg(long, env = "SOFTNER_ALLOW_UNATTESTED")]
    allow_unattested: bool,
}

impl PatternArgs {
    fn config(&self) -> BootstrapConfig {
        BootstrapConfig {
            top_k: self.top_k,
            min_support: self.min_support,
            max_name_tokens: self.max_name_tokens,
            require_attested: !self.allow_unattested,
            ..BootstrapConfig::default()
        }
    }
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    io: InOut,
    #[command(flatten)]
    patterns: PatternArgs,
    /// Also write the rewritten candidate pairs as JSONL.
    #[arg(long, env = "SOFTNER_PAIRS_OUT")]
    pairs_out: Option<PathBuf>,
}

#[derive(Args)]
struct PropagateArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long, env = "SOFTNER_CATALOG")]
    catalog: PathBuf,
    #[command(flatten)]
    patterns: PatternArgs,
    /// Also write tab-separated CoNLL.
    #[arg(long, env = "SOFTNER_CONLL_OUT")]
    conll_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    io: InOut,
    #[arg(long, env = "SOFTNER_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "SOFTNER_EPOCHS", default_value_t = 30)]
    epochs: usize,
    #[arg(long, env = "SOFTNER_LR", default_value_t = 1e-3)]
    lr: f64,
    /// Entity-type loss weight.
    #[arg(long, env = "SOFTNER_ALPHA", default_value_t = 1.0)]
    alpha: f64,
    /// Data-type loss weight (0 trains the entity head alone).
    #[arg(long, env = "SOFTNER_BETA", default_value_t = 0.5)]
    beta: f64,
    #[arg(long, env = "SOFTNER_EMBED_DIM", default_value_t = 100)]
    embed_dim: usize,
    #[arg(long, env = "SOFTNER_HIDDEN", default_value_t = 200)]
    hidden: usize,
    #[arg(long, env = "SOFTNER_MAX_SEQ_LEN", default_value_t = 300)]
    max_seq_len: usize,
    #[arg(long, env = "SOFTNER_BATCH_SIZE", default_value_t = 8)]
    batch_size: usize,
    #[arg(long, env = "SOFTNER_CLIP_NORM", default_value_t = 5.0)]
    clip_norm: f64,
    #[arg(long, env = "SOFTNER_MIN_COUNT", default_value_t = 2)]
    min_count: usize,
    #[arg(long, env = "SOFTNER_OPTIMIZER", value_enum, default_value_t = Optimizer::Adam)]
    optimizer: Optimizer,
    /// Pre-trained word vectors, one `token v1 … vD` per line.
    #[arg(long, env = "SOFTNER_EMBEDDINGS")]
    embeddings: Option<PathBuf>,
    /// Write per-epoch losses as JSON.
    #[arg(long, env = "SOFTNER_REPORT_OUT")]
    report_out: Option<PathBuf>,
}

impl TrainArgs {
    fn config(&self) -> TrainingConfig {
        TrainingConfig {
            alpha: self.alpha,
            beta: self.beta,
            learning_rate: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            max_seq_len: self.max_seq_len,
            clip_norm: self.clip_norm,
            optimizer: match self.optimizer {
                Optimizer::Adam => OptimizerKind::Adam,
                Optimizer::Sgd => OptimizerKind::Sgd,
            },
            batch_size: self.batch_size,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            min_count: self.min_count,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, env = "SOFTNER_MODEL", required_unless_present = "catalog")]
    model: Option<PathBuf>,
    /// Corpus to score (its incidents must have gold records).
    #[arg(long = "in", env = "SOFTNER_IN", requires = "gold")]
    input: Option<PathBuf>,
    #[arg(long, env = "SOFTNER_GOLD")]
    gold: Option<PathBuf>,
    /// Metrics JSON.
    #[arg(long, env = "SOFTNER_OUT")]
    out: PathBuf,
    /// Catalog to rank against the valid type names.
    #[arg(long, env = "SOFTNER_CATALOG", requires = "rank_csv")]
    catalog: Option<PathBuf>,
    /// Valid type names, one per line (default: the gold records' types).
    #[arg(long, env = "SOFTNER_TRUTH")]
    truth: Option<PathBuf>,
    #[arg(long, env = "SOFTNER_RANK_CSV")]
    rank_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, env = "SOFTNER_MODEL")]
    model: PathBuf,
    /// Text (or HTML) of one description.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    text: Option<String>,
    /// Corpus JSONL; one result line per incident.
    #[arg(long = "in", env = "SOFTNER_IN")]
    input: Option<PathBuf>,
    /// Default: stdout.
    #[arg(long, env = "SOFTNER_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TriageArgs {
    #[arg(long, env = "SOFTNER_MODEL")]
    model: PathBuf,
    #[command(flatten)]
    io: InOut,
    #[arg(long, env = "SOFTNER_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "SOFTNER_FOLDS", default_value_t = 5)]
    folds: usize,
    /// Neighbours for k-NN.
    #[arg(long, env = "SOFTNER_K", default_value_t = 5)]
    k: usize,
    /// One-hot values kept per categorical entity type.
    #[arg(long, env = "SOFTNER_TOP_V", default_value_t = 20)]
    top_v: usize,
    #[arg(long, env = "SOFTNER_TOP_TEAMS", default_value_t = 10)]
    top_teams: usize,
    #[arg(long, env = "SOFTNER_RESOLVED_FRACTION", default_value_t = 0.2)]
    resolved_fraction: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "SOFTNER_MODEL")]
    model: PathBuf,
    #[arg(long, env = "SOFTNER_BIND", default_value = "127.0.0.1:8080")]
    bind: String,
    #[arg(long, env = "SOFTNER_MAX_CONCURRENCY", default_value_t = server::DEFAULT_MAX_CONCURRENCY)]
    max_concurrency: usize,
    #[arg(long, env = "SOFTNER_MAX_BODY_BYTES", default_value_t = server::DEFAULT_MAX_BODY)]
    max_body_bytes: usize,
}

/// What a stage did, for the manifest.
struct StageRun {
    stage: &'static str,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load_gold(path: &Path) -> Result<Vec<GoldRecord>> {
    GoldRecord::load_jsonl(path).with_context(|| format!("loading gold labels {}", path.display()))
}

fn load_incidents(path: &Path) -> Result<Vec<softner_core::corpus::Incident>> {
    load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn load(path: &Path) -> Result<MultiTaskModel> {
    load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<StageRun> {
    let opts = SynthOptions {
        seed: a.seed,
        incidents: a.incidents,
        teams: a.teams,
        inline_rate: a.inline_rate,
        noise_rate: a.noise_rate,
        planted_types: a.planted_types,
        drop_types: a.drop_types,
    };
    let (incidents, gold) = generate(&opts.config())?;
    let cut = split_point(incidents.len(), a.test_fraction)?;
    if cut < incidents.len() && a.test_out.is_none() {
        bail!("--test-fraction needs --test-out and --test-gold-out");
    }
    write_synth(&a.out, &a.gold_out, &incidents[..cut], &gold[..cut])?;
    let mut outputs = vec![a.out, a.gold_out];
    if let (Some(t), Some(g)) = (a.test_out, a.test_gold_out) {
        write_synth(&t, &g, &incidents[cut..], &gold[cut..])?;
        outputs.extend([t, g]);
    }
    let words: usize = incidents.iter().map(|i| i.description_html.split_whitespace().count()).sum();
    log::info!(
        "synth: {} incidents ({} held out), mean {:.1} words per description",
        incidents.len(),
        incidents.len() - cut,
        words as f64 / incidents.len().max(1) as f64
    );
    Ok(StageRun {
        stage: "synth",
        config: json!({ "options": opts, "testFraction": a.test_fraction }),
        seed: Some(opts.seed),
        inputs: vec![],
        outputs,
    })
}

fn clean_stage(a: InOut) -> Result<StageRun> {
    let incidents = load_incidents(&a.input)?;
    write_clean(&a.out, &clean(&incidents))?;
    Ok(StageRun {
        stage: "clean",
        config: json!({}),
        seed: None,
        inputs: vec![a.input],
        outputs: vec![a.out],
    })
}

fn bootstrap_stage(a: BootstrapArgs) -> Result<StageRun> {
    let cfg = a.patterns.config();
    let incidents = load_incidents(&a.io.input)?;
    let (catalog, pairs) = bootstrap_incidents(&incidents, &cfg);
    catalog.save(&a.io.out)?;
    let mut outputs = vec![a.io.out];
    if let Some(p) = a.pairs_out {
        write_jsonl(&p, &pairs)?;
        outputs.push(p);
    }
    Ok(StageRun {
        stage: "bootstrap",
        config: serde_json::to_value(&cfg)?,
        seed: None,
        inputs: vec![a.io.input],
        outputs,
    })
}

fn propagate_stage(a: PropagateArgs) -> Result<StageRun> {
    let cfg = a.patterns.config();
    let incidents = load_incidents(&a.io.input)?;
    let catalog = EntityCatalog::load(&a.catalog).with_context(|| format!("loading catalog {}", a.catalog.display()))?;
    let corpus = propagate_incidents(&incidents, &catalog, &cfg);
    corpus.save_json(&a.io.out)?;
    let mut outputs = vec![a.io.out];
    if let Some(p) = a.conll_out {
        std::fs::write(&p, corpus.to_conll()).with_context(|| format!("writing {}", p.display()))?;
        outputs.push(p);
    }
    Ok(StageRun {
        stage: "propagate",
        config: serde_json::to_value(&cfg)?,
        seed: None,
        inputs: vec![a.io.input, a.catalog],
        outputs,
    })
}

fn train_stage(a: TrainArgs) -> Result<StageRun> {
    let cfg = a.config();
    cfg.validate()?;
    let corpus = LabeledCorpus::load_json(&a.io.input)
        .with_context(|| format!("loading labeled corpus {}", a.io.input.display()))?;
    let mut model = MultiTaskModel::for_corpus(&corpus, cfg.model_config(), cfg.min_count, cfg.seed)?;
    let mut inputs = vec![a.io.input];
    if let Some(path) = a.embeddings {
        let table = read_embedding_file(&path, cfg.embed_dim)?;
        let n = model.load_embeddings(&table)?;
        log::info!("initialised {n} embedding rows from {}", path.display());
        inputs.push(path);
    }
    let report = train_model(&mut model, &corpus, &cfg)?;
    save_model(&model, &a.io.out)?;
    let mut outputs = vec![a.io.out];
    if let Some(p) = a.report_out {
        write_json(&p, &report)?;
        outputs.push(p);
    }
    Ok(StageRun {
        stage: "train",
        config: serde_json::to_value(&cfg)?,
        seed: Some(cfg.seed),
        inputs,
        outputs,
    })
}

fn eval_stage(a: EvalArgs) -> Result<StageRun> {
    let mut report = serde_json::Map::new();
    let mut inputs = Vec::new();
    let gold = a.gold.as_deref().map(load_gold).transpose()?;
    if let Some(m) = &a.model {
        let (Some(input), Some(gold)) = (&a.input, &gold) else {
            bail!("scoring a model needs --in and --gold");
        };
        let model = load(m)?;
        let incidents = load_incidents(input)?;
        let r = evaluate(&model, &incidents, gold)?;
        log::info!(
            "entity weighted F1 {:.4}, macro F1 {:.4}, inline recall {:?}",
            r.entity.weighted_f1,
            r.entity.macro_avg.f1,
            r.inline_recall()
        );
        report.insert("ner".into(), serde_json::to_value(&r)?);
        inputs.extend([m.clone(), input.clone()]);
    }
    if let (Some(c), Some(csv)) = (&a.catalog, &a.rank_csv) {
        let catalog = EntityCatalog::load(c).with_context(|| format!("loading catalog {}", c.display()))?;
        let truth = match (&a.truth, &gold) {
            (Some(t), _) => std::fs::read_to_string(t)
                .with_context(|| format!("reading {}", t.display()))?
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
            (None, Some(g)) => g.iter().flat_map(|r| &r.spans).map(|s| s.entity_type.clone()).collect(),
            (None, None) => bail!("ranking a catalog needs --truth or --gold"),
        };
        let curve = precision_at_rank(&catalog, &truth)?;
        std::fs::write(csv, curve.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
        report.insert("precisionAtRank".into(), serde_json::to_value(&curve.points)?);
        inputs.push(c.clone());
    }
    inputs.extend(a.gold.iter().chain(&a.truth).cloned());
    write_json(&a.out, &report)?;
    let mut outputs = vec![a.out];
    outputs.extend(a.rank_csv);
    Ok(StageRun {
        stage: "eval",
        config: json!({}),
        seed: None,
        inputs,
        outputs,
    })
}

fn extract_stage(a: ExtractArgs) -> Result<StageRun> {
    let model = load(&a.model)?;
    let mut lines = Vec::new();
    let mut inputs = vec![a.model];
    if let Some(text) = &a.text {
        lines.push(serde_json::to_string(&extract_response(&model, text)?)?);
    } else if let Some(path) = a.input {
        for inc in load_incidents(&path)? {
            let mut v = serde_json::to_value(extract_response(&model, &inc.description_html)?)?;
            v["incidentId"] = json!(inc.id);
            lines.push(serde_json::to_string(&v)?);
        }
        inputs.push(path);
    }
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    let mut outputs = Vec::new();
    match a.out {
        Some(p) => {
            std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            outputs.push(p);
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(StageRun {
        stage: "extract",
        config: json!({}),
        seed: None,
        inputs,
        outputs,
    })
}

fn triage_stage(a: TriageArgs) -> Result<StageRun> {
    let opts = TriageOptions {
        folds: a.folds,
        k: a.k,
        top_v: a.top_v,
        top_teams: a.top_teams,
        resolved_fraction: a.resolved_fraction,
        seed: a.seed,
    };
    let model = load(&a.model)?;
    let incidents = load_incidents(&a.io.input)?;
    let results = run_triage(&model, &incidents, &opts)?;
    std::fs::write(&a.io.out, results_csv(&results)).with_context(|| format!("writing {}", a.io.out.display()))?;
    Ok(StageRun {
        stage: "triage",
        config: serde_json::to_value(&opts)?,
        seed: Some(opts.seed),
        inputs: vec![a.model, a.io.input],
        outputs: vec![a.io.out],
    })
}

fn serve_stage(a: ServeArgs) -> Result<()> {
    let model = Arc::new(load(&a.model)?);
    if !model.trained {
        bail!("model {} has not been trained", a.model.display());
    }
    let config = ServerConfig {
        max_body_bytes: a.max_body_bytes,
        max_concurrency: a.max_concurrency,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.bind)
            .await
            .with_context(|| format!("binding {}", a.bind))?;
        server::serve(listener, model, config).await?;
        Ok(())
    })
}

fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let stage = match cli.command {
        Command::Synth(a) => synth(a)?,
        Command::Clean(a) => clean_stage(a)?,
        Command::Bootstrap(a) => bootstrap_stage(a)?,
        Command::Propagate(a) => propagate_stage(a)?,
        Command::Train(a) => train_stage(a)?,
        Command::Eval(a) => eval_stage(a)?,
        Command::Extract(a) => extract_stage(a)?,
        Command::Triage(a) => triage_stage(a)?,
        Command::Serve(a) => return serve_stage(a),
    };
    if let Some(path) = cli.manifest {
        let mut m = PipelineRunManifest::load_or_new(&path)?;
        let inputs: Vec<&Path> = stage.inputs.iter().map(PathBuf::as_path).collect();
        let outputs: Vec<&Path> = stage.outputs.iter().map(PathBuf::as_path).collect();
        m.record(stage.stage, &stage.config, stage.seed, &inputs, &outputs, start.elapsed())?;
        m.save(&path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
