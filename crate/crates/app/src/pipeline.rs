//! Stage implementations shared by the CLI, the service and the
//! end-to-end run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use softner_core::bootstrap::{
    extract_candidates, filter_candidates, mine_entity_types, rewrite_candidates, BootstrapConfig, CandidatePair,
    EntityCatalog, EntityType,
};
use softner_core::corpus::{clean_incident, load_corpus, write_jsonl, CleanDoc, Document, Incident};
use softner_core::eval::{dtype_metrics, ner_metrics, token_accuracy, EntityMetrics};
use softner_core::propagation::{build_value_index, propagate_labels, spans_from_tags, LabeledCorpus};
use softner_core::synth::{align_gold, generate, gold_corpus, planted_schema, write_synth, GoldRecord, MentionKind, SynthConfig};
use softner_nn::{extract, predict_corpus, save_model, train, ExtractionResult, MultiTaskModel, TrainingConfig};
use softner_triage::{evaluate_all, select_records, CvResult, Selection, TriageRecord, WordEmbeddings};

use crate::manifest::PipelineRunManifest;

/// Version of the JSON extraction response.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtractResponse {
    pub schema_version: u32,
    #[serde(flatten)]
    pub result: ExtractionResult,
}

/// Extraction as served over HTTP and printed by `extract`.
pub fn extract_response(model: &MultiTaskModel, description: &str) -> Result<ExtractResponse> {
    Ok(ExtractResponse {
        schema_version: SCHEMA_VERSION,
        result: extract(model, description)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthOptions {
    pub seed: u64,
    pub incidents: usize,
    pub teams: usize,
    pub inline_rate: f64,
    /// Rate of spurious colon lines.
    pub noise_rate: f64,
    /// 0 uses the default eleven-type schema; otherwise that many planted types.
    pub planted_types: usize,
    /// Default-schema types to leave out (case-insensitive).
    pub drop_types: Vec<String>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            incidents: 1500,
            teams: 10,
            inline_rate: 0.3,
            noise_rate: 0.1,
            planted_types: 0,
            drop_types: Vec::new(),
        }
    }
}

impl SynthOptions {
    pub fn config(&self) -> SynthConfig {
        let schema = if self.planted_types == 0 {
            softner_core::synth::default_schema()
        } else {
            planted_schema(self.planted_types, self.seed)
        };
        let drop: Vec<&str> = self.drop_types.iter().map(String::as_str).collect();
        let mut cfg = SynthConfig::with_schema(self.seed, self.incidents, schema, self.teams).without(&drop);
        cfg.inline_rate = self.inline_rate;
        cfg.spurious_colon_rate = self.noise_rate;
        cfg
    }
}

/// Number of leading incidents kept for training under an order split.
pub fn split_point(n: usize, test_fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&test_fraction) {
        bail!("test fraction must lie in [0, 1), got {test_fraction}");
    }
    Ok(n - (n as f64 * test_fraction).round() as usize)
}

pub fn documents(incidents: &[Incident]) -> Vec<Document> {
    incidents.iter().map(Document::from_incident).collect()
}

pub fn clean(incidents: &[Incident]) -> Vec<CleanDoc> {
    incidents.iter().map(clean_incident).collect()
}

fn candidates(docs: &[Document], cfg: &BootstrapConfig) -> Vec<CandidatePair> {
    filter_candidates(docs.iter().flat_map(|d| extract_candidates(d, cfg)).collect())
}

pub fn bootstrap_incidents(incidents: &[Incident], cfg: &BootstrapConfig) -> (EntityCatalog, Vec<CandidatePair>) {
    let docs = documents(incidents);
    let (catalog, pairs) = mine_entity_types(&candidates(&docs, cfg), cfg);
    log::info!("bootstrap: {} incidents, {} pairs, {} entity types", incidents.len(), pairs.len(), catalog.len());
    (catalog, pairs)
}

/// Re-extract candidates, rewrite them against `catalog`, seed and propagate.
pub fn propagate_incidents(incidents: &[Incident], catalog: &EntityCatalog, cfg: &BootstrapConfig) -> LabeledCorpus {
    let docs = documents(incidents);
    let pairs = rewrite_candidates(&candidates(&docs, cfg), catalog);
    let index = build_value_index(&pairs, catalog);
    let corpus = propagate_labels(&docs, &index, &pairs, catalog);
    log::info!(
        "propagate: {} sentences, {} spans, value index {}",
        corpus.sentences.len(),
        corpus.span_count(),
        index.len()
    );
    corpus
}

/// Catalog of the types present in gold records, most frequent first.
pub fn catalog_from_gold(gold: &[GoldRecord]) -> EntityCatalog {
    let mut seen: BTreeMap<&str, EntityType> = BTreeMap::new();
    for s in gold.iter().flat_map(|g| &g.spans) {
        seen.entry(&s.entity_type)
            .or_insert_with(|| EntityType {
                name: s.entity_type.clone(),
                frequency: 0,
                data_type: Some(s.data_type),
            })
            .frequency += 1;
    }
    let mut entries: Vec<EntityType> = seen.into_values().collect();
    entries.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.name.cmp(&b.name)));
    EntityCatalog {
        capacity: entries.len(),
        entries,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub entity: EntityMetrics,
    pub data_type: EntityMetrics,
    pub token_accuracy: f64,
    pub inline_spans: usize,
    pub inline_hits: usize,
    /// Gold spans that do not fall on token boundaries (not scored).
    pub unaligned_gold: usize,
}

impl EvalReport {
    pub fn inline_recall(&self) -> Option<f64> {
        (self.inline_spans > 0).then(|| self.inline_hits as f64 / self.inline_spans as f64)
    }
}

/// Span-exact metrics of `model` against gold labels for `incidents`.
pub fn evaluate(model: &MultiTaskModel, incidents: &[Incident], gold: &[GoldRecord]) -> Result<EvalReport> {
    let docs = documents(incidents);
    let gold_labels = gold_corpus(&docs, gold, &catalog_from_gold(gold));
    let pred = predict_corpus(model, &gold_labels)?;
    let (aligned, unaligned) = align_gold(&docs, gold);
    let (mut hits, mut total) = (0, 0);
    for (s, spans) in pred.sentences.iter().zip(&aligned) {
        let predicted = spans_from_tags(&s.entity_tags());
        for (span, kind) in spans {
            if *kind == MentionKind::Inline {
                total += 1;
                hits += usize::from(predicted.contains(span));
            }
        }
    }
    Ok(EvalReport {
        entity: ner_metrics(&pred, &gold_labels)?,
        data_type: dtype_metrics(&pred, &gold_labels)?,
        token_accuracy: token_accuracy(&pred, &gold_labels)?,
        inline_spans: total,
        inline_hits: hits,
        unaligned_gold: unaligned,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TriageOptions {
    pub folds: usize,
    pub k: usize,
    /// Values kept per categorical entity type (the rest share an OTHER slot).
    pub top_v: usize,
    pub top_teams: usize,
    pub resolved_fraction: f64,
    pub seed: u64,
}

impl Default for TriageOptions {
    fn default() -> Self {
        let sel = Selection::default();
        Self {
            folds: 5,
            k: 5,
            top_v: 20,
            top_teams: sel.top_teams,
            resolved_fraction: sel.resolved_fraction,
            seed: sel.seed,
        }
    }
}

/// Select incidents, extract entities from each and cross-validate every
/// feature mode with both classifiers.
pub fn run_triage(model: &MultiTaskModel, incidents: &[Incident], opts: &TriageOptions) -> Result<Vec<CvResult>> {
    let sel = Selection {
        top_teams: opts.top_teams,
        resolved_fraction: opts.resolved_fraction,
        seed: opts.seed,
    };
    let records: Vec<TriageRecord> = incidents
        .iter()
        .map(|i| TriageRecord {
            incident: i.clone(),
            extraction: ExtractionResult::default(),
        })
        .collect();
    let mut records = select_records(records, &sel)?;
    log::info!("triage: {} incidents selected", records.len());
    for r in &mut records {
        r.extraction = extract(model, &r.incident.description_html)?;
    }
    let emb = WordEmbeddings::from_model(model);
    Ok(evaluate_all(&records, &emb, opts.top_v, opts.k, opts.folds, opts.seed)?)
}

/// Configuration of a full synth → bootstrap → propagate → train → eval run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub synth: SynthOptions,
    pub test_fraction: f64,
    pub bootstrap: BootstrapConfig,
    pub training: TrainingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            synth: SynthOptions::default(),
            test_fraction: 0.2,
            bootstrap: BootstrapConfig::default(),
            training: TrainingConfig::default(),
        }
    }
}

/// Paths written by [`run_all`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub corpus: PathBuf,
    pub gold: PathBuf,
    pub catalog: PathBuf,
    pub labeled: PathBuf,
    pub model: PathBuf,
    pub metrics: PathBuf,
    pub manifest: PathBuf,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            corpus: dir.join("corpus.jsonl"),
            gold: dir.join("gold.jsonl"),
            catalog: dir.join("catalog.json"),
            labeled: dir.join("labeled.json"),
            model: dir.join("model.sner"),
            metrics: dir.join("metrics.json"),
            manifest: dir.join("manifest.json"),
        }
    }
}

/// Run every stage into `dir`, splitting incidents by order: weak labels
/// and training use the leading part, evaluation the held-out tail.
pub fn run_all(cfg: &RunConfig, dir: &Path) -> Result<(RunArtifacts, PipelineRunManifest)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let out = RunArtifacts::in_dir(dir);
    let mut manifest = PipelineRunManifest::new();

    let t = Instant::now();
    let (incidents, gold) = generate(&cfg.synth.config())?;
    write_synth(&out.corpus, &out.gold, &incidents, &gold)?;
    manifest.record("synth", &cfg.synth, Some(cfg.synth.seed), &[], &[&out.corpus, &out.gold], t.elapsed())?;

    let incidents = load_corpus(&out.corpus)?;
    let cut = split_point(incidents.len(), cfg.test_fraction)?;
    let (train_inc, test_inc) = incidents.split_at(cut);

    let t = Instant::now();
    let (catalog, _) = bootstrap_incidents(train_inc, &cfg.bootstrap);
    catalog.save(&out.catalog)?;
    manifest.record("bootstrap", &cfg.bootstrap, None, &[&out.corpus], &[&out.catalog], t.elapsed())?;

    let t = Instant::now();
    let labeled = propagate_incidents(train_inc, &catalog, &cfg.bootstrap);
    labeled.save_json(&out.labeled)?;
    manifest.record("propagate", &cfg.bootstrap, None, &[&out.corpus, &out.catalog], &[&out.labeled], t.elapsed())?;

    let t = Instant::now();
    let (model, _) = train(&labeled, &cfg.training)?;
    save_model(&model, &out.model)?;
    manifest.record("train", &cfg.training, Some(cfg.training.seed), &[&out.labeled], &[&out.model], t.elapsed())?;

    let t = Instant::now();
    let gold_test: Vec<GoldRecord> = gold.into_iter().skip(cut).collect();
    let report = evaluate(&model, test_inc, &gold_test)?;
    std::fs::write(&out.metrics, serde_json::to_string_pretty(&report)?)?;
    manifest.record(
        "eval",
        &serde_json::json!({ "testFraction": cfg.test_fraction }),
        None,
        &[&out.model, &out.corpus, &out.gold],
        &[&out.metrics],
        t.elapsed(),
    )?;
    manifest.save(&out.manifest)?;
    Ok((out, manifest))
}

/// Write cleaned documents as JSONL.
pub fn write_clean(path: &Path, docs: &[CleanDoc]) -> Result<()> {
    Ok(write_jsonl(path, docs)?)
}
