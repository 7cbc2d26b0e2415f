//! Corpus-wide label propagation and BIO encoding.
//!
//! Seed spans come from the pattern extractors. Every value seen in a seed
//! is indexed under its most popular entity type, then all untagged
//! occurrences of that value (as a token sequence) are tagged too.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{CandidatePair, EntityCatalog};
use crate::corpus::{tokenize, Document, Token};
use crate::typing::{classify_value, DataType};
use crate::{Error, Result};

pub const OUTSIDE: &str = "O";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Pattern,
    Propagated,
    /// Decoded by a trained model.
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabeledToken {
    pub token: Token,
    pub entity_tag: String,
    pub dtype_tag: String,
}

/// A tagged token range `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabeledSentence {
    pub incident_id: String,
    pub text: String,
    pub tokens: Vec<LabeledToken>,
    pub spans: Vec<LabeledSpan>,
}

impl LabeledSentence {
    /// Build a sentence from non-overlapping spans; tags follow from the spans.
    pub fn from_spans(
        incident_id: &str,
        text: &str,
        tokens: Vec<Token>,
        mut spans: Vec<LabeledSpan>,
        catalog: &EntityCatalog,
    ) -> Self {
        spans.sort_by_key(|s| (s.start, s.end));
        let mut labeled: Vec<LabeledToken> = tokens
            .into_iter()
            .map(|token| LabeledToken {
                token,
                entity_tag: OUTSIDE.into(),
                dtype_tag: OUTSIDE.into(),
            })
            .collect();
        for s in &spans {
            let dtype = entity_dtype(catalog, &s.entity_type);
            for (i, t) in labeled[s.start..s.end].iter_mut().enumerate() {
                let p = if i == 0 { "B" } else { "I" };
                t.entity_tag = format!("{p}-{}", s.entity_type);
                t.dtype_tag = format!("{p}-{}", dtype.as_str());
            }
        }
        Self {
            incident_id: incident_id.to_string(),
            text: text.to_string(),
            tokens: labeled,
            spans,
        }
    }

    /// Build a sentence from decoded tag sequences (one tag per token each).
    pub fn from_tags(
        incident_id: &str,
        text: &str,
        tokens: Vec<Token>,
        entity_tags: Vec<String>,
        dtype_tags: Vec<String>,
    ) -> Result<Self> {
        if entity_tags.len() != tokens.len() || dtype_tags.len() != tokens.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} tokens, {} entity tags, {} dtype tags",
                tokens.len(),
                entity_tags.len(),
                dtype_tags.len()
            )));
        }
        let spans = spans_from_tags(&entity_tags)
            .into_iter()
            .map(|(start, end, entity_type)| LabeledSpan {
                start,
                end,
                entity_type,
                provenance: Provenance::Predicted,
            })
            .collect();
        let tokens = tokens
            .into_iter()
            .zip(entity_tags.into_iter().zip(dtype_tags))
            .map(|(token, (entity_tag, dtype_tag))| LabeledToken {
                token,
                entity_tag,
                dtype_tag,
            })
            .collect();
        Ok(Self {
            incident_id: incident_id.to_string(),
            text: text.to_string(),
            tokens,
            spans,
        })
    }

    pub fn entity_tags(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.entity_tag.as_str()).collect()
    }

    pub fn dtype_tags(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.dtype_tag.as_str()).collect()
    }

    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.token.text.as_str()).collect()
    }
}

/// Catalog data type of an entity, `OTHER` when unresolved or unknown.
pub fn entity_dtype(catalog: &EntityCatalog, entity: &str) -> DataType {
    catalog
        .get(entity)
        .and_then(|e| e.data_type)
        .unwrap_or(DataType::Other)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub sentences: Vec<LabeledSentence>,
    #[serde(with = "catalog_serde")]
    pub catalog: EntityCatalog,
}

mod catalog_serde {
    use super::*;
    use crate::bootstrap::EntityType;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &EntityCatalog, s: S) -> std::result::Result<S::Ok, S::Error> {
        c.entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<EntityCatalog, D::Error> {
        let entries = Vec::<EntityType>::deserialize(d)?;
        Ok(EntityCatalog {
            capacity: entries.len(),
            entries,
        })
    }
}

impl LabeledCorpus {
    pub fn span_count(&self) -> usize {
        self.sentences.iter().map(|s| s.spans.len()).sum()
    }

    /// CoNLL-style export: `token<TAB>entityTag<TAB>dtypeTag`, blank line
    /// between sentences. Tabs because entity tags contain spaces.
    pub fn to_conll(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            for t in &s.tokens {
                let _ = writeln!(out, "{}\t{}\t{}", t.token.text, t.entity_tag, t.dtype_tag);
            }
            out.push('\n');
        }
        out
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("corpus serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Value string → entity type.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValueIndex {
    pub map: BTreeMap<String, String>,
}

impl ValueIndex {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, value: &str) -> Option<&str> {
        self.map.get(value).map(String::as_str)
    }
}

/// Whether a value may be propagated. Booleans and non-alphanumerics never
/// are, alphabetical values only up to two tokens, numbers from three
/// characters on.
pub fn eligible_for_propagation(value: &str) -> bool {
    let Ok(dtype) = classify_value(value) else {
        return false;
    };
    match dtype {
        DataType::Boolean | DataType::NonAlphanumeric => false,
        DataType::Alphabetical => tokenize(value).len() <= 2,
        DataType::Numeric => value.trim().chars().count() >= 3,
        DataType::Guid | DataType::Uri | DataType::IpAddress | DataType::Alphanumeric | DataType::Other => true,
    }
}

/// Most popular entity type per eligible value; ties go to the type that
/// ranks first in the catalog.
pub fn build_value_index(pairs: &[CandidatePair], catalog: &EntityCatalog) -> ValueIndex {
    let mut counts: HashMap<&str, HashMap<&str, usize>> = HashMap::new();
    for p in pairs {
        let Some(entry) = catalog.get(&p.name) else {
            continue;
        };
        if entry.data_type == Some(DataType::Boolean) {
            continue;
        }
        *counts
            .entry(p.value.trim())
            .or_default()
            .entry(p.name.as_str())
            .or_default() += 1;
    }
    let rank = |name: &str| catalog.position(name).unwrap_or(usize::MAX);
    let map = counts
        .into_iter()
        .filter(|(v, _)| eligible_for_propagation(v))
        .map(|(v, types)| {
            let (best, _) = types
                .into_iter()
                .max_by(|(ta, ca), (tb, cb)| ca.cmp(cb).then(rank(tb).cmp(&rank(ta))))
                .unwrap();
            (v.to_string(), best.to_string())
        })
        .collect();
    ValueIndex { map }
}

/// Index keys as token sequences, for matching against tokenized text.
struct TokenIndex<'a> {
    keys: HashMap<Vec<String>, &'a str>,
    max_len: usize,
}

impl<'a> TokenIndex<'a> {
    fn new(index: &'a ValueIndex) -> Self {
        let mut keys = HashMap::new();
        let mut max_len = 0;
        for (value, ty) in &index.map {
            let toks: Vec<String> = tokenize(value).into_iter().map(|t| t.text).collect();
            if toks.is_empty() {
                continue;
            }
            max_len = max_len.max(toks.len());
            keys.insert(toks, ty.as_str());
        }
        Self { keys, max_len }
    }
}

/// New spans for one sentence: greedy left to right, longest match first,
/// never overlapping `existing`.
fn propagate_tokens(tokens: &[&str], existing: &[LabeledSpan], index: &TokenIndex) -> Vec<LabeledSpan> {
    let mut covered = vec![false; tokens.len()];
    for s in existing {
        covered[s.start..s.end].iter_mut().for_each(|c| *c = true);
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if covered[i] {
            i += 1;
            continue;
        }
        let longest = (i + 1..=tokens.len().min(i + index.max_len)).rev().find_map(|end| {
            if covered[i..end].iter().any(|&c| c) {
                return None;
            }
            let key: Vec<String> = tokens[i..end].iter().map(|t| t.to_string()).collect();
            index.keys.get(&key).map(|ty| (end, *ty))
        });
        match longest {
            Some((end, ty)) => {
                out.push(LabeledSpan {
                    start: i,
                    end,
                    entity_type: ty.to_string(),
                    provenance: Provenance::Propagated,
                });
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

/// Propagate index labels into a labeled corpus, keeping every existing span.
pub fn propagate(corpus: &LabeledCorpus, index: &ValueIndex) -> LabeledCorpus {
    let tindex = TokenIndex::new(index);
    let sentences = corpus
        .sentences
        .iter()
        .map(|s| {
            let texts = s.token_texts();
            let mut spans = s.spans.clone();
            spans.extend(propagate_tokens(&texts, &s.spans, &tindex));
            LabeledSentence::from_spans(
                &s.incident_id,
                &s.text,
                s.tokens.iter().map(|t| t.token.clone()).collect(),
                spans,
                &corpus.catalog,
            )
        })
        .collect();
    LabeledCorpus {
        sentences,
        catalog: corpus.catalog.clone(),
    }
}

/// Seed-only labeled corpus: one sentence per document sentence, with a
/// PATTERN span for every (rewritten) candidate pair. Overlapping seeds
/// keep the earliest.
pub fn seed_corpus(docs: &[Document], seeds: &[CandidatePair], catalog: &EntityCatalog) -> LabeledCorpus {
    let mut by_pos: HashMap<(&str, usize), Vec<&CandidatePair>> = HashMap::new();
    for p in seeds {
        if catalog.get(&p.name).is_some() {
            by_pos.entry((p.incident_id.as_str(), p.sentence)).or_default().push(p);
        }
    }
    let mut sentences = Vec::new();
    for doc in docs {
        for (i, s) in doc.sentences.iter().enumerate() {
            let mut spans: Vec<LabeledSpan> = Vec::new();
            let mut pairs = by_pos.remove(&(doc.incident_id(), i)).unwrap_or_default();
            pairs.sort_by_key(|p| p.value_span);
            for p in pairs {
                let (a, b) = p.value_span;
                if a >= b || b > s.tokens.len() || spans.iter().any(|x| a < x.end && x.start < b) {
                    continue;
                }
                spans.push(LabeledSpan {
                    start: a,
                    end: b,
                    entity_type: p.name.clone(),
                    provenance: Provenance::Pattern,
                });
            }
            sentences.push(LabeledSentence::from_spans(
                doc.incident_id(),
                &s.text,
                s.tokens.clone(),
                spans,
                catalog,
            ));
        }
    }
    LabeledCorpus {
        sentences,
        catalog: catalog.clone(),
    }
}

/// Seed spans from pattern positions, then propagate the index.
pub fn propagate_labels(
    docs: &[Document],
    index: &ValueIndex,
    seeds: &[CandidatePair],
    catalog: &EntityCatalog,
) -> LabeledCorpus {
    propagate(&seed_corpus(docs, seeds, catalog), index)
}

/// Decode BIO tags into `(start, end, type)` spans. A stray `I-x` opens a
/// new span, as if it were `B-x`.
pub fn spans_from_tags<S: AsRef<str>>(tags: &[S]) -> Vec<(usize, usize, String)> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, String)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let (prefix, ty) = match tag.split_once('-') {
            Some((p @ ("B" | "I"), ty)) => (p, ty),
            _ => ("O", ""),
        };
        let continues = prefix == "I" && open.as_ref().is_some_and(|(_, t)| t == ty);
        if continues {
            continue;
        }
        if let Some((s, t)) = open.take() {
            spans.push((s, i, t));
        }
        if prefix != "O" {
            open = Some((i, ty.to_string()));
        }
    }
    if let Some((s, t)) = open {
        spans.push((s, tags.len(), t));
    }
    spans
}

/// True when no `I-x` lacks a `B-x`/`I-x` predecessor.
pub fn is_valid_bio<S: AsRef<str>>(tags: &[S]) -> bool {
    tags.iter().enumerate().all(|(i, t)| match t.as_ref().strip_prefix("I-") {
        None => true,
        Some(ty) => i > 0 && {
            let prev = tags[i - 1].as_ref();
            prev.strip_prefix("B-").or_else(|| prev.strip_prefix("I-")) == Some(ty)
        },
    })
}
