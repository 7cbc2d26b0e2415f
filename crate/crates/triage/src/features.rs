//! Feature vectors for team classification.
//!
//! Blocks, in order:
//! - categorical: per non-alphabetical entity type, a one-hot over its top-V
//!   values plus an `OTHER` slot
//! - descriptive: mean embedding of the tokens of alphabetical entity values
//! - title: mean embedding of title tokens
//! - description: mean embedding of all cleaned description tokens
//!
//! `TITLE_DESCRIPTION` = title + description, `ENTITIES` = categorical +
//! descriptive, `ENTITIES_TITLE` = `ENTITIES` + title.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use softner_core::corpus::{tokenize, CleanDoc, Incident};
use softner_core::typing::DataType;
use softner_nn::{ExtractionResult, MultiTaskModel, Vocab};

use crate::error::{Result, TriageError};

pub const OTHER_BUCKET: &str = "<other>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureMode {
    TitleDescription,
    Entities,
    EntitiesTitle,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::TitleDescription, FeatureMode::Entities, FeatureMode::EntitiesTitle];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::TitleDescription => "TITLE_DESCRIPTION",
            FeatureMode::Entities => "ENTITIES",
            FeatureMode::EntitiesTitle => "ENTITIES_TITLE",
        }
    }

    fn blocks(self) -> (bool, bool, bool) {
        // (entities, title, description)
        match self {
            FeatureMode::TitleDescription => (false, true, true),
            FeatureMode::Entities => (true, false, false),
            FeatureMode::EntitiesTitle => (true, true, false),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', '+'], "_");
        FeatureMode::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| TriageError::UnknownMode(s.to_string()))
    }
}

/// Word vectors used for mean pooling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordEmbeddings {
    pub dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl WordEmbeddings {
    pub fn new(dim: usize, table: HashMap<String, Vec<f64>>) -> Result<Self> {
        if let Some((t, v)) = table.iter().find(|(_, v)| v.len() != dim) {
            return Err(TriageError::Dimension(format!("{t:?} has {} values, expected {dim}", v.len())));
        }
        Ok(Self { dim, table })
    }

    /// The trained model's embedding rows (PAD and UNK excluded).
    pub fn from_model(model: &MultiTaskModel) -> Self {
        let emb = model.params.get(model.embedding);
        let table = model
            .vocab
            .tokens()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != Vocab::PAD && i != Vocab::UNK)
            .map(|(i, t)| (t.clone(), emb.row(i).to_vec()))
            .collect();
        Self {
            dim: model.config.embed_dim,
            table,
        }
    }

    fn lookup(&self, token: &str) -> Option<&Vec<f64>> {
        self.table.get(&token.to_lowercase()).or_else(|| self.table.get(token))
    }

    /// Mean of known token vectors; zeros when none are known.
    pub fn mean_pool<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim];
        let mut n = 0usize;
        for t in tokens {
            if let Some(v) = self.lookup(t) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                n += 1;
            }
        }
        if n > 0 {
            sum.iter_mut().for_each(|s| *s /= n as f64);
        }
        sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Owning team.
    pub label: String,
}

/// Incident paired with its extraction output.
#[derive(Debug, Clone)]
pub struct TriageRecord {
    pub incident: Incident,
    pub extraction: ExtractionResult,
}

/// Fitted layout of the categorical block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    /// Categorical entity types (sorted) with their kept values (most frequent first).
    pub categorical: Vec<(String, Vec<String>)>,
    pub top_v: usize,
}

impl FeatureSpace {
    /// Entity types whose mentions are mostly non-alphabetical become
    /// categorical; each keeps its `top_v` most frequent values (ties by value).
    pub fn fit(records: &[TriageRecord], top_v: usize) -> Self {
        let mut kinds: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        let mut values: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
        for r in records {
            for e in &r.extraction.entities {
                let k = kinds.entry(&e.name).or_default();
                if e.data_type == DataType::Alphabetical {
                    k.1 += 1;
                } else {
                    k.0 += 1;
                }
                *values.entry(&e.name).or_default().entry(&e.value).or_default() += 1;
            }
        }
        let categorical = kinds
            .into_iter()
            .filter(|(_, (cat, desc))| cat > desc)
            .map(|(name, _)| {
                let mut vs: Vec<(&str, usize)> = values[name].iter().map(|(v, c)| (*v, *c)).collect();
                vs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
                (name.to_string(), vs.into_iter().take(top_v).map(|(v, _)| v.to_string()).collect())
            })
            .collect();
        Self { categorical, top_v }
    }

    pub fn categorical_dim(&self) -> usize {
        self.categorical.iter().map(|(_, v)| v.len() + 1).sum()
    }

    pub fn dim(&self, mode: FeatureMode, embed_dim: usize) -> usize {
        let (ent, title, desc) = mode.blocks();
        let mut d = 0;
        if ent {
            d += self.categorical_dim() + embed_dim;
        }
        if title {
            d += embed_dim;
        }
        if desc {
            d += embed_dim;
        }
        d
    }

    pub fn feature_names(&self, mode: FeatureMode, embed_dim: usize) -> Vec<String> {
        let (ent, title, desc) = mode.blocks();
        let mut names = Vec::new();
        let pooled = |names: &mut Vec<String>, block: &str| {
            names.extend((0..embed_dim).map(|i| format!("{block}[{i}]")));
        };
        if ent {
            for (ty, vals) in &self.categorical {
                names.extend(vals.iter().map(|v| format!("{ty}={v}")));
                names.push(format!("{ty}={OTHER_BUCKET}"));
            }
            pooled(&mut names, "entities");
        }
        if title {
            pooled(&mut names, "title");
        }
        if desc {
            pooled(&mut names, "description");
        }
        names
    }
}

fn description_tokens(html: &str) -> Vec<String> {
    CleanDoc::from_html("", html)
        .sentences
        .iter()
        .flat_map(|s| tokenize(s).into_iter().map(|t| t.text))
        .collect()
}

pub fn build_features(
    incident: &Incident,
    extraction: &ExtractionResult,
    embeddings: &WordEmbeddings,
    mode: FeatureMode,
    space: &FeatureSpace,
) -> FeatureVector {
    let (ent, title, desc) = mode.blocks();
    let mut values = Vec::with_capacity(space.dim(mode, embeddings.dim));
    if ent {
        for (ty, vals) in &space.categorical {
            let mut block = vec![0.0; vals.len() + 1];
            // The first mention of a type decides its slot.
            if let Some(e) = extraction.entities.iter().find(|e| &e.name == ty) {
                let slot = vals.iter().position(|v| v == &e.value).unwrap_or(vals.len());
                block[slot] = 1.0;
            }
            values.extend(block);
        }
        let categorical: std::collections::HashSet<&str> = space.categorical.iter().map(|(t, _)| t.as_str()).collect();
        let words: Vec<String> = extraction
            .entities
            .iter()
            .filter(|e| !categorical.contains(e.name.as_str()))
            .flat_map(|e| tokenize(&e.value).into_iter().map(|t| t.text))
            .collect();
        values.extend(embeddings.mean_pool(words.iter().map(String::as_str)));
    }
    if title {
        let words: Vec<String> = tokenize(&incident.title).into_iter().map(|t| t.text).collect();
        values.extend(embeddings.mean_pool(words.iter().map(String::as_str)));
    }
    if desc {
        let words = description_tokens(&incident.description_html);
        values.extend(embeddings.mean_pool(words.iter().map(String::as_str)));
    }
    FeatureVector {
        values,
        label: incident.owning_team.clone(),
    }
}

/// Feature matrix for a set of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub samples: Vec<FeatureVector>,
}

impl Dataset {
    pub fn build(records: &[TriageRecord], embeddings: &WordEmbeddings, mode: FeatureMode, space: &FeatureSpace) -> Self {
        Self {
            feature_names: space.feature_names(mode, embeddings.dim),
            samples: records
                .iter()
                .map(|r| build_features(&r.incident, &r.extraction, embeddings, mode, space))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
