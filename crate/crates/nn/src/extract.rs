//! Entity extraction with a trained model.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use softner_core::corpus::{CleanDoc, Document, TokenizedSentence};
use softner_core::propagation::{spans_from_tags, LabeledCorpus, LabeledSentence, OUTSIDE};
use softner_core::typing::DataType;

use crate::crf;
use crate::error::{NnError, Result};
use crate::model::MultiTaskModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtractedEntity {
    /// Entity type, e.g. `subscription id`.
    pub name: String,
    pub value: String,
    pub data_type: DataType,
    /// Probability of the decoded entity-tag path for the sentence.
    pub score: f64,
    pub sentence: usize,
    /// Token range `start..end` within the sentence.
    pub token_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SentenceAttention {
    pub sentence: usize,
    pub tokens: Vec<String>,
    /// Entity-head attention weights, one per (possibly truncated) token.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExtractionResult {
    pub entities: Vec<ExtractedEntity>,
    pub attention: Vec<SentenceAttention>,
}

/// Decoded tags for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub entity_tags: Vec<String>,
    pub dtype_tags: Vec<String>,
    /// exp(best path score − log Z) for the entity head.
    pub path_probability: f64,
    pub attention: Vec<f64>,
}

/// Viterbi-decode both heads. Tokens past `max_seq_len` are tagged `O`.
pub fn decode<S: AsRef<str>>(model: &MultiTaskModel, tokens: &[S]) -> Result<Decoded> {
    let out = model.forward_pass(tokens)?;
    let ta = model.params.get(model.entity_head.transitions);
    let da = model.params.get(model.dtype_head.transitions);
    let (ey, escore) = crf::viterbi(&out.entity_emissions, ta)?;
    let (dy, _) = crf::viterbi(&out.dtype_emissions, da)?;
    let log_z = crf::log_partition(&out.entity_emissions, ta)?;
    let pad = tokens.len() - ey.len();
    let to_tags = |ys: &[usize], set: &crate::model::TagSet| -> Vec<String> {
        ys.iter()
            .map(|&i| set.tag(i).to_string())
            .chain(std::iter::repeat_n(OUTSIDE.to_string(), pad))
            .collect()
    };
    Ok(Decoded {
        entity_tags: to_tags(&ey, &model.entity_tags),
        dtype_tags: to_tags(&dy, &model.dtype_tags),
        path_probability: (escore - log_z).exp().min(1.0),
        attention: out.entity_attention,
    })
}

/// Majority data type of the dtype-head tags over `a..b`; ties go to the
/// earlier type in classification precedence, no typed tag gives `OTHER`.
pub fn span_data_type<S: AsRef<str>>(dtype_tags: &[S], a: usize, b: usize) -> DataType {
    let mut counts: HashMap<DataType, usize> = HashMap::new();
    for t in &dtype_tags[a..b] {
        let ty = t.as_ref().split_once('-').map(|(_, ty)| ty);
        if let Some(dt) = ty.and_then(|ty| ty.parse::<DataType>().ok()) {
            *counts.entry(dt).or_default() += 1;
        }
    }
    let best = counts.values().copied().max().unwrap_or(0);
    DataType::PRECEDENCE
        .into_iter()
        .find(|dt| best > 0 && counts.get(dt) == Some(&best))
        .unwrap_or(DataType::Other)
}

fn extract_sentence(
    model: &MultiTaskModel,
    index: usize,
    s: &TokenizedSentence,
    result: &mut ExtractionResult,
) -> Result<()> {
    if s.tokens.is_empty() {
        return Ok(());
    }
    let texts = s.token_texts();
    let d = decode(model, &texts)?;
    for (a, b, name) in spans_from_tags(&d.entity_tags) {
        result.entities.push(ExtractedEntity {
            name,
            value: s.span_text(a, b).to_string(),
            data_type: span_data_type(&d.dtype_tags, a, b),
            score: d.path_probability,
            sentence: index,
            token_span: (a, b),
        });
    }
    result.attention.push(SentenceAttention {
        sentence: index,
        tokens: texts.iter().take(d.attention.len()).map(|t| t.to_string()).collect(),
        weights: d.attention,
    });
    Ok(())
}

/// Clean, tokenize and tag a raw (HTML or plain) incident description.
pub fn extract(model: &MultiTaskModel, description: &str) -> Result<ExtractionResult> {
    if !model.trained {
        return Err(NnError::Untrained);
    }
    let doc = Document::new(CleanDoc::from_html("", description));
    let mut result = ExtractionResult::default();
    for (i, s) in doc.sentences.iter().enumerate() {
        extract_sentence(model, i, s, &mut result)?;
    }
    Ok(result)
}

/// Tag every sentence of `gold` with the model, keeping its tokenization.
pub fn predict_corpus(model: &MultiTaskModel, gold: &LabeledCorpus) -> Result<LabeledCorpus> {
    let mut sentences = Vec::with_capacity(gold.sentences.len());
    for s in &gold.sentences {
        let tokens: Vec<_> = s.tokens.iter().map(|t| t.token.clone()).collect();
        let (entity, dtype) = if tokens.is_empty() {
            (Vec::new(), Vec::new())
        } else {
            let d = decode(model, &s.token_texts())?;
            (d.entity_tags, d.dtype_tags)
        };
        sentences.push(LabeledSentence::from_tags(&s.incident_id, &s.text, tokens, entity, dtype)?);
    }
    Ok(LabeledCorpus {
        sentences,
        catalog: gold.catalog.clone(),
    })
}
