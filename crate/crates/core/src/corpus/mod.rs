//! Incident ingestion and cleaning: JSONL loading, HTML stripping,
//! newline sentence segmentation and camel-case/URL-aware tokenization.

mod html;
mod mapped;
mod segment;
mod tokenize;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use html::{strip_html, ExtractedTable, Stripped};
pub use mapped::MappedText;
pub use segment::segment_sentences;
pub use tokenize::{camel_case_bounds, tokenize, Token, TokenKind};

use crate::{Error, Result};

/// A raw incident report as stored in the corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Incident {
    pub id: String,
    pub title: String,
    #[serde(rename = "description")]
    pub description_html: String,
    pub created_at: DateTime<Utc>,
    pub owning_team: String,
    pub resolved: bool,
}

/// Read a JSONL corpus, one incident per line, rejecting duplicate ids.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Incident>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<Incident>> {
    let mut incidents = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let incident: Incident = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if incident.id.is_empty() {
            return Err(Error::Malformed {
                line: i + 1,
                message: "empty incident id".into(),
            });
        }
        if !seen.insert(incident.id.clone()) {
            return Err(Error::DuplicateId(incident.id));
        }
        incidents.push(incident);
    }
    Ok(incidents)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Cleaned description of one incident.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CleanDoc {
    pub incident_id: String,
    pub sentences: Vec<String>,
    pub tables: Vec<ExtractedTable>,
    /// Per sentence, per byte: the byte range of the raw description it came from.
    #[serde(skip)]
    pub source_map: Vec<Vec<(usize, usize)>>,
}

impl CleanDoc {
    pub fn from_html(incident_id: &str, html: &str) -> Self {
        let stripped = strip_html(html);
        Self {
            incident_id: incident_id.to_string(),
            sentences: stripped.sentence_texts(),
            source_map: stripped.sentences.into_iter().map(|s| s.src).collect(),
            tables: stripped.tables,
        }
    }

    /// Sentences that belong to a table (header or data row).
    pub fn table_sentences(&self) -> HashSet<usize> {
        self.tables
            .iter()
            .flat_map(|t| t.header_sentence.into_iter().chain(t.row_sentences.iter().flatten().copied()))
            .collect()
    }

    /// Range of the raw description covered by `sentence[start..end]`.
    pub fn source_range(&self, sentence: usize, start: usize, end: usize) -> Option<(usize, usize)> {
        let src = self.source_map.get(sentence)?;
        if start >= end || end > src.len() {
            return None;
        }
        Some((src[start].0, src[end - 1].1))
    }
}

pub fn clean_incident(incident: &Incident) -> CleanDoc {
    CleanDoc::from_html(&incident.id, &incident.description_html)
}

/// A sentence with its tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    pub text: String,
    pub tokens: Vec<Token>,
}

impl TokenizedSentence {
    pub fn new(text: &str) -> Self {
        Self {
            text: text.to_string(),
            tokens: tokenize(text),
        }
    }

    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Token index range exactly covering bytes `start..end`, if aligned.
    pub fn token_range(&self, start: usize, end: usize) -> Option<(usize, usize)> {
        let first = self.tokens.iter().position(|t| t.start == start)?;
        let last = self.tokens.iter().position(|t| t.end == end)?;
        (first <= last).then_some((first, last + 1))
    }

    /// Raw text spanned by tokens `a..b`.
    pub fn span_text(&self, a: usize, b: usize) -> &str {
        &self.text[self.tokens[a].start..self.tokens[b - 1].end]
    }
}

/// A cleaned and tokenized incident description.
#[derive(Debug, Clone)]
pub struct Document {
    pub clean: CleanDoc,
    pub sentences: Vec<TokenizedSentence>,
}

impl Document {
    pub fn new(clean: CleanDoc) -> Self {
        let sentences = clean.sentences.iter().map(|s| TokenizedSentence::new(s)).collect();
        Self { clean, sentences }
    }

    pub fn from_incident(incident: &Incident) -> Self {
        Self::new(clean_incident(incident))
    }

    pub fn incident_id(&self) -> &str {
        &self.clean.incident_id
    }
}
