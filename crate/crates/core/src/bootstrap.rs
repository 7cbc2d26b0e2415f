//! Unsupervised seed labels: key-value and table pattern extractors, name
//! filtering, and n-gram mining of the entity-type catalog.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Document, ExtractedTable, TokenKind, TokenizedSentence};
use crate::typing::{classify_value, resolve_entity_dtype, DataType};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PairSource {
    KeyValue,
    Table,
}

/// An extracted (name, value) pair and where its value sits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidatePair {
    pub incident_id: String,
    pub name: String,
    pub value: String,
    pub source: PairSource,
    /// Sentence holding the value (the row sentence for table pairs).
    pub sentence: usize,
    pub table: Option<usize>,
    /// Token range of the value inside `sentence`.
    pub value_span: (usize, usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BootstrapConfig {
    pub separators: Vec<char>,
    pub max_name_tokens: usize,
    pub top_k: usize,
    /// n-grams seen in fewer candidates than this never enter the catalog.
    pub min_support: usize,
    /// Only n-grams that are the complete name of at least one candidate
    /// enter the catalog; shared heads such as "id" stay out.
    pub require_attested: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            separators: vec![':'],
            max_name_tokens: 6,
            top_k: 100,
            min_support: 2,
            require_attested: true,
        }
    }
}

/// One mined entity type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntityType {
    pub name: String,
    pub frequency: usize,
    pub data_type: Option<DataType>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EntityCatalog {
    pub entries: Vec<EntityType>,
    pub capacity: usize,
}

impl EntityCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&EntityType> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("catalog serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let entries: Vec<EntityType> = serde_json::from_str(json).map_err(|e| Error::Malformed {
            line: e.line(),
            message: e.to_string(),
        })?;
        Ok(Self {
            capacity: entries.len(),
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Split a tokenized sentence at its first separator token.
fn split_key_value(
    sentence: &TokenizedSentence,
    config: &BootstrapConfig,
) -> Option<(String, String, (usize, usize))> {
    let toks = &sentence.tokens;
    let sep = toks.iter().position(|t| {
        t.kind == TokenKind::Punct && t.text.chars().next().is_some_and(|c| config.separators.contains(&c))
    })?;
    if sep == 0 || sep + 1 >= toks.len() || sep > config.max_name_tokens {
        return None;
    }
    let name = toks[..sep]
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let value = sentence.span_text(sep + 1, toks.len()).to_string();
    Some((name, value, (sep + 1, toks.len())))
}

/// Key-value pairs of a single sentence, split on the first ':' that is
/// not part of a URL.
pub fn extract_key_value(sentence: &str) -> Vec<CandidatePair> {
    let s = TokenizedSentence::new(sentence);
    key_value_pairs("", 0, &s, &BootstrapConfig::default())
}

fn key_value_pairs(
    incident_id: &str,
    index: usize,
    sentence: &TokenizedSentence,
    config: &BootstrapConfig,
) -> Vec<CandidatePair> {
    split_key_value(sentence, config)
        .map(|(name, value, value_span)| CandidatePair {
            incident_id: incident_id.to_string(),
            name,
            value,
            source: PairSource::KeyValue,
            sentence: index,
            table: None,
            value_span,
        })
        .into_iter()
        .collect()
}

fn normalize_name(raw: &str) -> String {
    tokenize(raw)
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// (header, cell) pairs of a table; empty cells and empty headers are skipped.
pub fn extract_table_pairs(table: &ExtractedTable) -> Vec<CandidatePair> {
    let mut pairs = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        // Row sentences are the non-empty cells joined by single spaces.
        let mut line = String::new();
        let mut spans = Vec::with_capacity(row.len());
        for cell in row {
            if cell.is_empty() {
                spans.push(None);
                continue;
            }
            if !line.is_empty() {
                line.push(' ');
            }
            let start = line.len();
            line.push_str(cell);
            spans.push(Some((start, line.len())));
        }
        let sentence = TokenizedSentence::new(&line);
        for (col, header) in table.headers.iter().enumerate() {
            let (Some(cell), Some(Some((a, b)))) = (row.get(col), spans.get(col)) else {
                continue;
            };
            let name = normalize_name(header);
            if name.is_empty() || cell.trim().is_empty() {
                continue;
            }
            let Some(value_span) = sentence.token_range(*a, *b) else {
                continue;
            };
            pairs.push(CandidatePair {
                incident_id: String::new(),
                name,
                value: cell.trim().to_string(),
                source: PairSource::Table,
                sentence: table.row_sentences.get(r).copied().flatten().unwrap_or(0),
                table: None,
                value_span,
            });
        }
    }
    pairs
}

/// All raw candidates of one document: key-value pairs from text sentences
/// and header/cell pairs from kept tables.
pub fn extract_candidates(doc: &Document, config: &BootstrapConfig) -> Vec<CandidatePair> {
    let table_rows = doc.clean.table_sentences();
    let mut pairs = Vec::new();
    for (i, s) in doc.sentences.iter().enumerate() {
        if !table_rows.contains(&i) {
            pairs.extend(key_value_pairs(doc.incident_id(), i, s, config));
        }
    }
    for (t, table) in doc.clean.tables.iter().enumerate() {
        for mut p in extract_table_pairs(table) {
            p.incident_id = doc.incident_id().to_string();
            p.table = Some(t);
            pairs.push(p);
        }
    }
    pairs
}

/// Keep pairs whose name is letters and spaces only; lower-case the survivors.
pub fn filter_candidates(pairs: Vec<CandidatePair>) -> Vec<CandidatePair> {
    pairs
        .into_iter()
        .filter(|p| {
            !p.value.trim().is_empty()
                && p.name.chars().any(|c| c.is_ascii_alphabetic())
                && p.name.chars().all(|c| c.is_ascii_alphabetic() || c == ' ')
        })
        .map(|mut p| {
            p.name = p
                .name
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .to_ascii_lowercase();
            p
        })
        .collect()
}

fn name_ngrams(name: &str) -> HashSet<String> {
    let words: Vec<&str> = name.split(' ').filter(|w| !w.is_empty()).collect();
    let mut grams = HashSet::new();
    for n in 1..=3 {
        for w in words.windows(n) {
            grams.insert(w.join(" "));
        }
    }
    grams
}

fn word_count(s: &str) -> usize {
    s.split(' ').count()
}

/// Mine the top-K entity types from filtered candidates and rewrite every
/// candidate name to its best catalog match. Candidates without any
/// catalog n-gram are dropped.
pub fn mine_entity_types(
    pairs: &[CandidatePair],
    config: &BootstrapConfig,
) -> (EntityCatalog, Vec<CandidatePair>) {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for p in pairs {
        for g in name_ngrams(&p.name) {
            *counts.entry(g).or_default() += 1;
        }
    }

    let attested: HashSet<&str> = pairs.iter().map(|p| p.name.as_str()).collect();

    let mut ranked: Vec<(&str, usize)> = counts
        .iter()
        .filter(|(g, &c)| {
            c >= config.min_support.max(1) && (!config.require_attested || attested.contains(g.as_str()))
        })
        .map(|(g, &c)| (g.as_str(), c))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(word_count(b.0).cmp(&word_count(a.0)))
            .then(a.0.cmp(b.0))
    });
    ranked.truncate(config.top_k);

    let mut catalog = EntityCatalog {
        entries: ranked
            .iter()
            .map(|&(g, c)| EntityType {
                name: g.to_string(),
                frequency: c,
                data_type: None,
            })
            .collect(),
        capacity: config.top_k,
    };

    let rewritten = rewrite_candidates(pairs, &catalog);
    assign_data_types(&mut catalog, pairs, &rewritten);
    (catalog, rewritten)
}

/// Rewrite candidate names against an existing catalog.
///
/// Among the catalog n-grams contained in a name, prefer the one most often
/// seen as a complete candidate name, then higher frequency, then more
/// words, then lexicographic order.
pub fn rewrite_candidates(pairs: &[CandidatePair], catalog: &EntityCatalog) -> Vec<CandidatePair> {
    let mut exact: HashMap<&str, usize> = HashMap::new();
    for p in pairs {
        *exact.entry(p.name.as_str()).or_default() += 1;
    }
    let freq: HashMap<&str, usize> = catalog
        .entries
        .iter()
        .map(|e| (e.name.as_str(), e.frequency))
        .collect();

    pairs
        .iter()
        .filter_map(|p| {
            let best = name_ngrams(&p.name)
                .into_iter()
                .filter_map(|g| freq.get(g.as_str()).map(|&f| (g, f)))
                .max_by(|(ga, fa), (gb, fb)| {
                    let ea = exact.get(ga.as_str()).copied().unwrap_or(0);
                    let eb = exact.get(gb.as_str()).copied().unwrap_or(0);
                    ea.cmp(&eb)
                        .then(fa.cmp(fb))
                        .then(word_count(ga).cmp(&word_count(gb)))
                        .then(gb.cmp(ga))
                })?;
            let mut out = p.clone();
            out.name = best.0;
            Some(out)
        })
        .collect()
}

/// Resolve each entry's data type from the values rewritten to it, or, for
/// entries nothing was rewritten to, from every candidate containing it.
pub fn assign_data_types(
    catalog: &mut EntityCatalog,
    filtered: &[CandidatePair],
    rewritten: &[CandidatePair],
) {
    let mut direct: BTreeMap<&str, Vec<DataType>> = BTreeMap::new();
    for p in rewritten {
        if let Ok(d) = classify_value(&p.value) {
            direct.entry(p.name.as_str()).or_default().push(d);
        }
    }
    for entry in &mut catalog.entries {
        let instances = match direct.get(entry.name.as_str()) {
            Some(v) => v.clone(),
            None => filtered
                .iter()
                .filter(|p| name_ngrams(&p.name).contains(&entry.name))
                .filter_map(|p| classify_value(&p.value).ok())
                .collect(),
        };
        entry.data_type = resolve_entity_dtype(&instances).ok();
    }
}

/// Full bootstrap over a set of documents.
pub fn bootstrap(docs: &[Document], config: &BootstrapConfig) -> (EntityCatalog, Vec<CandidatePair>) {
    let raw: Vec<CandidatePair> = docs.iter().flat_map(|d| extract_candidates(d, config)).collect();
    mine_entity_types(&filter_candidates(raw), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CleanDoc;

    fn pair(name: &str, value: &str) -> CandidatePair {
        CandidatePair {
            incident_id: "i".into(),
            name: name.into(),
            value: value.into(),
            source: PairSource::KeyValue,
            sentence: 0,
            table: None,
            value_span: (0, 1),
        }
    }

    fn nv(p: &[CandidatePair]) -> Vec<(String, String)> {
        p.iter().map(|p| (p.name.clone(), p.value.clone())).collect()
    }

    #[test]
    fn key_value_examples() {
        assert_eq!(nv(&extract_key_value("Status code: 401")), vec![("Status code".into(), "401".into())]);
        assert_eq!(
            nv(&extract_key_value("Problem type: VM not found")),
            vec![("Problem type".into(), "VM not found".into())]
        );
        assert!(extract_key_value("see https://a.b/c?x=1").is_empty());
        let p = &extract_key_value("Status code: 401")[0];
        assert_eq!(p.value_span, (3, 4));
    }

    #[test]
    fn key_value_edge_cases() {
        assert!(extract_key_value(": 401").is_empty());
        assert!(extract_key_value("Status code:").is_empty());
        assert!(extract_key_value("one two three four five six seven: x").is_empty());
        assert_eq!(extract_key_value("one two three four five six: x").len(), 1);
        // first colon wins, URL colons are inside the value
        assert_eq!(
            nv(&extract_key_value("Link: https://x.y/z")),
            vec![("Link".into(), "https://x.y/z".into())]
        );
        assert_eq!(
            nv(&extract_key_value("SubscriptionId : 2aa3")),
            vec![("Subscription Id".into(), "2aa3".into())]
        );
    }

    #[test]
    fn table_pairs() {
        let t = ExtractedTable {
            headers: vec!["Tenant Id".into()],
            rows: vec![vec!["4536dcd6-e2e1-3465-a22b-d25f62456233".into()]],
            header_sentence: Some(0),
            row_sentences: vec![Some(1)],
            cell_spans: vec![],
        };
        let p = extract_table_pairs(&t);
        assert_eq!(nv(&p), vec![("Tenant Id".into(), "4536dcd6-e2e1-3465-a22b-d25f62456233".into())]);
        assert_eq!(p[0].sentence, 1);
        assert_eq!(p[0].value_span, (0, 1));

        let t = ExtractedTable {
            headers: vec!["A".into(), "B".into()],
            rows: vec![vec!["1".into(), "".into()]],
            header_sentence: None,
            row_sentences: vec![None],
            cell_spans: vec![],
        };
        assert_eq!(nv(&extract_table_pairs(&t)), vec![("A".into(), "1".into())]);

        let t = ExtractedTable {
            headers: vec![],
            rows: vec![vec!["1".into()]],
            header_sentence: None,
            row_sentences: vec![],
            cell_spans: vec![],
        };
        assert!(extract_table_pairs(&t).is_empty());
    }

    #[test]
    fn filter_examples() {
        let out = filter_candidates(vec![
            pair("Status code 2", "401"),
            pair("Source IP", "198.168.0.1"),
            pair("VM-Name", "x"),
        ]);
        assert_eq!(nv(&out), vec![("source ip".into(), "198.168.0.1".into())]);
    }

    #[test]
    fn rewrite_to_frequent_bigram() {
        let mut pairs: Vec<CandidatePair> = (0..5).map(|i| pair("subscription id", &format!("{i}"))).collect();
        pairs.push(pair("my subscription id is", "6572"));
        let (catalog, rewritten) = mine_entity_types(&pairs, &BootstrapConfig::default());
        assert!(catalog.get("subscription id").is_some());
        assert_eq!(rewritten.last().unwrap().name, "subscription id");
        assert_eq!(rewritten.last().unwrap().value, "6572");
    }

    #[test]
    fn top_one_prefers_longer_ngram_on_tie() {
        let cfg = BootstrapConfig {
            top_k: 1,
            require_attested: false,
            ..Default::default()
        };
        let pairs = vec![pair("status code", "1"), pair("status code", "2")];
        let (catalog, rewritten) = mine_entity_types(&pairs, &cfg);
        assert_eq!(catalog.names().collect::<Vec<_>>(), vec!["status code"]);
        assert_eq!(catalog.entries[0].frequency, 2);
        assert_eq!(catalog.entries[0].data_type, Some(DataType::Numeric));
        assert_eq!(rewritten.len(), 2);
    }

    #[test]
    fn unmatched_candidates_dropped() {
        let mut pairs: Vec<CandidatePair> = (0..3).map(|_| pair("status code", "500")).collect();
        pairs.push(pair("lonely thing", "x"));
        let (_, rewritten) = mine_entity_types(&pairs, &BootstrapConfig::default());
        assert_eq!(rewritten.len(), 3);
        assert!(rewritten.iter().all(|p| p.name == "status code"));
    }

    #[test]
    fn shared_head_words_do_not_merge_types() {
        let mut pairs = Vec::new();
        for i in 0..4 {
            pairs.push(pair("source ip", &format!("10.0.0.{i}")));
            pairs.push(pair("destination ip", &format!("10.0.1.{i}")));
        }
        let cfg = BootstrapConfig {
            require_attested: false,
            ..Default::default()
        };
        let (catalog, rewritten) = mine_entity_types(&pairs, &cfg);
        assert!(catalog.get("ip").is_some());
        let names: HashSet<&str> = rewritten.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, HashSet::from(["source ip", "destination ip"]));
    }

    #[test]
    fn unattested_heads_stay_out() {
        let mut pairs = Vec::new();
        for i in 0..4 {
            pairs.push(pair("tenant id", &format!("t{i}")));
            pairs.push(pair("vnet id", &format!("v{i}")));
        }
        let (catalog, _) = mine_entity_types(&pairs, &BootstrapConfig::default());
        assert_eq!(catalog.names().collect::<Vec<_>>(), vec!["tenant id", "vnet id"]);
    }

    #[test]
    fn empty_input() {
        let (catalog, rewritten) = mine_entity_types(&[], &BootstrapConfig::default());
        assert!(catalog.is_empty());
        assert!(rewritten.is_empty());
    }

    #[test]
    fn document_candidates_cover_text_and_tables() {
        let html = "<p>Status code: 500</p><table><tr><th>Tenant Id</th></tr>\
                    <tr><td>4536dcd6-e2e1-3465-a22b-d25f62456233</td></tr></table>";
        let doc = Document::new(CleanDoc::from_html("X", html));
        let pairs = extract_candidates(&doc, &BootstrapConfig::default());
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].source, PairSource::Table);
        assert_eq!(pairs[1].incident_id, "X");
        let s = &doc.sentences[pairs[1].sentence];
        assert_eq!(s.span_text(pairs[1].value_span.0, pairs[1].value_span.1), pairs[1].value);
    }

    #[test]
    fn catalog_json_round_trip() {
        let pairs: Vec<CandidatePair> = (0..3).map(|_| pair("status code", "500")).collect();
        let (catalog, _) = mine_entity_types(&pairs, &BootstrapConfig::default());
        let json = catalog.to_json();
        assert!(json.contains("\"dataType\": \"NUMERIC\""));
        assert_eq!(EntityCatalog::from_json(&json).unwrap().entries, catalog.entries);
    }
}
