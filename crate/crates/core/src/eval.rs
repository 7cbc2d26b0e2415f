//! Span-exact NER metrics and precision-vs-rank of the mined catalog.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bootstrap::EntityCatalog;
use crate::propagation::{spans_from_tags, LabeledCorpus};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TypeMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntityMetrics {
    pub per_type: BTreeMap<String, TypeMetrics>,
    pub macro_avg: Prf,
    pub micro_avg: Prf,
    pub weighted_f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub type Span = (usize, usize, String);

/// Span-exact metrics over aligned per-sentence span lists.
pub fn span_metrics(predicted: &[Vec<Span>], gold: &[Vec<Span>]) -> Result<EntityMetrics> {
    if predicted.len() != gold.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted sentences vs {} gold",
            predicted.len(),
            gold.len()
        )));
    }
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (p, g) in predicted.iter().zip(gold) {
        let ps: HashSet<&Span> = p.iter().collect();
        let gs: HashSet<&Span> = g.iter().collect();
        for s in &ps {
            let e = counts.entry(s.2.clone()).or_default();
            if gs.contains(s) {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        for s in gs.difference(&ps) {
            counts.entry(s.2.clone()).or_default().2 += 1;
        }
    }

    let mut per_type = BTreeMap::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for (ty, (tp, fp, fn_)) in counts {
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        per_type.insert(
            ty,
            TypeMetrics {
                precision,
                recall,
                f1: f1(precision, recall),
                support: tp + fn_,
                tp,
                fp,
                fn_,
            },
        );
    }

    let supported: Vec<&TypeMetrics> = per_type.values().filter(|m| m.support > 0).collect();
    let n = supported.len().max(1) as f64;
    let macro_avg = Prf {
        precision: supported.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: supported.iter().map(|m| m.recall).sum::<f64>() / n,
        f1: supported.iter().map(|m| m.f1).sum::<f64>() / n,
    };
    let total: usize = supported.iter().map(|m| m.support).sum();
    let weighted_f1 = if total == 0 {
        0.0
    } else {
        supported.iter().map(|m| m.f1 * m.support as f64).sum::<f64>() / total as f64
    };
    let mp = ratio(tp_all, tp_all + fp_all);
    let mr = ratio(tp_all, tp_all + fn_all);
    Ok(EntityMetrics {
        per_type,
        macro_avg,
        micro_avg: Prf {
            precision: mp,
            recall: mr,
            f1: f1(mp, mr),
        },
        weighted_f1,
    })
}

fn corpus_spans(c: &LabeledCorpus, dtype: bool) -> Vec<Vec<Span>> {
    c.sentences
        .iter()
        .map(|s| {
            if dtype {
                spans_from_tags(&s.dtype_tags())
            } else {
                spans_from_tags(&s.entity_tags())
            }
        })
        .collect()
}

fn check_aligned(predicted: &LabeledCorpus, gold: &LabeledCorpus) -> Result<()> {
    if predicted.sentences.len() != gold.sentences.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted sentences vs {} gold",
            predicted.sentences.len(),
            gold.sentences.len()
        )));
    }
    for (i, (p, g)) in predicted.sentences.iter().zip(&gold.sentences).enumerate() {
        if p.tokens.len() != g.tokens.len() {
            return Err(Error::ShapeMismatch(format!(
                "sentence {i}: {} vs {} tokens",
                p.tokens.len(),
                g.tokens.len()
            )));
        }
    }
    Ok(())
}

/// Span-exact entity-type metrics.
pub fn ner_metrics(predicted: &LabeledCorpus, gold: &LabeledCorpus) -> Result<EntityMetrics> {
    check_aligned(predicted, gold)?;
    span_metrics(&corpus_spans(predicted, false), &corpus_spans(gold, false))
}

/// Span-exact metrics over the data-type tags.
pub fn dtype_metrics(predicted: &LabeledCorpus, gold: &LabeledCorpus) -> Result<EntityMetrics> {
    check_aligned(predicted, gold)?;
    span_metrics(&corpus_spans(predicted, true), &corpus_spans(gold, true))
}

/// Token-level accuracy over entity tags, excluding tokens that are `O` in both.
pub fn token_accuracy(predicted: &LabeledCorpus, gold: &LabeledCorpus) -> Result<f64> {
    check_aligned(predicted, gold)?;
    let (mut hit, mut n) = (0usize, 0usize);
    for (p, g) in predicted.sentences.iter().zip(&gold.sentences) {
        for (a, b) in p.tokens.iter().zip(&g.tokens) {
            if a.entity_tag == "O" && b.entity_tag == "O" {
                continue;
            }
            n += 1;
            hit += usize::from(a.entity_tag == b.entity_tag);
        }
    }
    Ok(if n == 0 { 1.0 } else { hit as f64 / n as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCurve {
    /// `(n, precision@n)` for n = 1..=N.
    pub points: Vec<(usize, f64)>,
}

impl RankCurve {
    pub fn at(&self, n: usize) -> Option<f64> {
        self.points.get(n.checked_sub(1)?).map(|p| p.1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,precision\n");
        for (n, p) in &self.points {
            let _ = writeln!(out, "{n},{p}");
        }
        out
    }
}

/// precision@n = |top-n ∩ truth| / n over the catalog order.
pub fn precision_at_rank(catalog: &EntityCatalog, truth: &HashSet<String>) -> Result<RankCurve> {
    if catalog.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    let mut hits = 0;
    let points = catalog
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            hits += usize::from(truth.contains(&e.name));
            (i + 1, hits as f64 / (i + 1) as f64)
        })
        .collect();
    Ok(RankCurve { points })
}
