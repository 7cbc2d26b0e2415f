use std::collections::HashSet;

use softner_core::bootstrap::{bootstrap, extract_candidates, BootstrapConfig};
use softner_core::corpus::Document;
use softner_core::eval::{ner_metrics, precision_at_rank};
use softner_core::propagation::{build_value_index, is_valid_bio, propagate, propagate_labels};
use softner_core::synth::{align_gold, generate, gold_corpus, MentionKind, SynthConfig};

fn docs_for(cfg: &SynthConfig) -> (Vec<Document>, Vec<softner_core::synth::GoldRecord>) {
    let (inc, gold) = generate(cfg).unwrap();
    (inc.iter().map(Document::from_incident).collect(), gold)
}

#[test]
fn catalog_recovers_planted_types() {
    let cfg = SynthConfig::new(11, 400).without(&["exception message"]);
    let (docs, _) = docs_for(&cfg);
    let (catalog, _) = bootstrap(&docs, &BootstrapConfig::default());
    let names: HashSet<&str> = catalog.names().collect();
    for t in cfg.truth_names() {
        assert!(names.contains(t.as_str()), "missing {t}; catalog {:?}", catalog.names().collect::<Vec<_>>());
    }
    for e in &catalog.entries {
        if let Some(spec) = cfg.schema.iter().find(|s| s.type_name() == e.name) {
            assert_eq!(e.data_type, Some(spec.data_type), "{}", e.name);
        }
    }
}

#[test]
fn structure_only_corpus_is_fully_pattern_recoverable() {
    let mut cfg = SynthConfig::new(5, 150);
    cfg.inline_rate = 0.0;
    let (docs, gold) = docs_for(&cfg);
    for (doc, g) in docs.iter().zip(&gold) {
        let ranges: HashSet<(usize, usize)> = extract_candidates(doc, &BootstrapConfig::default())
            .iter()
            .filter_map(|p| {
                let s = &doc.sentences[p.sentence];
                let (a, b) = p.value_span;
                doc.clean.source_range(p.sentence, s.tokens[a].start, s.tokens[b - 1].end)
            })
            .collect();
        for span in &g.spans {
            assert!(ranges.contains(&(span.start, span.end)), "{}: {:?} not extracted", g.incident_id, span.value);
        }
    }
}

#[test]
fn inline_rate_is_respected() {
    let cfg = SynthConfig::new(9, 1000);
    let (_, gold) = generate(&cfg).unwrap();
    let spans: Vec<_> = gold.iter().flat_map(|g| &g.spans).collect();
    let inline = spans.iter().filter(|s| s.kind == MentionKind::Inline).count();
    let rate = inline as f64 / spans.len() as f64;
    assert!((rate - 0.3).abs() <= 0.05, "inline rate {rate}");
}

#[test]
fn propagated_labels_track_gold() {
    let cfg = SynthConfig::new(3, 300).without(&["exception message"]);
    let (docs, gold) = docs_for(&cfg);
    let (catalog, pairs) = bootstrap(&docs, &BootstrapConfig::default());
    let index = build_value_index(&pairs, &catalog);
    let labeled = propagate_labels(&docs, &index, &pairs, &catalog);
    for s in &labeled.sentences {
        assert!(is_valid_bio(&s.entity_tags()));
    }
    assert_eq!(propagate(&labeled, &index).span_count(), labeled.span_count());

    let gold_c = gold_corpus(&docs, &gold, &cfg.gold_catalog());
    let m = ner_metrics(&labeled, &gold_c).unwrap();
    eprintln!("weak labels vs gold: weighted F1 {:.3}", m.weighted_f1);
    assert!(m.weighted_f1 > 0.8, "{m:#?}");

    let (aligned, _) = align_gold(&docs, &gold);
    assert_eq!(aligned.len(), labeled.sentences.len());
}

#[test]
fn rank_curve_on_planted_schema() {
    let schema = softner_core::synth::planted_schema(40, 21);
    let mut cfg = SynthConfig::with_schema(21, 600, schema, 10);
    cfg.spurious_colon_rate = 0.2;
    let (docs, _) = docs_for(&cfg);
    let (catalog, _) = bootstrap(&docs, &BootstrapConfig::default());
    let curve = precision_at_rank(&catalog, &cfg.truth_names()).unwrap();
    eprintln!(
        "catalog {} entries, p@10 {:?} p@40 {:?} p@50 {:?}",
        catalog.len(),
        curve.at(10),
        curve.at(40),
        curve.at(50)
    );
    assert!(curve.points.iter().all(|p| (0.0..=1.0).contains(&p.1)));
}

#[test]
fn noiseless_catalog_is_exactly_the_planted_types() {
    let schema = softner_core::synth::planted_schema(12, 4);
    let mut cfg = SynthConfig::with_schema(4, 300, schema, 5);
    cfg.spurious_colon_rate = 0.0;
    cfg.typo_rate = 0.0;
    let (docs, _) = docs_for(&cfg);
    let (catalog, _) = bootstrap(&docs, &BootstrapConfig::default());
    let curve = precision_at_rank(&catalog, &cfg.truth_names()).unwrap();
    assert!(curve.points.iter().all(|p| p.1 == 1.0), "{:?}", catalog.names().collect::<Vec<_>>());
}

#[test]
fn catalog_is_order_independent() {
    let cfg = SynthConfig::new(8, 120);
    let (mut docs, _) = docs_for(&cfg);
    let (a, _) = bootstrap(&docs, &BootstrapConfig::default());
    docs.reverse();
    docs.rotate_left(17);
    let (b, _) = bootstrap(&docs, &BootstrapConfig::default());
    assert_eq!(a, b);
    for w in a.entries.windows(2) {
        assert!(w[0].frequency >= w[1].frequency);
    }
}
