//! Stratified k-fold cross-validation and the results table.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{fit_predict, ClassifierKind};
use crate::error::{Result, TriageError};
use crate::features::{Dataset, FeatureMode};

/// Fold index per sample. Each class is shuffled (seeded) and dealt
/// round-robin, continuing the deal across classes so fold sizes stay even.
pub fn stratified_folds(labels: &[String], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(TriageError::Empty("dataset"));
    }
    if folds < 2 {
        return Err(TriageError::Config("at least 2 folds are required".into()));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for (class, mut idx) in by_class {
        if idx.len() < folds {
            log::warn!("class {class:?} has {} samples for {folds} folds; stratification is partial", idx.len());
        }
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CvResult {
    pub mode: FeatureMode,
    pub classifier: ClassifierKind,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

pub fn cross_validate(
    data: &Dataset,
    mode: FeatureMode,
    classifier: ClassifierKind,
    k: usize,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    let labels: Vec<String> = data.samples.iter().map(|s| s.label.clone()).collect();
    let assignment = stratified_folds(&labels, folds, seed)?;
    let mut accs = Vec::with_capacity(folds);
    for f in 0..folds {
        let (mut x, mut y, mut tx, mut ty) = (vec![], vec![], vec![], vec![]);
        for (s, &a) in data.samples.iter().zip(&assignment) {
            if a == f {
                tx.push(s.values.clone());
                ty.push(&s.label);
            } else {
                x.push(s.values.clone());
                y.push(s.label.clone());
            }
        }
        if tx.is_empty() || x.is_empty() {
            return Err(TriageError::Config(format!("fold {f} is empty; too few samples for {folds} folds")));
        }
        let pred = fit_predict(classifier, k, &x, &y, &tx)?;
        let hits = pred.iter().zip(&ty).filter(|(p, t)| p == *t).count();
        accs.push(hits as f64 / ty.len() as f64);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    Ok(CvResult {
        mode,
        classifier,
        fold_accuracies: accs,
        mean_accuracy: mean,
    })
}

/// `featureMode,classifier,meanAccuracy,fold1…` rows (accuracies in percent),
/// followed by Δ% rows relative to the `TITLE_DESCRIPTION` baseline of the
/// same classifier.
pub fn results_csv(results: &[CvResult]) -> String {
    let folds = results.iter().map(|r| r.fold_accuracies.len()).max().unwrap_or(0);
    let mut out = String::from("featureMode,classifier,meanAccuracy");
    for i in 1..=folds {
        let _ = write!(out, ",fold{i}");
    }
    out.push('\n');
    for r in results {
        let _ = write!(out, "{},{},{:.2}", r.mode, r.classifier.as_str(), 100.0 * r.mean_accuracy);
        for a in &r.fold_accuracies {
            let _ = write!(out, ",{:.2}", 100.0 * a);
        }
        out.push('\n');
    }
    for r in results.iter().filter(|r| r.mode != FeatureMode::TitleDescription) {
        let base = results
            .iter()
            .find(|b| b.mode == FeatureMode::TitleDescription && b.classifier == r.classifier);
        if let Some(b) = base.filter(|b| b.mean_accuracy > 0.0) {
            let delta = 100.0 * (r.mean_accuracy - b.mean_accuracy) / b.mean_accuracy;
            let _ = writeln!(out, "delta%:{},{},{:+.2}", r.mode, r.classifier.as_str(), delta);
        }
    }
    out
}
