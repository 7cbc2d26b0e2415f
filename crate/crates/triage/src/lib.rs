//! Team triage on top of extracted entities: feature construction,
//! Gaussian Naive Bayes, k-NN and stratified cross-validation.

pub mod classify;
pub mod cv;
pub mod error;
pub mod features;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use classify::{ClassifierKind, GaussianNb, Knn};
pub use cv::{cross_validate, results_csv, stratified_folds, CvResult};
pub use error::{Result, TriageError};
pub use features::{build_features, Dataset, FeatureMode, FeatureSpace, FeatureVector, TriageRecord, WordEmbeddings};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    /// Keep only the most common teams.
    pub top_teams: usize,
    /// Fraction of resolved incidents to sample.
    pub resolved_fraction: f64,
    pub seed: u64,
}

impl Default for Selection {
    fn default() -> Self {
        Self {
            top_teams: 10,
            resolved_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Seeded sample of resolved incidents restricted to the most common teams
/// (team count ties broken by name). Input order is preserved.
pub fn select_records(records: Vec<TriageRecord>, sel: &Selection) -> Result<Vec<TriageRecord>> {
    if !(0.0..=1.0).contains(&sel.resolved_fraction) {
        return Err(TriageError::Config(format!("resolved fraction {} outside [0,1]", sel.resolved_fraction)));
    }
    let mut resolved: Vec<usize> = (0..records.len()).filter(|&i| records[i].incident.resolved).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sel.seed);
    resolved.shuffle(&mut rng);
    let n = (resolved.len() as f64 * sel.resolved_fraction).round() as usize;
    resolved.truncate(n);
    resolved.sort_unstable();

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in &resolved {
        *counts.entry(records[i].incident.owning_team.as_str()).or_default() += 1;
    }
    let mut teams: Vec<(&str, usize)> = counts.into_iter().collect();
    teams.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let keep: std::collections::HashSet<String> = teams.iter().take(sel.top_teams).map(|(t, _)| t.to_string()).collect();
    let picked: std::collections::HashSet<usize> = resolved
        .into_iter()
        .filter(|&i| keep.contains(&records[i].incident.owning_team))
        .collect();
    Ok(records
        .into_iter()
        .enumerate()
        .filter(|(i, _)| picked.contains(i))
        .map(|(_, r)| r)
        .collect())
}

/// Cross-validate every (mode, classifier) pair.
pub fn evaluate_all(
    records: &[TriageRecord],
    embeddings: &WordEmbeddings,
    top_v: usize,
    k: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<CvResult>> {
    if records.is_empty() {
        return Err(TriageError::Empty("dataset"));
    }
    let space = FeatureSpace::fit(records, top_v);
    let mut out = Vec::new();
    for mode in FeatureMode::ALL {
        let data = Dataset::build(records, embeddings, mode, &space);
        for clf in [ClassifierKind::NaiveBayes, ClassifierKind::Knn] {
            let r = cross_validate(&data, mode, clf, k, folds, seed)?;
            log::info!("{mode} {}: {:.2}%", clf.as_str(), 100.0 * r.mean_accuracy);
            out.push(r);
        }
    }
    Ok(out)
}
