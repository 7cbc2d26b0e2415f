//! Gaussian Naive Bayes and k-nearest-neighbours.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Result, TriageError};

pub const VARIANCE_FLOOR: f64 = 1e-9;

fn check(x: &[Vec<f64>], y: &[String]) -> Result<usize> {
    if x.is_empty() {
        return Err(TriageError::Empty("training set"));
    }
    if x.len() != y.len() {
        return Err(TriageError::Dimension(format!("{} samples, {} labels", x.len(), y.len())));
    }
    let d = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(TriageError::Dimension(format!("row of length {}, expected {d}", row.len())));
    }
    Ok(d)
}

/// Gaussian class-conditional densities per feature, priors from class frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    /// Sorted class names.
    pub classes: Vec<String>,
    pub log_prior: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub fn fit(x: &[Vec<f64>], y: &[String]) -> Result<Self> {
        let d = check(x, y)?;
        let mut groups: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
        for (row, label) in x.iter().zip(y) {
            groups.entry(label).or_default().push(row);
        }
        let n = x.len() as f64;
        let mut model = Self {
            classes: Vec::new(),
            log_prior: Vec::new(),
            mean: Vec::new(),
            var: Vec::new(),
        };
        for (class, rows) in groups {
            if rows.len() < 2 {
                log::warn!("class {class:?} has {} sample(s); variances floored", rows.len());
            }
            let m = rows.len() as f64;
            let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / m).collect();
            let var = (0..d)
                .map(|j| {
                    let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / m;
                    v.max(VARIANCE_FLOOR)
                })
                .collect();
            model.classes.push(class.to_string());
            model.log_prior.push((m / n).ln());
            model.mean.push(mean);
            model.var.push(var);
        }
        Ok(model)
    }

    pub fn log_posterior(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .zip(&self.mean[c])
                    .zip(&self.var[c])
                    .map(|((xi, mu), v)| -0.5 * (2.0 * PI * v).ln() - (xi - mu).powi(2) / (2.0 * v))
                    .sum();
                self.log_prior[c] + ll
            })
            .collect()
    }

    /// Highest log-posterior; ties go to the lexicographically smallest class.
    pub fn predict(&self, x: &[f64]) -> &str {
        let post = self.log_posterior(x);
        let mut best = 0;
        for (c, &p) in post.iter().enumerate() {
            if p > post[best] {
                best = c;
            }
        }
        &self.classes[best]
    }
}

/// Majority vote among the k nearest training points (Euclidean).
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub k: usize,
    x: Vec<Vec<f64>>,
    y: Vec<String>,
}

impl Knn {
    pub fn fit(x: &[Vec<f64>], y: &[String], k: usize) -> Result<Self> {
        check(x, y)?;
        if k == 0 {
            return Err(TriageError::Config("k must be positive".into()));
        }
        let k = if k > x.len() {
            log::warn!("k={k} exceeds the {} training samples; clamped", x.len());
            x.len()
        } else {
            k
        };
        Ok(Self {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
        })
    }

    /// Distance ties go to the lower training index; vote ties to the class
    /// of the nearest neighbour among the tied classes.
    pub fn predict(&self, q: &[f64]) -> &str {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &d[..self.k];
        let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
        for &(_, i) in nearest {
            *votes.entry(&self.y[i]).or_default() += 1;
        }
        let top = votes.values().copied().max().unwrap_or(0);
        let winner = nearest
            .iter()
            .map(|&(_, i)| self.y[i].as_str())
            .find(|c| votes[c] == top)
            .expect("k ≥ 1");
        winner
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassifierKind {
    NaiveBayes,
    Knn,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::NaiveBayes => "NAIVE_BAYES",
            ClassifierKind::Knn => "KNN",
        }
    }
}

/// Fit on `(x, y)` and predict every row of `test`.
pub fn fit_predict(kind: ClassifierKind, k: usize, x: &[Vec<f64>], y: &[String], test: &[Vec<f64>]) -> Result<Vec<String>> {
    Ok(match kind {
        ClassifierKind::NaiveBayes => {
            let m = GaussianNb::fit(x, y)?;
            test.iter().map(|q| m.predict(q).to_string()).collect()
        }
        ClassifierKind::Knn => {
            let m = Knn::fit(x, y, k)?;
            test.iter().map(|q| m.predict(q).to_string()).collect()
        }
    })
}
