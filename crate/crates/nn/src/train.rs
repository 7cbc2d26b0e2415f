//! Training loop for the multi-task tagger.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use softner_core::propagation::{LabeledCorpus, LabeledSentence};

use crate::error::{NnError, Result};
use crate::graph::{Graph, NodeId};
use crate::model::{ModelConfig, MultiTaskModel};
use crate::params::{Gradients, Optimizer, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TrainingConfig {
    /// Weight of the entity-type loss.
    pub alpha: f64,
    /// Weight of the data-type loss.
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub max_seq_len: usize,
    pub clip_norm: f64,
    pub optimizer: OptimizerKind,
    /// Sentences per update (gradient accumulation).
    pub batch_size: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub min_count: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            learning_rate: 1e-3,
            epochs: 30,
            seed: 0,
            max_seq_len: 300,
            clip_norm: 5.0,
            optimizer: OptimizerKind::Adam,
            batch_size: 8,
            embed_dim: 100,
            hidden: 200,
            min_count: 2,
        }
    }
}

impl TrainingConfig {
    /// `alpha` may be 0 only for isolation experiments; it must not be negative.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NnError::Config(m.to_string()));
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || self.alpha + self.beta == 0.0 {
            return bad("loss weights must be non-negative and not both zero");
        }
        if self.max_seq_len == 0 || self.batch_size == 0 {
            return bad("max_seq_len and batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return bad("learning rate and clip norm must be positive");
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            max_seq_len: self.max_seq_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainReport {
    /// Mean combined loss per sentence, per epoch (measured during the epoch).
    pub epoch_losses: Vec<f64>,
    pub updates: usize,
    pub sentences: usize,
}

/// One training example with tag indices for both tasks.
#[derive(Debug, Clone)]
pub struct Example {
    pub ids: Vec<usize>,
    pub entity: Vec<usize>,
    pub dtype: Vec<usize>,
}

impl Example {
    pub fn from_sentence(model: &MultiTaskModel, s: &LabeledSentence) -> Result<Option<Self>> {
        if s.tokens.is_empty() {
            return Ok(None);
        }
        let ids = model.token_ids(&s.token_texts())?;
        let tag = |set: &crate::model::TagSet, t: &str| {
            set.index(t)
                .ok_or_else(|| NnError::Config(format!("tag {t:?} not in the model's dictionary")))
        };
        let n = ids.len();
        let entity = s.tokens[..n]
            .iter()
            .map(|t| tag(&model.entity_tags, &t.entity_tag))
            .collect::<Result<Vec<_>>>()?;
        let dtype = s.tokens[..n]
            .iter()
            .map(|t| tag(&model.dtype_tags, &t.dtype_tag))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(Self { ids, entity, dtype }))
    }
}

/// Add `α·l1 + β·l2` to the graph; a zero-weighted term is left out so its
/// head receives no gradient at all.
pub fn combined_loss(model: &MultiTaskModel, g: &mut Graph<'_>, ex: &Example, alpha: f64, beta: f64) -> Result<NodeId> {
    let n = model.forward_graph(g, &ex.ids)?;
    let mut terms = Vec::new();
    if alpha != 0.0 {
        let l1 = g.crf_nll(n.entity.emissions, n.entity.transitions, &ex.entity)?;
        terms.push(g.scale(l1, alpha));
    }
    if beta != 0.0 {
        let l2 = g.crf_nll(n.dtype.emissions, n.dtype.transitions, &ex.dtype)?;
        terms.push(g.scale(l2, beta));
    }
    let mut loss = *terms.first().ok_or_else(|| NnError::Config("both loss weights are zero".into()))?;
    for &t in &terms[1..] {
        loss = g.add(loss, t)?;
    }
    Ok(loss)
}

/// Loss value and gradients for one example.
pub fn example_gradients(model: &MultiTaskModel, ex: &Example, alpha: f64, beta: f64) -> Result<(f64, Gradients)> {
    let mut g = Graph::new(&model.params);
    let loss = combined_loss(model, &mut g, ex, alpha, beta)?;
    let value = g.value(loss).data()[0];
    Ok((value, g.backward(loss)?))
}

pub fn examples(model: &MultiTaskModel, corpus: &LabeledCorpus) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for s in &corpus.sentences {
        if let Some(ex) = Example::from_sentence(model, s)? {
            out.push(ex);
        }
    }
    Ok(out)
}

/// Mean combined loss per sentence, without updating anything.
pub fn corpus_loss(model: &MultiTaskModel, corpus: &LabeledCorpus, alpha: f64, beta: f64) -> Result<f64> {
    let exs = examples(model, corpus)?;
    if exs.is_empty() {
        return Err(NnError::EmptyInput("corpus"));
    }
    let mut total = 0.0;
    for ex in &exs {
        let mut g = Graph::new(&model.params);
        let l = combined_loss(model, &mut g, ex, alpha, beta)?;
        total += g.value(l).data()[0];
    }
    Ok(total / exs.len() as f64)
}

/// Build a model sized for `corpus` and train it.
pub fn train(corpus: &LabeledCorpus, config: &TrainingConfig) -> Result<(MultiTaskModel, TrainReport)> {
    config.validate()?;
    let mut model = MultiTaskModel::for_corpus(corpus, config.model_config(), config.min_count, config.seed)?;
    let report = train_model(&mut model, corpus, config)?;
    Ok((model, report))
}

/// Train an existing model in place.
pub fn train_model(model: &mut MultiTaskModel, corpus: &LabeledCorpus, config: &TrainingConfig) -> Result<TrainReport> {
    config.validate()?;
    let exs = examples(model, corpus)?;
    if exs.is_empty() {
        return Err(NnError::EmptyInput("training corpus"));
    }
    if exs.iter().all(|e| e.entity.iter().all(|&t| t == 0)) {
        log::warn!("training corpus has no entity labels");
    }
    log::info!(
        "training: {} sentences, {} epochs, optimizer {:?}, lr {}, batch {}, clip {}, alpha {}, beta {}, D {}, H {}, vocab {}, seed {}",
        exs.len(),
        config.epochs,
        config.optimizer,
        config.learning_rate,
        config.batch_size,
        config.clip_norm,
        config.alpha,
        config.beta,
        model.config.embed_dim,
        model.config.hidden,
        model.vocab.len(),
        config.seed
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &model.params);
    let mut order: Vec<usize> = (0..exs.len()).collect();
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(config.epochs),
        updates: 0,
        sentences: exs.len(),
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut acc = Gradients::new(model.params.len());
            for &i in batch {
                let (l, g) = example_gradients(model, &exs[i], config.alpha, config.beta)?;
                total += l;
                acc.merge(g);
            }
            acc.scale(1.0 / batch.len() as f64);
            acc.clip(config.clip_norm);
            opt.step(&mut model.params, &acc);
            report.updates += 1;
        }
        let mean = total / exs.len() as f64;
        if let Some(&prev) = report.epoch_losses.last() {
            if mean > prev {
                log::info!("epoch {}: loss rose from {prev:.4} to {mean:.4}", epoch + 1);
            }
        }
        log::info!("epoch {}/{}: mean loss {mean:.4}", epoch + 1, config.epochs);
        report.epoch_losses.push(mean);
    }
    model.trained = true;
    Ok(report)
}
