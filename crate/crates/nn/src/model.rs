//! The multi-task BiLSTM–attention–CRF tagger.
//!
//! Shapes use a row-per-time-step convention: an embedded sentence is T×D,
//! the BiLSTM output is T×2H and emissions are T×k. Gate matrices are
//! (H+D)×H and multiply the row `[h_prev, x_t]` from the left.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use softner_core::propagation::{LabeledCorpus, OUTSIDE};

use crate::crf;
use crate::error::{NnError, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token → embedding row. Row 0 is PAD, row 1 is UNK; other entries are
/// lower-cased.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;

    /// Keep lower-cased tokens seen at least `min_count` times, sorted.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.to_lowercase()).or_default() += 1;
        }
        let kept = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count.max(1) && t != PAD_TOKEN && t != UNK_TOKEN)
            .map(|(t, _)| t);
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(kept);
        Self::from_tokens(all).expect("reserved entries present")
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(NnError::Format("vocabulary must start with PAD and UNK".into()));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { tokens, index })
    }

    /// Lower-cased lookup, then the raw form, then UNK.
    pub fn lookup(&self, token: &str) -> usize {
        self.index
            .get(&token.to_lowercase())
            .or_else(|| self.index.get(token))
            .copied()
            .unwrap_or(Self::UNK)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Tag dictionary for one task; `O` is always index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TagSet {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagSet {
    pub fn from_tags<S: AsRef<str>>(tags: impl IntoIterator<Item = S>) -> Self {
        let mut rest: Vec<String> = tags
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .filter(|t| t != OUTSIDE)
            .collect();
        rest.sort();
        rest.dedup();
        let mut all = vec![OUTSIDE.to_string()];
        all.extend(rest);
        Self::from_list(all).expect("O is first")
    }

    /// Exact list as stored in a model file.
    pub fn from_list(tags: Vec<String>) -> Result<Self> {
        if tags.first().map(String::as_str) != Some(OUTSIDE) {
            return Err(NnError::Format("tag dictionary must start with O".into()));
        }
        let index = tags.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { tags, index })
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn tag(&self, i: usize) -> &str {
        &self.tags[i]
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub max_seq_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 100,
            hidden: 200,
            max_seq_len: 300,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden == 0 || self.max_seq_len == 0 {
            return Err(NnError::Config(format!("dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmParams {
    pub w_f: ParamId,
    pub w_i: ParamId,
    pub w_c: ParamId,
    pub w_o: ParamId,
    pub b_f: ParamId,
    pub b_i: ParamId,
    pub b_c: ParamId,
    pub b_o: ParamId,
}

impl LstmParams {
    fn register(ps: &mut ParamStore, prefix: &str, d: usize, h: usize, rng: &mut impl Rng) -> Self {
        let s = (6.0 / (d + 2 * h) as f64).sqrt();
        let mut w = |name: &str| ps.add(format!("{prefix}.{name}"), uniform(d + h, h, s, rng));
        let (w_f, w_i, w_c, w_o) = (w("w_f"), w("w_i"), w("w_c"), w("w_o"));
        Self {
            w_f,
            w_i,
            w_c,
            w_o,
            // forget bias starts at 1 so early gradients flow through the cell
            b_f: ps.add(format!("{prefix}.b_f"), Tensor::filled(1, h, 1.0)),
            b_i: ps.add(format!("{prefix}.b_i"), Tensor::zeros(1, h)),
            b_c: ps.add(format!("{prefix}.b_c"), Tensor::zeros(1, h)),
            b_o: ps.add(format!("{prefix}.b_o"), Tensor::zeros(1, h)),
        }
    }

    pub fn ids(&self) -> [ParamId; 8] {
        [self.w_f, self.w_i, self.w_c, self.w_o, self.b_f, self.b_i, self.b_c, self.b_o]
    }
}

/// Task-specific layers: time-distributed dense, attention, projection, CRF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadParams {
    pub dense_w: ParamId,
    pub dense_b: ParamId,
    /// k×1 attention vector.
    pub attn: ParamId,
    pub proj_w: ParamId,
    pub proj_b: ParamId,
    pub transitions: ParamId,
    pub k: usize,
}

impl HeadParams {
    fn register(ps: &mut ParamStore, prefix: &str, h2: usize, k: usize, rng: &mut impl Rng) -> Self {
        let sd = (6.0 / (h2 + k) as f64).sqrt();
        let sa = (6.0 / (k + 1) as f64).sqrt();
        let sp = (6.0 / (3 * k) as f64).sqrt();
        Self {
            dense_w: ps.add(format!("{prefix}.dense_w"), uniform(h2, k, sd, rng)),
            dense_b: ps.add(format!("{prefix}.dense_b"), Tensor::zeros(1, k)),
            attn: ps.add(format!("{prefix}.attn"), uniform(k, 1, sa, rng)),
            proj_w: ps.add(format!("{prefix}.proj_w"), uniform(2 * k, k, sp, rng)),
            proj_b: ps.add(format!("{prefix}.proj_b"), Tensor::zeros(1, k)),
            transitions: ps.add(format!("{prefix}.transitions"), crf::init_transitions(k, rng)),
            k,
        }
    }

    pub fn ids(&self) -> [ParamId; 6] {
        [self.dense_w, self.dense_b, self.attn, self.proj_w, self.proj_b, self.transitions]
    }
}

fn uniform(r: usize, c: usize, s: f64, rng: &mut impl Rng) -> Tensor {
    let data = (0..r * c).map(|_| rng.random_range(-s..=s)).collect();
    Tensor::new(vec![r, c], data).expect("shape matches data")
}

/// Graph nodes of one head.
#[derive(Debug, Clone, Copy)]
pub struct HeadNodes {
    pub dense: NodeId,
    pub alpha: NodeId,
    pub h_star: NodeId,
    pub emissions: NodeId,
    pub transitions: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardNodes {
    /// Shared BiLSTM output, T×2H.
    pub shared: NodeId,
    pub entity: HeadNodes,
    pub dtype: HeadNodes,
}

/// Plain-value result of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub entity_emissions: Tensor,
    pub dtype_emissions: Tensor,
    pub entity_attention: Vec<f64>,
    pub dtype_attention: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub entity_tags: TagSet,
    pub dtype_tags: TagSet,
    pub params: ParamStore,
    pub embedding: ParamId,
    pub forward_lstm: LstmParams,
    pub backward_lstm: LstmParams,
    pub entity_head: HeadParams,
    pub dtype_head: HeadParams,
    pub trained: bool,
}

impl MultiTaskModel {
    /// Fresh model with seeded random initialization. Parameters are
    /// registered in a fixed order (embedding, forward LSTM, backward LSTM,
    /// entity head, dtype head), which is also the file order.
    pub fn new(config: ModelConfig, vocab: Vocab, entity_tags: TagSet, dtype_tags: TagSet, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h) = (config.embed_dim, config.hidden);
        let mut ps = ParamStore::default();
        let mut emb = uniform(vocab.len(), d, 0.25, &mut rng);
        emb.row_mut(Vocab::PAD).fill(0.0);
        let embedding = ps.add("embedding", emb);
        let forward_lstm = LstmParams::register(&mut ps, "lstm_fwd", d, h, &mut rng);
        let backward_lstm = LstmParams::register(&mut ps, "lstm_bwd", d, h, &mut rng);
        let entity_head = HeadParams::register(&mut ps, "entity", 2 * h, entity_tags.len(), &mut rng);
        let dtype_head = HeadParams::register(&mut ps, "dtype", 2 * h, dtype_tags.len(), &mut rng);
        Ok(Self {
            config,
            vocab,
            entity_tags,
            dtype_tags,
            params: ps,
            embedding,
            forward_lstm,
            backward_lstm,
            entity_head,
            dtype_head,
            trained: false,
        })
    }

    /// Vocabulary and both tag dictionaries derived from a labeled corpus.
    pub fn for_corpus(corpus: &LabeledCorpus, config: ModelConfig, min_count: usize, seed: u64) -> Result<Self> {
        if corpus.sentences.iter().all(|s| s.tokens.is_empty()) {
            return Err(NnError::EmptyInput("training corpus"));
        }
        let vocab = Vocab::build(
            corpus.sentences.iter().flat_map(|s| s.tokens.iter().map(|t| t.token.text.as_str())),
            min_count,
        );
        let tokens = || corpus.sentences.iter().flat_map(|s| &s.tokens);
        let entity_tags = TagSet::from_tags(tokens().map(|t| t.entity_tag.as_str()));
        let dtype_tags = TagSet::from_tags(tokens().map(|t| t.dtype_tag.as_str()));
        Self::new(config, vocab, entity_tags, dtype_tags, seed)
    }

    /// Overwrite embedding rows for tokens present in a pre-trained table.
    /// Returns the number of rows replaced.
    pub fn load_embeddings(&mut self, table: &HashMap<String, Vec<f64>>) -> Result<usize> {
        let d = self.config.embed_dim;
        let mut replaced = 0;
        for (i, tok) in self.vocab.tokens().iter().enumerate().skip(2) {
            if let Some(v) = table.get(tok) {
                if v.len() != d {
                    return Err(NnError::shape("embedding file", &[d], &[v.len()]));
                }
                self.params.get_mut(self.embedding).row_mut(i).copy_from_slice(v);
                replaced += 1;
            }
        }
        Ok(replaced)
    }

    /// Token ids, truncated to `max_seq_len` (with a warning).
    pub fn token_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>> {
        if tokens.is_empty() {
            return Err(NnError::EmptyInput("token list"));
        }
        let max = self.config.max_seq_len;
        if tokens.len() > max {
            log::warn!("sentence of {} tokens truncated to {max}", tokens.len());
        }
        Ok(tokens.iter().take(max).map(|t| self.vocab.lookup(t.as_ref())).collect())
    }

    /// Embedding rows for a token sequence (T×D, T ≤ max_seq_len).
    pub fn embed<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Tensor> {
        let ids = self.token_ids(tokens)?;
        let mut g = Graph::new(&self.params);
        let x = g.gather(self.embedding, &ids)?;
        Ok(g.value(x).clone())
    }

    /// Build the forward graph for already-mapped token ids.
    pub fn forward_graph(&self, g: &mut Graph<'_>, ids: &[usize]) -> Result<ForwardNodes> {
        let x = g.gather(self.embedding, ids)?;
        let xs = (0..ids.len()).map(|t| g.row(x, t)).collect::<Result<Vec<_>>>()?;
        let shared = bilstm(g, &self.forward_lstm, &self.backward_lstm, &xs, self.config.hidden)?;
        Ok(ForwardNodes {
            shared,
            entity: head(g, &self.entity_head, shared)?,
            dtype: head(g, &self.dtype_head, shared)?,
        })
    }

    pub fn forward_pass<S: AsRef<str>>(&self, tokens: &[S]) -> Result<ForwardOutput> {
        let ids = self.token_ids(tokens)?;
        let mut g = Graph::new(&self.params);
        let n = self.forward_graph(&mut g, &ids)?;
        Ok(ForwardOutput {
            entity_emissions: g.value(n.entity.emissions).clone(),
            dtype_emissions: g.value(n.dtype.emissions).clone(),
            entity_attention: g.value(n.entity.alpha).data().to_vec(),
            dtype_attention: g.value(n.dtype.alpha).data().to_vec(),
        })
    }

    /// Parameters specific to the entity head.
    pub fn entity_param_ids(&self) -> Vec<ParamId> {
        self.entity_head.ids().to_vec()
    }

    pub fn dtype_param_ids(&self) -> Vec<ParamId> {
        self.dtype_head.ids().to_vec()
    }

    /// Embedding and both LSTM directions.
    pub fn shared_param_ids(&self) -> Vec<ParamId> {
        let mut v = vec![self.embedding];
        v.extend(self.forward_lstm.ids());
        v.extend(self.backward_lstm.ids());
        v
    }
}

/// One LSTM step: returns `(h_t, c_t)`, each 1×H.
pub fn lstm_cell(g: &mut Graph<'_>, p: &LstmParams, x: NodeId, h_prev: NodeId, c_prev: NodeId) -> Result<(NodeId, NodeId)> {
    let z = g.concat(h_prev, x, 1)?;
    let gate = |g: &mut Graph<'_>, w: ParamId, b: ParamId| -> Result<NodeId> {
        let wn = g.param(w);
        let bn = g.param(b);
        let m = g.matmul(z, wn)?;
        g.add_row(m, bn)
    };
    let f = gate(g, p.w_f, p.b_f)?;
    let f = g.sigmoid(f);
    let i = gate(g, p.w_i, p.b_i)?;
    let i = g.sigmoid(i);
    let c_tilde = gate(g, p.w_c, p.b_c)?;
    let c_tilde = g.tanh(c_tilde);
    let o = gate(g, p.w_o, p.b_o)?;
    let o = g.sigmoid(o);
    let keep = g.hadamard(f, c_prev)?;
    let write = g.hadamard(i, c_tilde)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.hadamard(o, tc)?;
    Ok((h, c))
}

/// Run one direction over `xs` (already in processing order).
fn run_lstm(g: &mut Graph<'_>, p: &LstmParams, xs: &[NodeId], hidden: usize) -> Result<Vec<NodeId>> {
    let mut h = g.input(Tensor::zeros(1, hidden));
    let mut c = g.input(Tensor::zeros(1, hidden));
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        (h, c) = lstm_cell(g, p, x, h, c)?;
        out.push(h);
    }
    Ok(out)
}

/// Bidirectional LSTM over 1×D rows; row t of the result is `[→h_t, ←h_t]`.
pub fn bilstm(g: &mut Graph<'_>, fwd: &LstmParams, bwd: &LstmParams, xs: &[NodeId], hidden: usize) -> Result<NodeId> {
    if xs.is_empty() {
        return Err(NnError::EmptyInput("bilstm input"));
    }
    let forward = run_lstm(g, fwd, xs, hidden)?;
    let reversed: Vec<NodeId> = xs.iter().rev().copied().collect();
    let mut backward = run_lstm(g, bwd, &reversed, hidden)?;
    backward.reverse();
    let rows = forward
        .iter()
        .zip(&backward)
        .map(|(&a, &b)| g.concat(a, b, 1))
        .collect::<Result<Vec<_>>>()?;
    g.stack_rows(&rows)
}

/// Attention over a T×k dense output: returns `(α (T×1), h* (1×k), O (T×2k))`.
pub fn attention(g: &mut Graph<'_>, w_a: ParamId, hd: NodeId) -> Result<(NodeId, NodeId, NodeId)> {
    let t = g.value(hd).rows();
    let wa = g.param(w_a);
    let scores = g.matmul(hd, wa)?;
    let alpha = g.softmax(scores, 0)?;
    let alpha_t = g.transpose(alpha);
    let r = g.matmul(alpha_t, hd)?;
    let h_star = g.tanh(r);
    let rep = g.repeat_rows(h_star, t)?;
    let o = g.concat(hd, rep, 1)?;
    Ok((alpha, h_star, o))
}

fn head(g: &mut Graph<'_>, p: &HeadParams, shared: NodeId) -> Result<HeadNodes> {
    let w = g.param(p.dense_w);
    let b = g.param(p.dense_b);
    let m = g.matmul(shared, w)?;
    let dense = g.add_row(m, b)?;
    let (alpha, h_star, o) = attention(g, p.attn, dense)?;
    let pw = g.param(p.proj_w);
    let pb = g.param(p.proj_b);
    let m = g.matmul(o, pw)?;
    let emissions = g.add_row(m, pb)?;
    let transitions = g.param(p.transitions);
    Ok(HeadNodes {
        dense,
        alpha,
        h_star,
        emissions,
        transitions,
    })
}

/// Read a text embedding table: one `token v1 … vD` line per token.
pub fn read_embedding_file(path: impl AsRef<Path>, dim: usize) -> Result<HashMap<String, Vec<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| NnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut table = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let mut parts = line.split(' ').filter(|s| !s.is_empty());
        let Some(tok) = parts.next() else { continue };
        let v = parts
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| NnError::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if v.len() != dim {
            return Err(NnError::Format(format!(
                "{}:{}: expected {dim} values, found {}",
                path.display(),
                n + 1,
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(NnError::Format(format!("{}:{}: non-finite value", path.display(), n + 1)));
        }
        table.insert(tok.to_string(), v);
    }
    Ok(table)
}
