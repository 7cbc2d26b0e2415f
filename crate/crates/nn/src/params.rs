//! Named parameter tensors, their (possibly sparse) gradients and optimizers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Parameters in registration order; that order is also the file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }
}

/// Gradient of one parameter: dense, or a sparse set of rows (embeddings).
#[derive(Debug, Clone, PartialEq)]
pub enum Grad {
    Dense(Tensor),
    Rows { cols: usize, rows: BTreeMap<usize, Vec<f64>> },
}

impl Grad {
    pub fn to_dense(&self, rows: usize) -> Tensor {
        match self {
            Grad::Dense(t) => t.clone(),
            Grad::Rows { cols, rows: map } => {
                let mut t = Tensor::zeros(rows, *cols);
                for (&r, v) in map {
                    t.row_mut(r).copy_from_slice(v);
                }
                t
            }
        }
    }

    fn values_mut(&mut self) -> Box<dyn Iterator<Item = &mut f64> + '_> {
        match self {
            Grad::Dense(t) => Box::new(t.data_mut().iter_mut()),
            Grad::Rows { rows, .. } => Box::new(rows.values_mut().flat_map(|v| v.iter_mut())),
        }
    }

    fn sq_norm(&self) -> f64 {
        match self {
            Grad::Dense(t) => t.sq_norm(),
            Grad::Rows { rows, .. } => rows.values().flatten().map(|v| v * v).sum(),
        }
    }

    fn accumulate(&mut self, other: Grad) {
        match (self, other) {
            (Grad::Dense(a), Grad::Dense(b)) => a.add_assign(&b),
            (Grad::Rows { rows: a, .. }, Grad::Rows { rows: b, .. }) => {
                for (r, v) in b {
                    match a.get_mut(&r) {
                        Some(x) => x.iter_mut().zip(&v).for_each(|(p, q)| *p += q),
                        None => {
                            a.insert(r, v);
                        }
                    }
                }
            }
            (Grad::Dense(a), Grad::Rows { rows, .. }) => {
                for (r, v) in rows {
                    a.row_mut(r).iter_mut().zip(&v).for_each(|(p, q)| *p += q);
                }
            }
            (s @ Grad::Rows { .. }, Grad::Dense(mut b)) => {
                if let Grad::Rows { rows, .. } = s {
                    for (r, v) in std::mem::take(rows) {
                        b.row_mut(r).iter_mut().zip(&v).for_each(|(p, q)| *p += q);
                    }
                }
                *s = Grad::Dense(b);
            }
        }
    }
}

/// Gradients indexed by parameter; `None` means exactly zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Grad>>,
}

impl Gradients {
    pub fn new(n: usize) -> Self {
        Self { grads: vec![None; n] }
    }

    pub fn get(&self, id: ParamId) -> Option<&Grad> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Dense view (zeros when absent).
    pub fn dense(&self, id: ParamId, params: &ParamStore) -> Tensor {
        let p = params.get(id);
        match self.get(id) {
            Some(g) => g.to_dense(p.rows()),
            None => Tensor::zeros(p.rows(), p.cols()),
        }
    }

    pub fn add(&mut self, id: ParamId, g: Grad) {
        if self.grads.len() <= id.0 {
            self.grads.resize(id.0 + 1, None);
        }
        match &mut self.grads[id.0] {
            Some(existing) => existing.accumulate(g),
            slot @ None => *slot = Some(g),
        }
    }

    pub fn merge(&mut self, other: Gradients) {
        for (i, g) in other.grads.into_iter().enumerate() {
            if let Some(g) = g {
                self.add(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.values_mut().for_each(|v| *v *= c);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().flatten().map(Grad::sq_norm).sum::<f64>().sqrt()
    }

    /// Rescale so the global norm is at most `max_norm`; returns the pre-clip norm.
    pub fn clip(&mut self, max_norm: f64) -> f64 {
        let n = self.global_norm();
        if n > max_norm && n > 0.0 {
            self.scale(max_norm / n);
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        self.grads.iter().all(Option::is_none)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// SGD or Adam. Parameters (and embedding rows) without a gradient in a
/// step are left untouched, moments included.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    /// Per parameter, per row: number of updates seen (for bias correction).
    steps: Vec<Vec<u64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ParamStore) -> Self {
        let zeros = |t: &Tensor| Tensor::zeros(t.rows(), t.cols());
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: params.tensors().iter().map(zeros).collect(),
            v: params.tensors().iter().map(zeros).collect(),
            steps: params.tensors().iter().map(|t| vec![0; t.rows()]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        for id in params.ids().collect::<Vec<_>>() {
            let Some(g) = grads.get(id) else { continue };
            let cols = params.get(id).cols();
            match g {
                Grad::Dense(t) => {
                    for r in 0..t.rows() {
                        self.update_row(params, id, r, &t.data()[r * cols..(r + 1) * cols]);
                    }
                }
                Grad::Rows { rows, .. } => {
                    for (&r, v) in rows {
                        self.update_row(params, id, r, v);
                    }
                }
            }
        }
    }

    fn update_row(&mut self, params: &mut ParamStore, id: ParamId, r: usize, g: &[f64]) {
        let p = params.get_mut(id).row_mut(r);
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, gi) in p.iter_mut().zip(g) {
                    *w -= self.lr * gi;
                }
            }
            OptimizerKind::Adam => {
                let t = {
                    let s = &mut self.steps[id.0][r];
                    *s += 1;
                    *s as i32
                };
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                let m = self.m[id.0].row_mut(r);
                let v = self.v[id.0].row_mut(r);
                for j in 0..p.len() {
                    m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                    v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                    let mh = m[j] / bc1;
                    let vh = v[j] / bc2;
                    p[j] -= self.lr * mh / (vh.sqrt() + self.eps);
                }
            }
        }
    }
}
