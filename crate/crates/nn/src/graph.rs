//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! A graph borrows the parameter store, so parameter leaves are read in
//! place rather than copied. Nodes are appended in evaluation order, which
//! is therefore a topological order; `backward` walks it in reverse.

use std::collections::BTreeMap;

use crate::crf;
use crate::error::{NnError, Result};
use crate::params::{Grad, Gradients, ParamId, ParamStore};
use crate::tensor::{self, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Gather { param: ParamId, ids: Vec<usize> },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    Concat(NodeId, NodeId, usize),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Softmax(NodeId, usize),
    LogSumExp(NodeId, usize),
    Row(NodeId, usize),
    StackRows(Vec<NodeId>),
    RepeatRows(NodeId),
    Transpose(NodeId),
    Scale(NodeId, f64),
    Sum(NodeId),
    /// Gradients w.r.t. emissions and transitions, computed in the forward pass.
    CrfNll { p: NodeId, a: NodeId, dp: Tensor, da: Tensor },
}

#[derive(Debug)]
enum Value {
    Owned(Tensor),
    Param(ParamId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Value,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        match &self.nodes[id.0].value {
            Value::Owned(t) => t,
            Value::Param(p) => self.params.get(*p),
        }
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        debug_assert!(value.is_finite(), "non-finite value from {op:?}");
        self.nodes.push(Node {
            op,
            value: Value::Owned(value),
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A constant leaf (no gradient is reported for it).
    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Input, t)
    }

    /// The leaf for a parameter; one node per parameter per graph.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: Value::Param(id),
        });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(n);
        n
    }

    /// Rows `ids` of a parameter matrix, stacked (embedding lookup).
    pub fn gather(&mut self, param: ParamId, ids: &[usize]) -> Result<NodeId> {
        let table = self.params.get(param);
        if ids.is_empty() {
            return Err(NnError::EmptyInput("gather indices"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= table.rows()) {
            return Err(NnError::shape("gather", table.shape(), &[bad]));
        }
        let mut data = Vec::with_capacity(ids.len() * table.cols());
        for &i in ids {
            data.extend_from_slice(table.row(i));
        }
        let t = Tensor::new(vec![ids.len(), table.cols()], data)?;
        Ok(self.push(
            Op::Gather {
                param,
                ids: ids.to_vec(),
            },
            t,
        ))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    /// Broadcast-add a 1×c row (a bias) to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let v = tensor::add_row(self.value(a), self.value(row))?;
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::hadamard(self.value(a), self.value(b))?;
        Ok(self.push(Op::Hadamard(a, b), v))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId, axis: usize) -> Result<NodeId> {
        let v = tensor::concat(self.value(a), self.value(b), axis)?;
        Ok(self.push(Op::Concat(a, b, axis), v))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = tensor::sigmoid(self.value(a));
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = tensor::tanh(self.value(a));
        self.push(Op::Tanh(a), v)
    }

    pub fn softmax(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        let v = tensor::softmax(self.value(a), axis)?;
        Ok(self.push(Op::Softmax(a, axis), v))
    }

    pub fn log_sum_exp(&mut self, a: NodeId, axis: usize) -> Result<NodeId> {
        let v = tensor::log_sum_exp(self.value(a), axis)?;
        Ok(self.push(Op::LogSumExp(a, axis), v))
    }

    /// Row `i` of `a` as a 1×c tensor.
    pub fn row(&mut self, a: NodeId, i: usize) -> Result<NodeId> {
        let src = self.value(a);
        if i >= src.rows() {
            return Err(NnError::shape("row", src.shape(), &[i]));
        }
        let v = Tensor::row_vector(src.row(i).to_vec());
        Ok(self.push(Op::Row(a, i), v))
    }

    /// Stack 1×c rows into an n×c tensor.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        let first = rows.first().ok_or(NnError::EmptyInput("stack_rows"))?;
        let c = self.value(*first).cols();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            let v = self.value(r);
            if v.rows() != 1 || v.cols() != c {
                return Err(NnError::shape("stack_rows", &[1, c], v.shape()));
            }
            data.extend_from_slice(v.data());
        }
        let t = Tensor::new(vec![rows.len(), c], data)?;
        Ok(self.push(Op::StackRows(rows.to_vec()), t))
    }

    /// Repeat a 1×c row n times.
    pub fn repeat_rows(&mut self, a: NodeId, n: usize) -> Result<NodeId> {
        let v = self.value(a);
        if v.rows() != 1 || n == 0 {
            return Err(NnError::shape("repeat_rows", v.shape(), &[n]));
        }
        let data = v.data().repeat(n);
        let t = Tensor::new(vec![n, v.cols()], data)?;
        Ok(self.push(Op::RepeatRows(a), t))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).scale(c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), v)
    }

    /// CRF negative log-likelihood of `tags` under emissions `p` and transitions `a`.
    pub fn crf_nll(&mut self, p: NodeId, a: NodeId, tags: &[usize]) -> Result<NodeId> {
        let (loss, dp, da) = crf::nll_with_grad(self.value(p), self.value(a), tags)?;
        Ok(self.push(Op::CrfNll { p, a, dp, da }, Tensor::scalar(loss)))
    }

    /// Reverse-mode gradients of a scalar node w.r.t. every parameter.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(NnError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::new(self.params.len());

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut send = |id: NodeId, t: Tensor| match &mut grads[id.0] {
                Some(acc) => acc.add_assign(&t),
                slot @ None => *slot = Some(t),
            };
            match &node.op {
                Op::Input => {}
                Op::Param(p) => out.add(*p, Grad::Dense(g)),
                Op::Gather { param, ids } => {
                    let cols = g.cols();
                    let mut rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                    for (r, &i) in ids.iter().enumerate() {
                        let e = rows.entry(i).or_insert_with(|| vec![0.0; cols]);
                        e.iter_mut().zip(g.row(r)).for_each(|(x, y)| *x += y);
                    }
                    out.add(*param, Grad::Rows { cols, rows });
                }
                Op::MatMul(a, b) => {
                    send(*a, tensor::matmul_nt(&g, self.value(*b))?);
                    send(*b, tensor::matmul_tn(self.value(*a), &g)?);
                }
                Op::Add(a, b) => {
                    send(*b, g.clone());
                    send(*a, g);
                }
                Op::AddRow(a, row) => {
                    let mut col = vec![0.0; g.cols()];
                    for r in 0..g.rows() {
                        col.iter_mut().zip(g.row(r)).for_each(|(x, y)| *x += y);
                    }
                    send(*row, Tensor::row_vector(col));
                    send(*a, g);
                }
                Op::Hadamard(a, b) => {
                    send(*a, tensor::hadamard(&g, self.value(*b))?);
                    send(*b, tensor::hadamard(&g, self.value(*a))?);
                }
                Op::Concat(a, b, axis) => {
                    let (ga, gb) = split(&g, self.value(*a), *axis);
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::Sigmoid(a) => {
                    let y = self.value(NodeId(idx));
                    send(*a, tensor::hadamard(&g, &y.map(|s| s * (1.0 - s)))?);
                }
                Op::Tanh(a) => {
                    let y = self.value(NodeId(idx));
                    send(*a, tensor::hadamard(&g, &y.map(|t| 1.0 - t * t))?);
                }
                Op::Softmax(a, axis) => {
                    let y = self.value(NodeId(idx));
                    let (y, gg) = if *axis == 0 {
                        (y.transpose(), g.transpose())
                    } else {
                        (y.clone(), g)
                    };
                    let mut d = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: f64 = y.row(r).iter().zip(gg.row(r)).map(|(a, b)| a * b).sum();
                        for c in 0..y.cols() {
                            d.set(r, c, y.get(r, c) * (gg.get(r, c) - dot));
                        }
                    }
                    send(*a, if *axis == 0 { d.transpose() } else { d });
                }
                Op::LogSumExp(a, axis) => {
                    let x = self.value(*a);
                    let y = self.value(NodeId(idx));
                    let mut d = Tensor::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        for c in 0..x.cols() {
                            let (yi, gi) = if *axis == 0 { (c, c) } else { (r, r) };
                            let lse = y.data()[yi];
                            d.set(r, c, g.data()[gi] * (x.get(r, c) - lse).exp());
                        }
                    }
                    send(*a, d);
                }
                Op::Row(a, i) => {
                    let src = self.value(*a);
                    let mut d = Tensor::zeros(src.rows(), src.cols());
                    d.row_mut(*i).copy_from_slice(g.data());
                    send(*a, d);
                }
                Op::StackRows(rows) => {
                    for (r, &id) in rows.iter().enumerate() {
                        send(id, Tensor::row_vector(g.row(r).to_vec()));
                    }
                }
                Op::RepeatRows(a) => {
                    let mut col = vec![0.0; g.cols()];
                    for r in 0..g.rows() {
                        col.iter_mut().zip(g.row(r)).for_each(|(x, y)| *x += y);
                    }
                    send(*a, Tensor::row_vector(col));
                }
                Op::Transpose(a) => send(*a, g.transpose()),
                Op::Scale(a, c) => send(*a, g.scale(*c)),
                Op::Sum(a) => {
                    let src = self.value(*a);
                    send(*a, Tensor::filled(src.rows(), src.cols(), g.data()[0]));
                }
                Op::CrfNll { p, a, dp, da } => {
                    let s = g.data()[0];
                    send(*p, dp.scale(s));
                    send(*a, da.scale(s));
                }
            }
        }
        Ok(out)
    }
}

/// Split the gradient of a concatenation back into its two inputs.
fn split(g: &Tensor, a: &Tensor, axis: usize) -> (Tensor, Tensor) {
    if axis == 0 {
        let n = a.len();
        let ga = Tensor::new(vec![a.rows(), g.cols()], g.data()[..n].to_vec()).unwrap();
        let gb = Tensor::new(vec![g.rows() - a.rows(), g.cols()], g.data()[n..].to_vec()).unwrap();
        (ga, gb)
    } else {
        let ac = a.cols();
        let bc = g.cols() - ac;
        let mut da = Vec::with_capacity(g.rows() * ac);
        let mut db = Vec::with_capacity(g.rows() * bc);
        for r in 0..g.rows() {
            da.extend_from_slice(&g.row(r)[..ac]);
            db.extend_from_slice(&g.row(r)[ac..]);
        }
        (
            Tensor::new(vec![g.rows(), ac], da).unwrap(),
            Tensor::new(vec![g.rows(), bc], db).unwrap(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_derivative_at_zero() {
        let mut ps = ParamStore::default();
        let x = ps.add("x", Tensor::scalar(0.0));
        let mut g = Graph::new(&ps);
        let xn = g.param(x);
        let y = g.sigmoid(xn);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.dense(x, &ps).item(), Some(0.25));
    }

    #[test]
    fn unused_parameter_gets_zero() {
        let mut ps = ParamStore::default();
        let x = ps.add("x", Tensor::scalar(1.5));
        let unused = ps.add("u", Tensor::zeros(2, 2));
        let mut g = Graph::new(&ps);
        let xn = g.param(x);
        let y = g.tanh(xn);
        let grads = g.backward(y).unwrap();
        assert!(grads.get(unused).is_none());
        assert_eq!(grads.dense(unused, &ps), Tensor::zeros(2, 2));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let ps = ParamStore::default();
        let mut g = Graph::new(&ps);
        let v = g.input(Tensor::zeros(1, 2));
        assert!(matches!(g.backward(v), Err(NnError::NonScalarLoss(_))));
    }

    #[test]
    fn param_leaf_is_shared() {
        let mut ps = ParamStore::default();
        let w = ps.add("w", Tensor::scalar(3.0));
        let mut g = Graph::new(&ps);
        let a = g.param(w);
        let b = g.param(w);
        assert_eq!(a, b);
        let y = g.hadamard(a, b).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.dense(w, &ps).item(), Some(6.0));
    }

    #[test]
    fn gather_gives_sparse_rows() {
        let mut ps = ParamStore::default();
        let e = ps.add("e", Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap());
        let mut g = Graph::new(&ps);
        let x = g.gather(e, &[2, 0, 2]).unwrap();
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        match grads.get(e).unwrap() {
            Grad::Rows { rows, .. } => {
                assert_eq!(rows.keys().copied().collect::<Vec<_>>(), vec![0, 2]);
                assert_eq!(rows[&2], vec![2.0, 2.0]);
            }
            other => panic!("expected sparse rows, got {other:?}"),
        }
        assert!(g.gather(e, &[3]).is_err());
    }
}
