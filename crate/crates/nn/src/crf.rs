//! Linear-chain CRF with virtual START/STOP tags.
//!
//! Emissions `P` are T×k; transitions `A` are (k+2)×(k+2) with row/column
//! `k` = START and `k+1` = STOP. Transitions into START and out of STOP are
//! never part of a path; they are held at [`BLOCKED`] and get no gradient.

use rand::Rng;

use crate::error::{NnError, Result};
use crate::tensor::{lse, Tensor};

/// Score used for the impossible transitions (into START, out of STOP).
pub const BLOCKED: f64 = -10000.0;

pub fn start(k: usize) -> usize {
    k
}

pub fn stop(k: usize) -> usize {
    k + 1
}

fn check(p: &Tensor, a: &Tensor) -> Result<usize> {
    let k = p.cols();
    if a.rows() != k + 2 || a.cols() != k + 2 {
        return Err(NnError::shape("crf", p.shape(), a.shape()));
    }
    Ok(k)
}

fn check_tags(y: &[usize], t: usize, k: usize) -> Result<()> {
    if y.len() != t {
        return Err(NnError::shape("crf tags", &[t], &[y.len()]));
    }
    if let Some(&bad) = y.iter().find(|&&v| v >= k) {
        return Err(NnError::InvalidTag { index: bad, k });
    }
    Ok(())
}

/// Transition matrix with small random entries and the blocked rows/columns set.
pub fn init_transitions(k: usize, rng: &mut impl Rng) -> Tensor {
    let mut a = Tensor::zeros(k + 2, k + 2);
    for i in 0..k + 2 {
        for j in 0..k + 2 {
            let v = if j == start(k) || i == stop(k) {
                BLOCKED
            } else {
                rng.random_range(-0.1..0.1)
            };
            a.set(i, j, v);
        }
    }
    a
}

/// s(y) = A[START,y₀] + Σ A[yᵢ,yᵢ₊₁] + A[y_last,STOP] + Σ P[i,yᵢ].
pub fn score(p: &Tensor, a: &Tensor, y: &[usize]) -> Result<f64> {
    let k = check(p, a)?;
    check_tags(y, p.rows(), k)?;
    if y.is_empty() {
        return Err(NnError::EmptyInput("crf sequence"));
    }
    let mut s = a.get(start(k), y[0]) + a.get(y[y.len() - 1], stop(k));
    for (i, &t) in y.iter().enumerate() {
        s += p.get(i, t);
        if i + 1 < y.len() {
            s += a.get(t, y[i + 1]);
        }
    }
    Ok(s)
}

/// Forward log-messages α (T×k).
fn forward(p: &Tensor, a: &Tensor, k: usize) -> Vec<Vec<f64>> {
    let t_len = p.rows();
    let mut alpha = vec![vec![0.0; k]; t_len];
    for j in 0..k {
        alpha[0][j] = a.get(start(k), j) + p.get(0, j);
    }
    let mut buf = vec![0.0; k];
    for t in 1..t_len {
        for j in 0..k {
            for i in 0..k {
                buf[i] = alpha[t - 1][i] + a.get(i, j);
            }
            alpha[t][j] = p.get(t, j) + lse(&buf);
        }
    }
    alpha
}

/// Backward log-messages β (T×k), excluding the emission at t.
fn backward(p: &Tensor, a: &Tensor, k: usize) -> Vec<Vec<f64>> {
    let t_len = p.rows();
    let mut beta = vec![vec![0.0; k]; t_len];
    for i in 0..k {
        beta[t_len - 1][i] = a.get(i, stop(k));
    }
    let mut buf = vec![0.0; k];
    for t in (0..t_len - 1).rev() {
        for i in 0..k {
            for j in 0..k {
                buf[j] = a.get(i, j) + p.get(t + 1, j) + beta[t + 1][j];
            }
            beta[t][i] = lse(&buf);
        }
    }
    beta
}

/// log Z by the forward algorithm.
pub fn log_partition(p: &Tensor, a: &Tensor) -> Result<f64> {
    let k = check(p, a)?;
    if p.rows() == 0 {
        return Err(NnError::EmptyInput("crf sequence"));
    }
    let alpha = forward(p, a, k);
    let last: Vec<f64> = (0..k).map(|j| alpha[p.rows() - 1][j] + a.get(j, stop(k))).collect();
    Ok(lse(&last))
}

/// −log p(y | P) = log Z − s(y).
pub fn neg_log_likelihood(p: &Tensor, a: &Tensor, y: &[usize]) -> Result<f64> {
    Ok(log_partition(p, a)? - score(p, a, y)?)
}

/// NLL and its gradients w.r.t. P and A (expected minus observed counts).
pub fn nll_with_grad(p: &Tensor, a: &Tensor, y: &[usize]) -> Result<(f64, Tensor, Tensor)> {
    let k = check(p, a)?;
    let gold = score(p, a, y)?;
    let t_len = p.rows();
    let alpha = forward(p, a, k);
    let beta = backward(p, a, k);
    let log_z = lse(&(0..k).map(|j| alpha[t_len - 1][j] + a.get(j, stop(k))).collect::<Vec<_>>());

    let mut dp = Tensor::zeros(t_len, k);
    let mut da = Tensor::zeros(k + 2, k + 2);
    for t in 0..t_len {
        for j in 0..k {
            let mu = (alpha[t][j] + beta[t][j] - log_z).exp();
            dp.set(t, j, mu);
            if t == 0 {
                da.set(start(k), j, da.get(start(k), j) + mu);
            }
            if t == t_len - 1 {
                da.set(j, stop(k), da.get(j, stop(k)) + mu);
            }
        }
        if t + 1 < t_len {
            for i in 0..k {
                for j in 0..k {
                    let xi = (alpha[t][i] + a.get(i, j) + p.get(t + 1, j) + beta[t + 1][j] - log_z).exp();
                    da.set(i, j, da.get(i, j) + xi);
                }
            }
        }
    }
    for (t, &tag) in y.iter().enumerate() {
        dp.set(t, tag, dp.get(t, tag) - 1.0);
        if t + 1 < t_len {
            da.set(tag, y[t + 1], da.get(tag, y[t + 1]) - 1.0);
        }
    }
    da.set(start(k), y[0], da.get(start(k), y[0]) - 1.0);
    da.set(y[t_len - 1], stop(k), da.get(y[t_len - 1], stop(k)) - 1.0);
    Ok((log_z - gold, dp, da))
}

/// Highest-scoring tag sequence and its score. Among equally scoring
/// sequences the one with the smaller tag at the earliest differing position
/// wins.
pub fn viterbi(p: &Tensor, a: &Tensor) -> Result<(Vec<usize>, f64)> {
    let k = check(p, a)?;
    let t_len = p.rows();
    if t_len == 0 {
        return Err(NnError::EmptyInput("crf sequence"));
    }
    // best[t][j]: best score of positions t.. given tag j at t (emission at t included).
    let mut best = vec![vec![0.0; k]; t_len];
    for j in 0..k {
        best[t_len - 1][j] = p.get(t_len - 1, j) + a.get(j, stop(k));
    }
    for t in (0..t_len - 1).rev() {
        for j in 0..k {
            let tail = (0..k)
                .map(|n| a.get(j, n) + best[t + 1][n])
                .fold(f64::NEG_INFINITY, f64::max);
            best[t][j] = p.get(t, j) + tail;
        }
    }
    let first: Vec<f64> = (0..k).map(|j| a.get(start(k), j) + best[0][j]).collect();
    let total = first.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * total.abs().max(1.0);

    let mut y = Vec::with_capacity(t_len);
    y.push((0..k).find(|&j| first[j] >= total - tol).unwrap());
    for t in 0..t_len - 1 {
        let prev = y[t];
        let target = best[t][prev] - p.get(t, prev);
        let next = (0..k)
            .find(|&n| a.get(prev, n) + best[t + 1][n] >= target - tol)
            .unwrap();
        y.push(next);
    }
    let s = score(p, a, &y)?;
    Ok((y, s))
}
