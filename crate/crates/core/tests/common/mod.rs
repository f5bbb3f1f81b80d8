//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::manual_clamp)]

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};

use smbne_core::{Genotype, Phenotype, TransferFn};

/// Scalar re-derivation of one CartPole Euler step.
pub fn cartpole_oracle(s: [f64; 4], action: usize) -> [f64; 4] {
    let (g, mc, mp, l, f, tau) = (9.8, 1.0, 0.1, 0.5, 10.0, 0.02);
    let [x, xd, th, thd] = s;
    let force = if action == 1 { f } else { -f };
    let total = mc + mp;
    let temp = (force + mp * l * thd * thd * th.sin()) / total;
    let thacc = (g * th.sin() - th.cos() * temp) / (l * (4.0 / 3.0 - mp * th.cos() * th.cos() / total));
    let xacc = temp - mp * l * thacc * th.cos() / total;
    [x + tau * xd, xd + tau * xacc, th + tau * thd, thd + tau * thacc]
}

pub fn mountaincar_oracle(p: f64, v: f64, action: usize) -> (f64, f64) {
    let mut v = v + (action as f64 - 1.0) * 0.001 - (3.0 * p).cos() * 0.0025;
    v = v.max(-0.07).min(0.07);
    let mut p = p + v;
    p = p.max(-1.2).min(0.6);
    if p == -1.2 && v < 0.0 {
        v = 0.0;
    }
    (p, v)
}

/// Breadth-first traversal from the outputs over an explicit edge list.
pub fn reachable_oracle(g: &Genotype) -> BTreeSet<usize> {
    let n_in = g.config().num_inputs;
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<usize> = g.outputs().iter().copied().collect();
    while let Some(addr) = queue.pop_front() {
        if addr < n_in {
            continue;
        }
        let node = addr - n_in;
        if seen.insert(node) {
            queue.extend(g.nodes()[node].connections.iter().copied());
        }
    }
    seen
}

/// Interprets the genotype node by node with no shared code paths.
pub fn interpret(g: &Genotype, state: &[f64]) -> Vec<f64> {
    let c = g.config();
    let mut values: Vec<f64> = state.to_vec();
    for node in g.nodes() {
        let mut sum = 0.0;
        for k in 0..c.arity {
            sum += node.weights[k] * values[node.connections[k]];
        }
        let f = c.function_set[node.function];
        let y = match f {
            TransferFn::Tanh => sum.tanh(),
            TransferFn::Softsign => sum / (1.0 + sum.abs()),
            TransferFn::Step => {
                if sum > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TransferFn::Sigmoid => 1.0 / (1.0 + (-sum).exp()),
            TransferFn::Gauss => (-sum * sum).exp(),
        };
        values.push(y);
    }
    g.outputs().iter().map(|&o| values[o]).collect()
}

pub struct Dense {
    pub mu: f64,
    pub sigma2: f64,
    pub r_inv: DMatrix<f64>,
    pub resid: DVector<f64>,
    pub log_likelihood: f64,
}

pub fn l1(a: &Phenotype, b: &Phenotype) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).sum()
}

pub fn corr(phenos: &[Phenotype], theta: f64, nugget: f64) -> DMatrix<f64> {
    let n = phenos.len();
    DMatrix::from_fn(n, n, |i, j| {
        (-theta * l1(&phenos[i], &phenos[j])).exp() + if i == j { nugget } else { 0.0 }
    })
}

/// Textbook ordinary Kriging with an explicit inverse and determinant.
pub fn dense(phenos: &[Phenotype], y: &[f64], theta: f64, nugget: f64) -> Dense {
    let n = y.len();
    let r = corr(phenos, theta, nugget);
    let r_inv = r.clone().try_inverse().unwrap();
    let one = DVector::from_element(n, 1.0);
    let yv = DVector::from_column_slice(y);
    let mu = (one.transpose() * &r_inv * &yv)[0] / (one.transpose() * &r_inv * &one)[0];
    let resid = &yv - &one * mu;
    let sigma2 = (resid.transpose() * &r_inv * &resid)[0] / n as f64;
    let log_likelihood = -(n as f64) / 2.0 * sigma2.ln() - 0.5 * r.determinant().ln();
    Dense {
        mu,
        sigma2,
        r_inv,
        resid,
        log_likelihood,
    }
}

pub fn dense_predict(d: &Dense, phenos: &[Phenotype], p: &Phenotype, theta: f64) -> (f64, f64) {
    let r = DVector::from_iterator(phenos.len(), phenos.iter().map(|q| (-theta * l1(q, p)).exp()));
    let mean = d.mu + (r.transpose() * &d.r_inv * &d.resid)[0];
    let var = d.sigma2 * (1.0 - (r.transpose() * &d.r_inv * &r)[0]);
    (mean, var.max(0.0))
}
