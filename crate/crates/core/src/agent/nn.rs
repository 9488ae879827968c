//! Dense and graph layers with hand-derived backward passes, masked
//! categoricals and the Adam optimiser.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Graph;

/// `y = x·W + b` with `W` stored `(in, out)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear { weight: Array2::zeros((input, output)), bias: Array1::zeros(output) }
    }

    /// Glorot-uniform weights scaled by `gain`, zero bias.
    pub fn init<R: Rng>(input: usize, output: usize, gain: f64, rng: &mut R) -> Self {
        let limit = gain * (6.0 / (input + output) as f64).sqrt();
        Linear {
            weight: Array2::from_shape_fn((input, output), |_| rng.random_range(-limit..=limit)),
            bias: Array1::zeros(output),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    pub fn forward_vec(&self, x: ArrayView1<f64>) -> Array1<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.weight += &x.t().dot(dy);
        grad.bias += &dy.sum_axis(Axis(0));
        dy.dot(&self.weight.t())
    }

    pub fn backward_vec(&self, x: ArrayView1<f64>, dy: ArrayView1<f64>, grad: &mut Linear) -> Array1<f64> {
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                grad.weight.row_mut(i).scaled_add(xi, &dy);
            }
        }
        grad.bias += &dy;
        self.weight.dot(&dy)
    }

    fn blocks<'a>(&'a self, name: &str, out: &mut Vec<(String, &'a [f64])>) {
        out.push((format!("{name}.weight"), self.weight.as_slice().expect("standard layout")));
        out.push((format!("{name}.bias"), self.bias.as_slice().expect("standard layout")));
    }

    fn blocks_mut<'a>(&'a mut self, name: &str, out: &mut Vec<(String, &'a mut [f64])>) {
        out.push((format!("{name}.weight"), self.weight.as_slice_mut().expect("standard layout")));
        out.push((format!("{name}.bias"), self.bias.as_slice_mut().expect("standard layout")));
    }
}

/// Mean-aggregation message passing: `h' = tanh(h·W_self + mean_nbr(h)·W_nbr + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConv {
    pub w_self: Array2<f64>,
    pub w_nbr: Array2<f64>,
    pub bias: Array1<f64>,
}

impl GraphConv {
    pub fn zeros(input: usize, output: usize) -> Self {
        GraphConv {
            w_self: Array2::zeros((input, output)),
            w_nbr: Array2::zeros((input, output)),
            bias: Array1::zeros(output),
        }
    }

    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let a = Linear::init(input, output, 1.0, rng);
        let b = Linear::init(input, output, 1.0, rng);
        GraphConv { w_self: a.weight, w_nbr: b.weight, bias: a.bias }
    }

    /// Returns `(neighbour mean, output)`.
    pub fn forward(&self, x: &Array2<f64>, graph: &Graph) -> (Array2<f64>, Array2<f64>) {
        let agg = mean_aggregate(x, graph);
        let mut out = x.dot(&self.w_self) + agg.dot(&self.w_nbr) + &self.bias;
        out.mapv_inplace(f64::tanh);
        (agg, out)
    }

    /// Accumulates gradients; returns `dL/dx` when `need_input_grad`.
    pub fn backward(
        &self,
        x: &Array2<f64>,
        agg: &Array2<f64>,
        out: &Array2<f64>,
        d_out: &Array2<f64>,
        graph: &Graph,
        grad: &mut GraphConv,
        need_input_grad: bool,
    ) -> Option<Array2<f64>> {
        let d_pre = tanh_backward(out, d_out);
        grad.w_self += &x.t().dot(&d_pre);
        grad.w_nbr += &agg.t().dot(&d_pre);
        grad.bias += &d_pre.sum_axis(Axis(0));
        need_input_grad.then(|| {
            let mut dx = d_pre.dot(&self.w_self.t());
            let d_agg = d_pre.dot(&self.w_nbr.t());
            mean_aggregate_transpose(&d_agg, graph, &mut dx);
            dx
        })
    }

    fn blocks<'a>(&'a self, name: &str, out: &mut Vec<(String, &'a [f64])>) {
        out.push((format!("{name}.w_self"), self.w_self.as_slice().expect("standard layout")));
        out.push((format!("{name}.w_nbr"), self.w_nbr.as_slice().expect("standard layout")));
        out.push((format!("{name}.bias"), self.bias.as_slice().expect("standard layout")));
    }

    fn blocks_mut<'a>(&'a mut self, name: &str, out: &mut Vec<(String, &'a mut [f64])>) {
        out.push((format!("{name}.w_self"), self.w_self.as_slice_mut().expect("standard layout")));
        out.push((format!("{name}.w_nbr"), self.w_nbr.as_slice_mut().expect("standard layout")));
        out.push((format!("{name}.bias"), self.bias.as_slice_mut().expect("standard layout")));
    }
}

/// Row `v` of the result is the mean of `x` over `v`'s neighbours, or zero when isolated.
pub fn mean_aggregate(x: &Array2<f64>, graph: &Graph) -> Array2<f64> {
    let mut agg = Array2::zeros(x.dim());
    for v in 0..graph.num_nodes() {
        let nbrs = graph.neighbors(v);
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        let mut row = agg.row_mut(v);
        for &u in nbrs {
            row.scaled_add(w, &x.row(u));
        }
    }
    agg
}

fn mean_aggregate_transpose(d_agg: &Array2<f64>, graph: &Graph, dx: &mut Array2<f64>) {
    for v in 0..graph.num_nodes() {
        let nbrs = graph.neighbors(v);
        if nbrs.is_empty() {
            continue;
        }
        let w = 1.0 / nbrs.len() as f64;
        let d = d_agg.row(v);
        for &u in nbrs {
            dx.row_mut(u).scaled_add(w, &d);
        }
    }
}

/// `dL/dpre` given `y = tanh(pre)` and `dL/dy`.
pub fn tanh_backward(y: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut d = dy.clone();
    d.zip_mut_with(y, |g, &t| *g *= 1.0 - t * t);
    d
}

pub fn tanh_backward_vec(y: &Array1<f64>, dy: &Array1<f64>) -> Array1<f64> {
    let mut d = dy.clone();
    d.zip_mut_with(y, |g, &t| *g *= 1.0 - t * t);
    d
}

/// Parameter container that can be walked block by block.
pub trait Parameters {
    fn blocks(&self) -> Vec<(String, &[f64])>;
    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])>;

    fn num_parameters(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.blocks().into_iter().flat_map(|(_, b)| b.iter().copied()).collect()
    }

    fn zero(&mut self) {
        for (_, b) in self.blocks_mut() {
            b.fill(0.0);
        }
    }

    fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn push_linear<'a>(l: &'a Linear, name: &str, out: &mut Vec<(String, &'a [f64])>) {
    l.blocks(name, out)
}

pub(crate) fn push_linear_mut<'a>(l: &'a mut Linear, name: &str, out: &mut Vec<(String, &'a mut [f64])>) {
    l.blocks_mut(name, out)
}

pub(crate) fn push_conv<'a>(l: &'a GraphConv, name: &str, out: &mut Vec<(String, &'a [f64])>) {
    l.blocks(name, out)
}

pub(crate) fn push_conv_mut<'a>(l: &'a mut GraphConv, name: &str, out: &mut Vec<(String, &'a mut [f64])>) {
    l.blocks_mut(name, out)
}

/// Categorical over unmasked logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    log_probs: Vec<f64>,
    mask: Vec<bool>,
}

impl Categorical {
    /// # Panics
    /// If no entry is unmasked or the lengths differ.
    pub fn new(logits: &[f64], mask: &[bool]) -> Self {
        assert_eq!(logits.len(), mask.len());
        let max = logits
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&l, _)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max.is_finite(), "categorical needs at least one finite unmasked logit");
        let sum: f64 = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(&l, _)| (l - max).exp()).sum();
        let log_z = max + sum.ln();
        let log_probs = logits
            .iter()
            .zip(mask)
            .map(|(&l, &m)| if m { l - log_z } else { f64::NEG_INFINITY })
            .collect();
        Categorical { log_probs, mask: mask.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_prob(&self, a: usize) -> f64 {
        self.log_probs[a]
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn entropy(&self) -> f64 {
        self.log_probs
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&l, _)| -l.exp() * l)
            .sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (a, (&l, &m)) in self.log_probs.iter().zip(&self.mask).enumerate() {
            if !m {
                continue;
            }
            acc += l.exp();
            last = a;
            if u < acc {
                return a;
            }
        }
        last
    }

    /// Most probable entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        self.argmax_except(usize::MAX).expect("non-empty support")
    }

    /// Most probable valid action other than `skip`; lowest index on ties.
    pub fn argmax_except(&self, skip: usize) -> Option<usize> {
        let mut best = None;
        for (a, (&l, &m)) in self.log_probs.iter().zip(&self.mask).enumerate() {
            if m && a != skip && best.is_none_or(|(_, bl)| l > bl) {
                best = Some((a, l));
            }
        }
        best.map(|(a, _)| a)
    }

    /// Adds `scale · d log p(a) / d logits` into `out`.
    pub fn add_log_prob_grad(&self, a: usize, scale: f64, out: &mut [f64]) {
        for (i, (&l, &m)) in self.log_probs.iter().zip(&self.mask).enumerate() {
            if m {
                out[i] -= scale * l.exp();
            }
        }
        out[a] += scale;
    }

    /// Adds `scale · d entropy / d logits` into `out`.
    pub fn add_entropy_grad(&self, scale: f64, out: &mut [f64]) {
        let h = self.entropy();
        for (i, (&l, &m)) in self.log_probs.iter().zip(&self.mask).enumerate() {
            if m {
                out[i] -= scale * l.exp() * (l + h);
            }
        }
    }
}

/// Bias-corrected first/second moment gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, num_parameters: usize) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; num_parameters],
            v: vec![0.0; num_parameters],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let g: Vec<f64> = grads.flatten();
        let mut k = 0;
        for (_, block) in params.blocks_mut() {
            for p in block.iter_mut() {
                let gi = g[k];
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * gi;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * gi * gi;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                k += 1;
            }
        }
    }
}
