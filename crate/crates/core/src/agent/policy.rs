//! Graph-encoder actor-critic.
//!
//! The encoder runs `layers` rounds of mean-aggregation message passing over
//! all satellites. With `h_j` the embedding of LEO `j` and `g` the mean over
//! all nodes:
//!
//! * LEO-or-STOP head: `logit_j = MLP([h_j, g])`, `logit_stop = w·g + b`;
//! * MEO head for a chosen LEO `j`: `MLP([g, h_j]) ∈ R^{N_M}`;
//! * value head: `MLP(g)`.
//!
//! An action is a sequence of up to `K` (LEO, MEO) picks, each LEO sampled
//! without replacement, ended early by STOP.

use std::collections::HashSet;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{
    push_conv, push_conv_mut, push_linear, push_linear_mut, tanh_backward, tanh_backward_vec, Categorical,
    GraphConv, Linear, Parameters,
};
use crate::env::{masks_for, ActionSet, Graph, Observation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub num_meo: usize,
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden_dim == 0 || self.input_dim == 0 || self.num_meo == 0 {
            return Err(Error::Config(format!("invalid architecture {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub arch: ArchConfig,
    pub encoder: Vec<GraphConv>,
    pub leo_hidden: Linear,
    pub leo_out: Linear,
    pub stop: Linear,
    pub meo_hidden: Linear,
    pub meo_out: Linear,
    pub value_hidden: Linear,
    pub value_out: Linear,
}

impl Parameters for PolicyNet {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, conv) in self.encoder.iter().enumerate() {
            push_conv(conv, &format!("encoder.{l}"), &mut out);
        }
        push_linear(&self.leo_hidden, "leo_hidden", &mut out);
        push_linear(&self.leo_out, "leo_out", &mut out);
        push_linear(&self.stop, "stop", &mut out);
        push_linear(&self.meo_hidden, "meo_hidden", &mut out);
        push_linear(&self.meo_out, "meo_out", &mut out);
        push_linear(&self.value_hidden, "value_hidden", &mut out);
        push_linear(&self.value_out, "value_out", &mut out);
        out
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (l, conv) in self.encoder.iter_mut().enumerate() {
            push_conv_mut(conv, &format!("encoder.{l}"), &mut out);
        }
        push_linear_mut(&mut self.leo_hidden, "leo_hidden", &mut out);
        push_linear_mut(&mut self.leo_out, "leo_out", &mut out);
        push_linear_mut(&mut self.stop, "stop", &mut out);
        push_linear_mut(&mut self.meo_hidden, "meo_hidden", &mut out);
        push_linear_mut(&mut self.meo_out, "meo_out", &mut out);
        push_linear_mut(&mut self.value_hidden, "value_hidden", &mut out);
        push_linear_mut(&mut self.value_out, "value_out", &mut out);
        out
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    graph: Graph,
    num_leo: usize,
    /// Controller of every LEO in the observed state.
    current: Vec<usize>,
    inputs: Vec<Array2<f64>>,
    aggregates: Vec<Array2<f64>>,
    embeddings: Array2<f64>,
    pub pooled: Array1<f64>,
    leo_input: Array2<f64>,
    leo_act: Array2<f64>,
    /// `N_L` LEO logits followed by the STOP logit.
    pub logits: Vec<f64>,
    value_act: Array1<f64>,
    pub value: f64,
}

impl Forward {
    pub fn embeddings(&self) -> &Array2<f64> {
        &self.embeddings
    }

    pub fn num_leo(&self) -> usize {
        self.num_leo
    }

    pub fn stop_index(&self) -> usize {
        self.num_leo
    }
}

/// MEO head activations for one chosen LEO.
#[derive(Debug, Clone)]
pub struct MeoHead {
    pub leo: usize,
    input: Array1<f64>,
    act: Array1<f64>,
    pub logits: Vec<f64>,
}

/// Sampled sub-decisions of one action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub picks: Vec<(usize, usize)>,
    /// True when the sequence ended with STOP rather than exhausting `K`.
    pub stopped: bool,
}

impl Decision {
    pub fn to_action(&self) -> ActionSet {
        ActionSet::new(self.picks.clone())
    }
}

/// Distributions visited while scoring a decision.
#[derive(Debug, Clone)]
pub struct DecisionEval {
    pub log_prob: f64,
    pub entropy: f64,
    leo_steps: Vec<(Categorical, usize)>,
    meo_steps: Vec<(MeoHead, Categorical, usize)>,
}

impl DecisionEval {
    /// `dL/dlogits` for every head given `dL/dlog_prob` and `dL/dentropy`.
    pub fn logit_grads(&self, num_leo: usize, d_log_prob: f64, d_entropy: f64) -> (Vec<f64>, Vec<(MeoHead, Vec<f64>)>) {
        let mut d_leo = vec![0.0; num_leo + 1];
        for (dist, a) in &self.leo_steps {
            dist.add_log_prob_grad(*a, d_log_prob, &mut d_leo);
            dist.add_entropy_grad(d_entropy, &mut d_leo);
        }
        let meo = self
            .meo_steps
            .iter()
            .map(|(head, dist, b)| {
                let mut d = vec![0.0; dist.len()];
                dist.add_log_prob_grad(*b, d_log_prob, &mut d);
                dist.add_entropy_grad(d_entropy, &mut d);
                (head.clone(), d)
            })
            .collect();
        (d_leo, meo)
    }
}

enum Pick<'a, R> {
    Sample(&'a mut R),
    Greedy(Option<&'a HashSet<Vec<usize>>>),
    Given(&'a Decision),
}

impl PolicyNet {
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = arch.hidden_dim;
        let mut encoder = Vec::with_capacity(arch.layers);
        for l in 0..arch.layers {
            let input = if l == 0 { arch.input_dim } else { h };
            encoder.push(GraphConv::init(input, h, &mut rng));
        }
        Ok(PolicyNet {
            arch,
            encoder,
            leo_hidden: Linear::init(2 * h, h, 1.0, &mut rng),
            leo_out: Linear::init(h, 1, 0.01, &mut rng),
            stop: Linear::init(h, 1, 0.01, &mut rng),
            meo_hidden: Linear::init(2 * h, h, 1.0, &mut rng),
            meo_out: Linear::init(h, arch.num_meo, 0.01, &mut rng),
            value_hidden: Linear::init(h, h, 1.0, &mut rng),
            value_out: Linear::init(h, 1, 1.0, &mut rng),
        })
    }

    /// All-zero network of the same shape.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero();
        z
    }

    pub fn forward(&self, obs: &Observation) -> Result<Forward> {
        if obs.num_meo() != self.arch.num_meo || obs.node_features.ncols() != self.arch.input_dim {
            return Err(Error::Config(format!(
                "observation with {} MEO / {} features does not fit network {:?}",
                obs.num_meo(),
                obs.node_features.ncols(),
                self.arch
            )));
        }
        Ok(self.forward_graph(&obs.node_features, obs.graph(), obs.allocation.controller_of()))
    }

    /// Forward pass over arbitrary node features; the first `current.len()`
    /// rows are LEOs assigned to `current`.
    pub fn forward_graph(&self, features: &Array2<f64>, graph: Graph, current: &[usize]) -> Forward {
        let num_leo = current.len();
        let n = features.nrows();
        let mut inputs = Vec::with_capacity(self.encoder.len());
        let mut aggregates = Vec::with_capacity(self.encoder.len());
        let mut x = features.clone();
        for conv in &self.encoder {
            let (agg, out) = conv.forward(&x, &graph);
            inputs.push(x);
            aggregates.push(agg);
            x = out;
        }
        let embeddings = x;
        let pooled = embeddings.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(self.arch.hidden_dim));

        let leo_emb = embeddings.slice(s![..num_leo, ..]);
        let pooled_rows = pooled.broadcast((num_leo, pooled.len())).expect("broadcast pooled");
        let leo_input = concatenate(Axis(1), &[leo_emb, pooled_rows]).expect("concat leo input");
        let mut leo_act = self.leo_hidden.forward(&leo_input);
        leo_act.mapv_inplace(f64::tanh);
        let mut logits: Vec<f64> = self.leo_out.forward(&leo_act).column(0).to_vec();
        logits.push(self.stop.forward_vec(pooled.view())[0]);

        let value_act = self.value_hidden.forward_vec(pooled.view()).mapv(f64::tanh);
        let value = self.value_out.forward_vec(value_act.view())[0];
        debug_assert_eq!(n, graph.num_nodes());
        Forward {
            graph,
            num_leo,
            current: current.to_vec(),
            inputs,
            aggregates,
            embeddings,
            pooled,
            leo_input,
            leo_act,
            logits,
            value_act,
            value,
        }
    }

    pub fn meo_head(&self, fwd: &Forward, leo: usize) -> MeoHead {
        let input = concatenate(Axis(0), &[fwd.pooled.view(), fwd.embeddings.row(leo)]).expect("concat meo input");
        let act = self.meo_hidden.forward_vec(input.view()).mapv(f64::tanh);
        let logits = self.meo_out.forward_vec(act.view()).to_vec();
        MeoHead { leo, input, act, logits }
    }

    pub fn sample<R: Rng>(&self, fwd: &Forward, max_moves: usize, rng: &mut R) -> (Decision, DecisionEval) {
        self.walk(fwd, max_moves, Pick::Sample(rng))
    }

    /// Stops when STOP is at least as likely as moving at all, otherwise
    /// takes the most probable LEO and then its most probable MEO.
    pub fn greedy(&self, fwd: &Forward, max_moves: usize) -> (Decision, DecisionEval) {
        self.walk::<ChaCha8Rng>(fwd, max_moves, Pick::Greedy(None))
    }

    /// As [`greedy`](Self::greedy), never moving into an assignment in `visited`
    /// (controller vectors of length `N_L`).
    pub fn greedy_avoiding(
        &self,
        fwd: &Forward,
        max_moves: usize,
        visited: &HashSet<Vec<usize>>,
    ) -> (Decision, DecisionEval) {
        self.walk::<ChaCha8Rng>(fwd, max_moves, Pick::Greedy(Some(visited)))
    }

    /// Log-probability and entropy of a previously taken decision.
    pub fn evaluate(&self, fwd: &Forward, decision: &Decision, max_moves: usize) -> DecisionEval {
        self.walk::<ChaCha8Rng>(fwd, max_moves, Pick::Given(decision)).1
    }

    fn walk<R: Rng>(&self, fwd: &Forward, max_moves: usize, mut pick: Pick<'_, R>) -> (Decision, DecisionEval) {
        let nl = fwd.num_leo;
        let mut masks = masks_for(&fwd.current, self.arch.num_meo);
        let mut assignment = fwd.current.clone();
        let mut mask = masks.leo.clone();
        let mut decision = Decision { picks: Vec::new(), stopped: false };
        let mut eval = DecisionEval { log_prob: 0.0, entropy: 0.0, leo_steps: Vec::new(), meo_steps: Vec::new() };
        for step in 0..max_moves {
            if let Pick::Greedy(Some(visited)) = &pick {
                for v in visited.iter() {
                    let mut diff = (0..nl).filter(|&j| v[j] != assignment[j]);
                    if let (Some(j), None) = (diff.next(), diff.next()) {
                        masks.meo[j][v[j]] = false;
                        mask[j] = mask[j] && masks.meo[j].iter().any(|&x| x);
                    }
                }
            }
            let dist = Categorical::new(&fwd.logits, &mask);
            let a = match &mut pick {
                Pick::Sample(rng) => dist.sample(*rng),
                Pick::Greedy(_) => match dist.argmax_except(nl) {
                    Some(j) if dist.log_prob(nl).exp() < 0.5 => j,
                    _ => nl,
                },
                Pick::Given(d) => d.picks.get(step).map_or(nl, |p| p.0),
            };
            eval.log_prob += dist.log_prob(a);
            eval.entropy += dist.entropy();
            eval.leo_steps.push((dist, a));
            if a == nl {
                decision.stopped = true;
                break;
            }
            let head = self.meo_head(fwd, a);
            let mdist = Categorical::new(&head.logits, &masks.meo[a]);
            let b = match &mut pick {
                Pick::Sample(rng) => mdist.sample(*rng),
                Pick::Greedy(_) => mdist.argmax(),
                Pick::Given(d) => d.picks[step].1,
            };
            eval.log_prob += mdist.log_prob(b);
            eval.entropy += mdist.entropy();
            eval.meo_steps.push((head, mdist, b));
            decision.picks.push((a, b));
            assignment[a] = b;
            mask[a] = false;
        }
        (decision, eval)
    }

    /// Accumulates parameter gradients for the given output gradients.
    pub fn backward(
        &self,
        fwd: &Forward,
        d_logits: &[f64],
        meo: &[(MeoHead, Vec<f64>)],
        d_value: f64,
        grads: &mut PolicyNet,
    ) {
        let nl = fwd.num_leo;
        let h = self.arch.hidden_dim;
        let mut d_emb = Array2::<f64>::zeros(fwd.embeddings.dim());
        let mut d_pooled = Array1::<f64>::zeros(h);

        if d_value != 0.0 {
            let dv = Array1::from_elem(1, d_value);
            let d_act = self.value_out.backward_vec(fwd.value_act.view(), dv.view(), &mut grads.value_out);
            let d_pre = tanh_backward_vec(&fwd.value_act, &d_act);
            d_pooled += &self.value_hidden.backward_vec(fwd.pooled.view(), d_pre.view(), &mut grads.value_hidden);
        }

        let d_stop = d_logits[nl];
        if d_stop != 0.0 {
            let ds = Array1::from_elem(1, d_stop);
            d_pooled += &self.stop.backward_vec(fwd.pooled.view(), ds.view(), &mut grads.stop);
        }

        if d_logits[..nl].iter().any(|&d| d != 0.0) {
            let d_out = Array2::from_shape_vec((nl, 1), d_logits[..nl].to_vec()).expect("shape");
            let d_act = self.leo_out.backward(&fwd.leo_act, &d_out, &mut grads.leo_out);
            let d_pre = tanh_backward(&fwd.leo_act, &d_act);
            let d_in = self.leo_hidden.backward(&fwd.leo_input, &d_pre, &mut grads.leo_hidden);
            d_emb.slice_mut(s![..nl, ..]).scaled_add(1.0, &d_in.slice(s![.., ..h]));
            d_pooled += &d_in.slice(s![.., h..]).sum_axis(Axis(0));
        }

        for (head, d) in meo {
            let d_out = Array1::from_vec(d.clone());
            let d_act = self.meo_out.backward_vec(head.act.view(), d_out.view(), &mut grads.meo_out);
            let d_pre = tanh_backward_vec(&head.act, &d_act);
            let d_in = self.meo_hidden.backward_vec(head.input.view(), d_pre.view(), &mut grads.meo_hidden);
            d_pooled += &d_in.slice(s![..h]);
            d_emb.row_mut(head.leo).scaled_add(1.0, &d_in.slice(s![h..]));
        }

        let n = fwd.embeddings.nrows();
        if n > 0 {
            d_emb += &(d_pooled / n as f64);
        }
        let mut d_out = d_emb;
        for l in (0..self.encoder.len()).rev() {
            let out = if l + 1 < self.encoder.len() { &fwd.inputs[l + 1] } else { &fwd.embeddings };
            let dx = self.encoder[l].backward(
                &fwd.inputs[l],
                &fwd.aggregates[l],
                out,
                &d_out,
                &fwd.graph,
                &mut grads.encoder[l],
                l > 0,
            );
            match dx {
                Some(dx) => d_out = dx,
                None => break,
            }
        }
    }
}
