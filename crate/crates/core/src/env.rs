//! Provisioning as an episodic decision process.
//!
//! The state is the current allocation of one frozen scenario (geometry,
//! traffic and the episode's initial allocation). An action reassigns up to
//! `K` distinct LEO satellites; the reward is the discounted score difference
//! minus a per-move churn penalty.

use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, ConstellationSnapshot};
use crate::error::{Error, Result};
use crate::netmodel::{medoid_senior, Allocation, EvalParams, EvalResult, LinkDelays, Objective};
use crate::traffic::{generate_traffic, normalize_volume, TrafficScenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Discount applied to the next-state score in the reward.
    pub gamma: f64,
    /// Weight of the per-move churn penalty.
    pub churn_lambda: f64,
    /// Maximum reassignments per step (`K`).
    pub max_moves: usize,
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { gamma: 0.99, churn_lambda: 0.01, max_moves: 1, max_steps: 64 }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(self.churn_lambda >= 0.0) {
            return Err(Error::Config("churn_lambda must be non-negative".into()));
        }
        if self.max_moves == 0 || self.max_steps == 0 {
            return Err(Error::Config("max_moves and max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Number of per-node features for `n_meo` controllers.
pub fn node_feature_dim(n_meo: usize) -> usize {
    5 + 2 * n_meo
}

/// Frozen geometry, traffic and initial allocation for one episode family.
#[derive(Debug)]
pub struct Scenario {
    pub id: usize,
    snapshot: Arc<ConstellationSnapshot>,
    initial: Allocation,
    objective: Objective,
    traffic_norm: Arc<Array2<f64>>,
    initial_onehot: Arc<Array2<f64>>,
    /// Positions scaled by the MEO orbital radius, per dense node.
    scaled_positions: Vec<[f64; 3]>,
    /// Normalised in+out traffic of each LEO, max 1.
    leo_load: Vec<f64>,
    visibility: Vec<Vec<usize>>,
}

impl Scenario {
    pub fn new(
        id: usize,
        snapshot: Arc<ConstellationSnapshot>,
        traffic: Arc<TrafficScenario>,
        initial: Allocation,
        params: EvalParams,
    ) -> Result<Self> {
        let delays = Arc::new(LinkDelays::new(&snapshot));
        let objective = Objective::new(delays, traffic.clone(), params, &initial)?;
        let (nl, nm) = (snapshot.num_leo(), snapshot.num_meo());
        let traffic_norm = normalize_volume(&traffic);
        let mut leo_load: Vec<f64> =
            (0..nl).map(|j| traffic_norm.row(j).sum() + traffic_norm.column(j).sum()).collect();
        let max_load = leo_load.iter().cloned().fold(0.0, f64::max);
        if max_load > 0.0 {
            leo_load.iter_mut().for_each(|l| *l /= max_load);
        }
        let scale = snapshot
            .meo_positions()
            .iter()
            .chain(snapshot.leo_positions())
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(0.0, f64::max);
        let scaled_positions = snapshot
            .leo_positions()
            .iter()
            .chain(snapshot.meo_positions())
            .map(|p| [p[0] / scale, p[1] / scale, p[2] / scale])
            .collect();
        Ok(Scenario {
            id,
            initial_onehot: Arc::new(onehot(&initial, nl, nm)),
            traffic_norm: Arc::new(traffic_norm),
            visibility: snapshot.visibility_lists(),
            snapshot,
            initial,
            objective,
            scaled_positions,
            leo_load,
        })
    }

    pub fn snapshot(&self) -> &ConstellationSnapshot {
        &self.snapshot
    }

    pub fn traffic(&self) -> &TrafficScenario {
        self.objective.traffic()
    }

    pub fn initial_allocation(&self) -> &Allocation {
        &self.initial
    }

    /// The initial allocation evaluated against itself.
    pub fn baseline(&self) -> &EvalResult {
        self.objective.baseline()
    }

    pub fn params(&self) -> &EvalParams {
        self.objective.params()
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// Objective over this scenario under other evaluation parameters.
    pub fn objective_with(&self, params: EvalParams) -> Result<Objective> {
        self.objective.with_params(params, &self.initial)
    }

    pub fn num_leo(&self) -> usize {
        self.snapshot.num_leo()
    }

    pub fn num_meo(&self) -> usize {
        self.snapshot.num_meo()
    }

    pub fn evaluate(&self, alloc: &Allocation) -> Result<EvalResult> {
        self.objective.evaluate(alloc)
    }

    /// Visibility edges plus LEO–controller edges of `alloc`.
    pub fn graph(&self, alloc: &Allocation) -> Graph {
        let nl = self.num_leo();
        let n = nl + self.num_meo();
        let c = alloc.controller_of();
        let mut extra: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (j, &i) in c.iter().enumerate() {
            if !self.snapshot.is_visible_nodes(j, nl + i) {
                extra[j].push(nl + i);
                extra[nl + i].push(j);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for v in 0..n {
            neighbors.extend_from_slice(&self.visibility[v]);
            neighbors.extend_from_slice(&extra[v]);
            offsets.push(neighbors.len());
        }
        Graph { offsets, neighbors }
    }
}

fn onehot(alloc: &Allocation, nl: usize, nm: usize) -> Array2<f64> {
    let mut m = Array2::zeros((nl, nm));
    for (j, &i) in alloc.controller_of().iter().enumerate() {
        m[[j, i]] = 1.0;
    }
    m
}

/// Undirected adjacency in compressed row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    pub fn from_lists(lists: &[Vec<usize>]) -> Self {
        let mut offsets = vec![0];
        let mut neighbors = Vec::new();
        for l in lists {
            neighbors.extend_from_slice(l);
            offsets.push(neighbors.len());
        }
        Graph { offsets, neighbors }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Same graph with nodes relabelled by `perm` (old index `v` becomes `perm[v]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut lists = vec![Vec::new(); self.num_nodes()];
        for v in 0..self.num_nodes() {
            lists[perm[v]] = self.neighbors(v).iter().map(|&u| perm[u]).collect();
        }
        Graph::from_lists(&lists)
    }
}

/// Samples scenarios `(slot, traffic, initial allocation)` from one constellation.
#[derive(Debug, Clone)]
pub struct ScenarioSampler {
    pub constellation: Constellation,
    pub slot_duration_s: f64,
    /// Slots are drawn uniformly from `0..max_slot`.
    pub max_slot: u64,
    pub n_flows: usize,
    pub volume_scale: f64,
    pub sync_unit: f64,
    pub params: EvalParams,
}

/// How the episode's initial allocation was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialRule {
    Nearest,
    Random,
}

impl ScenarioSampler {
    /// Nearest-MEO initial allocation with probability 1/2, uniform random otherwise.
    pub fn sample(&self, id: usize, seed: u64) -> Result<Scenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = if rng.random_bool(0.5) { InitialRule::Nearest } else { InitialRule::Random };
        self.sample_with_rule(id, &mut rng, rule)
    }

    pub fn sample_with(&self, id: usize, seed: u64, rule: InitialRule) -> Result<Scenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let _ = rng.random_bool(0.5);
        self.sample_with_rule(id, &mut rng, rule)
    }

    fn sample_with_rule(&self, id: usize, rng: &mut ChaCha8Rng, rule: InitialRule) -> Result<Scenario> {
        let slot = rng.random_range(0..self.max_slot.max(1));
        let snapshot = Arc::new(self.constellation.propagate(slot, self.slot_duration_s));
        let traffic = Arc::new(generate_traffic(
            &snapshot,
            self.n_flows,
            self.volume_scale,
            self.sync_unit,
            rng.random(),
        )?);
        let senior = medoid_senior(&snapshot);
        let nm = snapshot.num_meo();
        let initial = match rule {
            InitialRule::Nearest => Allocation::nearest(&snapshot, senior)?,
            InitialRule::Random => Allocation::new(
                (0..snapshot.num_leo()).map(|_| rng.random_range(0..nm)).collect(),
                senior,
                nm,
            )?,
        };
        Scenario::new(id, snapshot, traffic, initial, self.params)
    }
}

/// Encoded MDP state.
#[derive(Debug, Clone)]
pub struct Observation {
    pub traffic_norm: Arc<Array2<f64>>,
    pub initial_onehot: Arc<Array2<f64>>,
    pub current_onehot: Array2<f64>,
    /// Per dense node: scaled position (3), traffic load, MEO flag, current
    /// controller one-hot, initial controller one-hot. A MEO's load is its
    /// domain's share of the total LEO load and its one-hots mark itself.
    pub node_features: Array2<f64>,
    pub allocation: Allocation,
    pub scenario: Arc<Scenario>,
}

impl Observation {
    pub fn num_leo(&self) -> usize {
        self.current_onehot.nrows()
    }

    pub fn num_meo(&self) -> usize {
        self.current_onehot.ncols()
    }

    pub fn graph(&self) -> Graph {
        self.scenario.graph(&self.allocation)
    }

    pub fn flat_len(&self) -> usize {
        self.traffic_norm.len() + self.initial_onehot.len() + self.current_onehot.len() + self.node_features.len()
    }

    /// Traffic, initial one-hot, current one-hot and node features, row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.flat_len());
        v.extend(self.traffic_norm.iter());
        v.extend(self.initial_onehot.iter());
        v.extend(self.current_onehot.iter());
        v.extend(self.node_features.iter());
        v
    }
}

pub fn encode(alloc: &Allocation, scenario: &Arc<Scenario>) -> Observation {
    let (nl, nm) = (scenario.num_leo(), scenario.num_meo());
    let f = node_feature_dim(nm);
    let mut feats = Array2::zeros((nl + nm, f));
    let c = alloc.controller_of();
    let init = scenario.initial.controller_of();
    let total_load: f64 = scenario.leo_load.iter().sum();
    let mut domain_load = vec![0.0; nm];
    for j in 0..nl {
        let p = scenario.scaled_positions[j];
        let mut row = feats.row_mut(j);
        row[0] = p[0];
        row[1] = p[1];
        row[2] = p[2];
        row[3] = scenario.leo_load[j];
        row[5 + c[j]] = 1.0;
        row[5 + nm + init[j]] = 1.0;
        domain_load[c[j]] += scenario.leo_load[j];
    }
    for i in 0..nm {
        let p = scenario.scaled_positions[nl + i];
        let mut row = feats.row_mut(nl + i);
        row[0] = p[0];
        row[1] = p[1];
        row[2] = p[2];
        row[3] = if total_load > 0.0 { domain_load[i] / total_load } else { 0.0 };
        row[4] = 1.0;
        row[5 + i] = 1.0;
        row[5 + nm + i] = 1.0;
    }
    Observation {
        traffic_norm: scenario.traffic_norm.clone(),
        initial_onehot: scenario.initial_onehot.clone(),
        current_onehot: onehot(alloc, nl, nm),
        node_features: feats,
        allocation: alloc.clone(),
        scenario: scenario.clone(),
    }
}

/// Up to `K` reassignments `(leo, meo)` with distinct LEO indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet {
    moves: Vec<(usize, usize)>,
}

impl ActionSet {
    pub fn new(moves: Vec<(usize, usize)>) -> Self {
        ActionSet { moves }
    }

    pub fn empty() -> Self {
        ActionSet::default()
    }

    pub fn moves(&self) -> &[(usize, usize)] {
        &self.moves
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn validate(&self, n_leo: usize, n_meo: usize, max_moves: usize) -> Result<()> {
        if self.moves.len() > max_moves {
            return Err(Error::InvalidAction(format!(
                "{} moves exceed the budget of {max_moves}",
                self.moves.len()
            )));
        }
        for (k, &(leo, meo)) in self.moves.iter().enumerate() {
            if leo >= n_leo || meo >= n_meo {
                return Err(Error::InvalidAction(format!("move ({leo}, {meo}) out of range")));
            }
            if self.moves[..k].iter().any(|&(l, _)| l == leo) {
                return Err(Error::InvalidAction(format!("LEO {leo} moved twice")));
            }
        }
        Ok(())
    }
}

/// Per-head validity masks. The LEO head has one extra trailing STOP entry;
/// `meo[j]` excludes LEO `j`'s current controller, so every move changes the
/// allocation. With a single controller only STOP is valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMasks {
    pub leo: Vec<bool>,
    pub meo: Vec<Vec<bool>>,
}

pub fn valid_actions_mask(obs: &Observation) -> ActionMasks {
    masks_for(obs.allocation.controller_of(), obs.num_meo())
}

pub fn masks_for(controller_of: &[usize], num_meo: usize) -> ActionMasks {
    let mut leo = vec![num_meo > 1; controller_of.len() + 1];
    leo[controller_of.len()] = true;
    let meo = controller_of
        .iter()
        .map(|&c| (0..num_meo).map(|m| m != c).collect())
        .collect();
    ActionMasks { leo, meo }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInfo {
    pub score_before: f64,
    pub score_after: f64,
    pub moves: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One row of an optional episode trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub m: usize,
    pub score: f64,
    pub reward: f64,
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ProvisioningEnv {
    scenario: Arc<Scenario>,
    config: EnvConfig,
    current: Allocation,
    score: f64,
    steps: usize,
}

impl ProvisioningEnv {
    pub fn new(scenario: Arc<Scenario>, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let current = scenario.initial.clone();
        let score = scenario.evaluate(&current)?.score;
        Ok(ProvisioningEnv { scenario, config, current, score, steps: 0 })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn allocation(&self) -> &Allocation {
        &self.current
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn reset(&mut self) -> Result<Observation> {
        let b = self.scenario.baseline();
        if !(b.o_total > 0.0 && b.d_avg > 0.0) {
            return Err(Error::Normalization("scenario baseline is degenerate".into()));
        }
        self.current = self.scenario.initial.clone();
        self.score = self.scenario.evaluate(&self.current)?.score;
        self.steps = 0;
        Ok(self.observe())
    }

    pub fn observe(&self) -> Observation {
        encode(&self.current, &self.scenario)
    }

    /// Restores an arbitrary state of the same scenario.
    pub fn restore(&mut self, alloc: Allocation, steps: usize) -> Result<()> {
        self.score = self.scenario.evaluate(&alloc)?.score;
        self.current = alloc;
        self.steps = steps;
        Ok(())
    }

    /// Applies `action`; an invalid action leaves the state untouched.
    pub fn step(&mut self, action: &ActionSet) -> Result<StepOutcome> {
        if self.steps >= self.config.max_steps {
            return Err(Error::InvalidAction("episode already finished".into()));
        }
        action.validate(self.scenario.num_leo(), self.scenario.num_meo(), self.config.max_moves)?;
        let mut next = self.current.clone();
        for &(leo, meo) in action.moves() {
            next.reassign(leo, meo)?;
        }
        let after = self.scenario.evaluate(&next)?.score;
        let before = self.score;
        let m = action.len();
        let reward = self.config.gamma * after - before - self.config.churn_lambda * m as f64;
        self.current = next;
        self.score = after;
        self.steps += 1;
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            done: self.steps >= self.config.max_steps,
            info: StepInfo { score_before: before, score_after: after, moves: m },
        })
    }
}
