//! Overhead, delay and score of a controller allocation.
//!
//! Overheads are volume·seconds (or seconds for path computation) in abstract
//! cost units; only their ratio against a baseline allocation enters the score.

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::constellation::{propagation_delay, ConstellationSnapshot, SatelliteId};
use crate::error::{Error, Result};
use crate::traffic::TrafficScenario;

/// Partition of the LEO satellites into controller domains plus the senior controller.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "AllocationRepr")]
pub struct Allocation {
    controller_of: Vec<usize>,
    senior: usize,
    num_controllers: usize,
}

#[derive(Deserialize)]
struct AllocationRepr {
    controller_of: Vec<usize>,
    senior: usize,
    num_controllers: usize,
}

impl TryFrom<AllocationRepr> for Allocation {
    type Error = Error;

    fn try_from(r: AllocationRepr) -> Result<Self> {
        Allocation::new(r.controller_of, r.senior, r.num_controllers)
    }
}

impl Allocation {
    pub fn new(controller_of: Vec<usize>, senior: usize, num_controllers: usize) -> Result<Self> {
        if num_controllers == 0 {
            return Err(Error::InvalidAllocation("no controllers".into()));
        }
        if senior >= num_controllers {
            return Err(Error::InvalidAllocation(format!(
                "senior {senior} out of range for {num_controllers} controllers"
            )));
        }
        if let Some((j, &c)) = controller_of.iter().enumerate().find(|(_, &c)| c >= num_controllers) {
            return Err(Error::InvalidAllocation(format!(
                "LEO {j} assigned to controller {c} of {num_controllers}"
            )));
        }
        Ok(Allocation { controller_of, senior, num_controllers })
    }

    /// Every LEO assigned to its nearest MEO; ties go to the lowest MEO index.
    pub fn nearest(snapshot: &ConstellationSnapshot, senior: usize) -> Result<Self> {
        let controller_of = (0..snapshot.num_leo())
            .map(|j| {
                (0..snapshot.num_meo())
                    .map(|i| (i, snapshot.distance(SatelliteId::Leo(j), SatelliteId::Meo(i))))
                    .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                    .0
            })
            .collect();
        Self::new(controller_of, senior, snapshot.num_meo())
    }

    pub fn controller_of(&self) -> &[usize] {
        &self.controller_of
    }

    pub fn senior(&self) -> usize {
        self.senior
    }

    pub fn num_controllers(&self) -> usize {
        self.num_controllers
    }

    pub fn num_leo(&self) -> usize {
        self.controller_of.len()
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_controllers];
        for &c in &self.controller_of {
            sizes[c] += 1;
        }
        sizes
    }

    /// Members of controller `i`'s domain, ascending.
    pub fn domain(&self, i: usize) -> Vec<usize> {
        (0..self.controller_of.len()).filter(|&j| self.controller_of[j] == i).collect()
    }

    pub fn reassign(&mut self, leo: usize, controller: usize) -> Result<()> {
        if leo >= self.controller_of.len() || controller >= self.num_controllers {
            return Err(Error::InvalidAllocation(format!(
                "move ({leo} -> {controller}) out of range"
            )));
        }
        self.controller_of[leo] = controller;
        Ok(())
    }

    /// Replaces the assignment vector, keeping the senior.
    pub fn with_assignment(&self, controller_of: Vec<usize>) -> Result<Self> {
        Self::new(controller_of, self.senior, self.num_controllers)
    }

    fn check_against(&self, n_leo: usize, n_meo: usize) -> Result<()> {
        if self.controller_of.len() != n_leo || self.num_controllers != n_meo {
            return Err(Error::InvalidAllocation(format!(
                "allocation shape {}x{} does not match {n_leo} LEO / {n_meo} MEO",
                self.controller_of.len(),
                self.num_controllers
            )));
        }
        Ok(())
    }
}

/// The MEO with minimum summed distance to all other MEOs; ties go to the lowest index.
pub fn medoid_senior(snapshot: &ConstellationSnapshot) -> usize {
    let n = snapshot.num_meo();
    let mut best = (0, f64::INFINITY);
    for i in 0..n {
        let total: f64 = (0..n)
            .map(|k| snapshot.distance(SatelliteId::Meo(i), SatelliteId::Meo(k)))
            .sum();
        if total < best.1 {
            best = (i, total);
        }
    }
    best.0
}

/// How flows are charged in the average response delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    /// Intra-domain flows pay `D_intra` of their domain, cross-domain flows
    /// additionally pay `D_inter`.
    #[default]
    PerFlow,
    /// Every flow pays `D_intra` of its source domain plus `D_inter`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub alpha: f64,
    /// Intra-domain path computation coefficient, seconds per `n·log2(n+1)`.
    pub c_ospf_s: f64,
    /// Inter-domain path computation coefficient, seconds per controller pair.
    pub c_bgp_s: f64,
    /// Score term applied when a ratio is not below `1 - eps_clip`.
    pub penalty: f64,
    pub eps_clip: f64,
    pub delay_model: DelayModel,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            alpha: 0.5,
            c_ospf_s: 1e-4,
            c_bgp_s: 1e-3,
            penalty: -5.0,
            eps_clip: 1e-6,
            delay_model: DelayModel::PerFlow,
        }
    }
}

impl EvalParams {
    pub fn with_alpha(self, alpha: f64) -> Self {
        EvalParams { alpha, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.penalty < 0.0) {
            return Err(Error::Config(format!("penalty must be negative, got {}", self.penalty)));
        }
        if !(self.eps_clip > 0.0 && self.eps_clip < 1.0) {
            return Err(Error::Config(format!("eps_clip {} outside (0, 1)", self.eps_clip)));
        }
        if !(self.c_ospf_s >= 0.0 && self.c_bgp_s >= 0.0) {
            return Err(Error::Config("path computation coefficients must be non-negative".into()));
        }
        Ok(())
    }

    /// `D^p_i` for a domain of `size` members.
    pub fn intra_path_delay(&self, size: usize) -> f64 {
        let n = size as f64;
        self.c_ospf_s * n * (n + 1.0).log2()
    }

    /// `D^p_*` for `n_meo` controllers.
    pub fn inter_path_delay(&self, n_meo: usize) -> f64 {
        self.c_bgp_s * (n_meo * n_meo) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub o_syn: f64,
    pub o_flow: f64,
    pub o_path: f64,
    pub o_total: f64,
    pub d_intra: Vec<f64>,
    pub d_inter: f64,
    pub d_avg: f64,
    pub o_ratio: f64,
    pub d_ratio: f64,
    /// Enhanced overhead, `ln(1 - o_ratio)/2` or the penalty.
    pub term_o: f64,
    /// Enhanced delay, `ln(1 - d_ratio)/2` or the penalty.
    pub term_d: f64,
    pub score: f64,
}

/// Light-time between every LEO and MEO and between MEO pairs.
#[derive(Debug, Clone)]
pub struct LinkDelays {
    leo_meo: Array2<f64>,
    meo_meo: Array2<f64>,
}

impl LinkDelays {
    pub fn new(snapshot: &ConstellationSnapshot) -> Self {
        let (nl, nm) = (snapshot.num_leo(), snapshot.num_meo());
        let leo_meo = Array2::from_shape_fn((nl, nm), |(j, i)| {
            propagation_delay(snapshot.distance(SatelliteId::Leo(j), SatelliteId::Meo(i)))
        });
        let meo_meo = Array2::from_shape_fn((nm, nm), |(a, b)| {
            propagation_delay(snapshot.distance(SatelliteId::Meo(a), SatelliteId::Meo(b)))
        });
        LinkDelays { leo_meo, meo_meo }
    }

    pub fn num_leo(&self) -> usize {
        self.leo_meo.nrows()
    }

    pub fn num_meo(&self) -> usize {
        self.leo_meo.ncols()
    }

    /// `speed_{j,i}` between LEO `j` and MEO `i`.
    pub fn leo_to_meo(&self, leo: usize, meo: usize) -> f64 {
        self.leo_meo[[leo, meo]]
    }

    pub fn meo_to_meo(&self, a: usize, b: usize) -> f64 {
        self.meo_meo[[a, b]]
    }
}

/// Raw (un-normalised) overhead and delay components.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub o_syn: f64,
    pub o_flow: f64,
    pub o_path: f64,
    pub d_intra: Vec<f64>,
    pub d_inter: f64,
    pub d_avg: f64,
}

impl Breakdown {
    pub fn o_total(&self) -> f64 {
        self.o_syn + self.o_flow + self.o_path
    }
}

/// Evaluates allocations against one geometry and traffic pair.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    delays: &'a LinkDelays,
    traffic: &'a TrafficScenario,
}

impl<'a> Evaluator<'a> {
    pub fn new(delays: &'a LinkDelays, traffic: &'a TrafficScenario) -> Result<Self> {
        if delays.num_leo() != traffic.num_leo() {
            return Err(Error::Config(format!(
                "traffic covers {} LEO but geometry has {}",
                traffic.num_leo(),
                delays.num_leo()
            )));
        }
        Ok(Evaluator { delays, traffic })
    }

    pub fn breakdown(&self, alloc: &Allocation, params: &EvalParams) -> Result<Breakdown> {
        let (nl, nm) = (self.delays.num_leo(), self.delays.num_meo());
        alloc.check_against(nl, nm)?;
        let c = alloc.controller_of();
        let senior = alloc.senior();
        let to_senior: Vec<f64> = (0..nm).map(|i| self.delays.meo_to_meo(i, senior)).collect();
        let sizes = alloc.domain_sizes();
        let sync = self.traffic.sync_unit();

        // Per domain: intra-domain volume·speed, outgoing cross-domain volume,
        // intra flow count, outgoing cross-domain flow count.
        let mut intra_cost = vec![0.0; nm];
        let mut cross_volume = vec![0.0; nm];
        let mut intra_flows = vec![0u64; nm];
        let mut cross_flows = vec![0u64; nm];
        for e in self.traffic.entries() {
            let (cs, cd) = (c[e.src], c[e.dst]);
            if cs == cd {
                intra_cost[cs] += e.volume * self.delays.leo_to_meo(e.src, cs);
                intra_flows[cs] += e.flows as u64;
            } else {
                cross_volume[cs] += e.volume;
                cross_flows[cs] += e.flows as u64;
            }
        }

        let mut farthest_member = vec![0.0_f64; nm];
        for (j, &i) in c.iter().enumerate() {
            farthest_member[i] = farthest_member[i].max(self.delays.leo_to_meo(j, i));
        }
        let senior_sync = sync * nm as f64;
        let o_syn = (0..nm).map(|i| sync * sizes[i] as f64 * farthest_member[i]).sum::<f64>()
            + senior_sync * to_senior.iter().cloned().fold(0.0, f64::max);

        let cross_cost: f64 = (0..nm).map(|i| cross_volume[i] * to_senior[i]).sum();
        let o_flow = intra_cost.iter().sum::<f64>() + cross_cost;

        let intra_path: Vec<f64> = sizes.iter().map(|&s| params.intra_path_delay(s)).collect();
        let inter_path = params.inter_path_delay(nm);
        let o_path = intra_path.iter().sum::<f64>() + inter_path;

        let d_intra: Vec<f64> = (0..nm)
            .map(|i| senior_sync * to_senior[i] + intra_path[i] + intra_cost[i])
            .collect();
        let d_inter = d_intra.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + cross_cost + inter_path;

        let total_flows: u64 = intra_flows.iter().sum::<u64>() + cross_flows.iter().sum::<u64>();
        let d_avg = if total_flows == 0 {
            0.0
        } else {
            let weighted: f64 = match params.delay_model {
                DelayModel::PerFlow => (0..nm)
                    .map(|i| {
                        intra_flows[i] as f64 * d_intra[i]
                            + cross_flows[i] as f64 * (d_intra[i] + d_inter)
                    })
                    .sum(),
                DelayModel::Literal => (0..nm)
                    .map(|i| (intra_flows[i] + cross_flows[i]) as f64 * (d_intra[i] + d_inter))
                    .sum(),
            };
            weighted / total_flows as f64
        };

        Ok(Breakdown { o_syn, o_flow, o_path, d_intra, d_inter, d_avg })
    }

    pub fn evaluate(
        &self,
        alloc: &Allocation,
        params: &EvalParams,
        baseline: Option<&EvalResult>,
    ) -> Result<EvalResult> {
        let b = self.breakdown(alloc, params)?;
        finish(b, params, baseline.map(|r| (r.o_total, r.d_avg)))
    }

    /// Score of `alloc` against baseline totals `(O_total, D_avg)`.
    pub fn score_against(&self, alloc: &Allocation, params: &EvalParams, baseline: (f64, f64)) -> Result<f64> {
        let b = self.breakdown(alloc, params)?;
        Ok(finish(b, params, Some(baseline))?.score)
    }
}

/// Owned evaluator bound to a baseline allocation's totals and fixed parameters.
#[derive(Debug, Clone)]
pub struct Objective {
    delays: Arc<LinkDelays>,
    traffic: Arc<TrafficScenario>,
    params: EvalParams,
    baseline: EvalResult,
}

impl Objective {
    /// Fails when the baseline's `O_total` or `D_avg` is zero.
    pub fn new(
        delays: Arc<LinkDelays>,
        traffic: Arc<TrafficScenario>,
        params: EvalParams,
        baseline_alloc: &Allocation,
    ) -> Result<Self> {
        params.validate()?;
        let baseline = Evaluator::new(&delays, &traffic)?.evaluate(baseline_alloc, &params, None)?;
        if baseline.o_total == 0.0 || baseline.d_avg == 0.0 {
            return Err(Error::Normalization(format!(
                "baseline O_total = {}, D_avg = {}",
                baseline.o_total, baseline.d_avg
            )));
        }
        Ok(Objective { delays, traffic, params, baseline })
    }

    pub fn params(&self) -> &EvalParams {
        &self.params
    }

    /// Evaluation of the baseline allocation against itself.
    pub fn baseline(&self) -> &EvalResult {
        &self.baseline
    }

    pub fn delays(&self) -> &Arc<LinkDelays> {
        &self.delays
    }

    pub fn traffic(&self) -> &Arc<TrafficScenario> {
        &self.traffic
    }

    pub fn evaluate(&self, alloc: &Allocation) -> Result<EvalResult> {
        Evaluator::new(&self.delays, &self.traffic)?.evaluate(alloc, &self.params, Some(&self.baseline))
    }

    pub fn score(&self, alloc: &Allocation) -> Result<f64> {
        self.evaluate(alloc).map(|r| r.score)
    }

    /// Same geometry and baseline allocation under different parameters.
    pub fn with_params(&self, params: EvalParams, baseline_alloc: &Allocation) -> Result<Self> {
        Self::new(self.delays.clone(), self.traffic.clone(), params, baseline_alloc)
    }
}

fn finish(b: Breakdown, params: &EvalParams, baseline: Option<(f64, f64)>) -> Result<EvalResult> {
    let o_total = b.o_total();
    let (o_ratio, d_ratio) = match baseline {
        None => (1.0, 1.0),
        Some((o0, d0)) => {
            if o0 == 0.0 || d0 == 0.0 {
                return Err(Error::Normalization(format!(
                    "baseline O_total = {o0}, D_avg = {d0}"
                )));
            }
            (o_total / o0, b.d_avg / d0)
        }
    };
    let term_o = enhancement_term(o_ratio, params)?;
    let term_d = enhancement_term(d_ratio, params)?;
    Ok(EvalResult {
        o_syn: b.o_syn,
        o_flow: b.o_flow,
        o_path: b.o_path,
        o_total,
        d_intra: b.d_intra,
        d_inter: b.d_inter,
        d_avg: b.d_avg,
        o_ratio,
        d_ratio,
        term_o,
        term_d,
        score: combine(term_o, term_d, params.alpha),
    })
}

/// `ln(1 - ratio)/2` while `ratio <= 1 - eps_clip`, else the penalty.
pub fn enhancement_term(ratio: f64, params: &EvalParams) -> Result<f64> {
    if !ratio.is_finite() {
        return Err(Error::NonFinite(format!("ratio {ratio}")));
    }
    Ok(if ratio <= 1.0 - params.eps_clip {
        (1.0 - ratio).ln() / 2.0
    } else {
        params.penalty
    })
}

/// `(1 - alpha)·term_o + alpha·term_d`.
pub fn combine(term_o: f64, term_d: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * term_o + alpha * term_d
}

pub fn score(o_ratio: f64, d_ratio: f64, params: &EvalParams) -> Result<f64> {
    Ok(combine(
        enhancement_term(o_ratio, params)?,
        enhancement_term(d_ratio, params)?,
        params.alpha,
    ))
}

pub fn sync_overhead(snapshot: &ConstellationSnapshot, alloc: &Allocation, traffic: &TrafficScenario) -> Result<f64> {
    breakdown(snapshot, alloc, traffic, &EvalParams::default()).map(|b| b.o_syn)
}

pub fn flow_table_overhead(
    snapshot: &ConstellationSnapshot,
    alloc: &Allocation,
    traffic: &TrafficScenario,
) -> Result<f64> {
    breakdown(snapshot, alloc, traffic, &EvalParams::default()).map(|b| b.o_flow)
}

/// `Σ_i D^p_i + D^p_*`.
pub fn path_overhead(alloc: &Allocation, params: &EvalParams) -> f64 {
    alloc.domain_sizes().into_iter().map(|s| params.intra_path_delay(s)).sum::<f64>()
        + params.inter_path_delay(alloc.num_controllers())
}

pub fn intra_delay(
    snapshot: &ConstellationSnapshot,
    alloc: &Allocation,
    traffic: &TrafficScenario,
    params: &EvalParams,
    controller: usize,
) -> Result<f64> {
    if controller >= alloc.num_controllers() {
        return Err(Error::InvalidAllocation(format!(
            "controller {controller} out of range for {}",
            alloc.num_controllers()
        )));
    }
    breakdown(snapshot, alloc, traffic, params).map(|b| b.d_intra[controller])
}

pub fn inter_delay(
    snapshot: &ConstellationSnapshot,
    alloc: &Allocation,
    traffic: &TrafficScenario,
    params: &EvalParams,
) -> Result<f64> {
    breakdown(snapshot, alloc, traffic, params).map(|b| b.d_inter)
}

pub fn avg_delay(
    snapshot: &ConstellationSnapshot,
    alloc: &Allocation,
    traffic: &TrafficScenario,
    params: &EvalParams,
) -> Result<f64> {
    breakdown(snapshot, alloc, traffic, params).map(|b| b.d_avg)
}

fn breakdown(
    snapshot: &ConstellationSnapshot,
    alloc: &Allocation,
    traffic: &TrafficScenario,
    params: &EvalParams,
) -> Result<Breakdown> {
    let delays = LinkDelays::new(snapshot);
    Evaluator::new(&delays, traffic)?.breakdown(alloc, params)
}

/// Full evaluation; without a baseline both ratios are 1.
pub fn evaluate(
    snapshot: &ConstellationSnapshot,
    alloc: &Allocation,
    traffic: &TrafficScenario,
    params: &EvalParams,
    baseline: Option<&EvalResult>,
) -> Result<EvalResult> {
    let delays = LinkDelays::new(snapshot);
    Evaluator::new(&delays, traffic)?.evaluate(alloc, params, baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{Constellation, ShellConfig};
    use crate::traffic::generate_traffic;
    use approx::assert_relative_eq;

    fn small(n_leo: usize, n_meo: usize, seed: u64) -> (ConstellationSnapshot, TrafficScenario) {
        let c = Constellation::build(ShellConfig::leo_with_count(n_leo), ShellConfig::meo_with_count(n_meo))
            .unwrap();
        let s = c.propagate(seed % 50, 60.0);
        let t = generate_traffic(&s, 6 * n_leo, 1.0, 1.0, seed).unwrap();
        (s, t)
    }

    #[test]
    fn allocation_validation() {
        assert!(Allocation::new(vec![0, 1], 0, 2).is_ok());
        assert!(Allocation::new(vec![0, 2], 0, 2).is_err());
        assert!(Allocation::new(vec![0, 1], 2, 2).is_err());
        assert!(Allocation::new(vec![], 0, 0).is_err());
    }

    #[test]
    fn table_one_columns_combine() {
        let columns = [
            (0.1, -0.49, -0.90, -0.53),
            (0.3, -0.55, -0.80, -0.63),
            (0.5, -0.58, -0.76, -0.67),
            (0.7, -0.65, -0.72, -0.70),
            (0.9, -0.79, -0.69, -0.70),
        ];
        for (alpha, o, d, s) in columns {
            assert!((combine(o, d, alpha) - s).abs() <= 0.015, "alpha {alpha}");
        }
        assert_relative_eq!(combine(-0.49, -0.90, 0.1), -0.531, epsilon = 1e-12);
    }

    #[test]
    fn score_branches() {
        let p = EvalParams::default();
        assert_eq!(score(1.0, 1.0, &p).unwrap(), p.penalty);
        let r = 1.0 - (-2.0f64).exp();
        for alpha in [0.0, 0.3, 1.0] {
            assert_relative_eq!(score(r, r, &p.with_alpha(alpha)).unwrap(), -1.0, epsilon = 1e-12);
        }
        assert!(score(f64::NAN, 0.5, &p).is_err());
        assert!(score(0.5, f64::INFINITY, &p).is_err());
        // just inside the clip boundary
        assert_eq!(enhancement_term(1.0 - 1e-7, &p).unwrap(), p.penalty);
    }

    #[test]
    fn score_alpha_affine() {
        let p = EvalParams::default();
        let at = |a: f64| score(0.3, 0.6, &p.with_alpha(a)).unwrap();
        assert_relative_eq!(2.0 * at(0.5), at(0.0) + at(1.0), epsilon = 1e-12);
    }

    #[test]
    fn path_overhead_cases() {
        let p = EvalParams::default();
        let a = Allocation::new(vec![1; 25], 0, 3).unwrap();
        assert_relative_eq!(path_overhead(&a, &p), 25.0 * 26f64.log2() * 1e-4 + 9e-3, epsilon = 1e-15);
        assert_relative_eq!(p.intra_path_delay(25), 1.175e-2, max_relative = 1e-3);
        let zero = EvalParams { c_ospf_s: 0.0, c_bgp_s: 0.0, ..p };
        assert_eq!(path_overhead(&a, &zero), 0.0);
    }

    #[test]
    fn zero_traffic_components() {
        let (s, _) = small(6, 2, 1);
        let t = TrafficScenario::new(Array2::zeros((6, 6)), Array2::zeros((6, 6)), 1.0).unwrap();
        let a = Allocation::new(vec![0, 0, 1, 1, 0, 1], 0, 2).unwrap();
        assert_eq!(flow_table_overhead(&s, &a, &t).unwrap(), 0.0);
        assert_eq!(avg_delay(&s, &a, &t, &EvalParams::default()).unwrap(), 0.0);
        let p = EvalParams::default();
        let d_intra: Vec<f64> = (0..2).map(|i| intra_delay(&s, &a, &t, &p, i).unwrap()).collect();
        let max = d_intra.iter().cloned().fold(f64::MIN, f64::max);
        assert_relative_eq!(inter_delay(&s, &a, &t, &p).unwrap(), max + p.inter_path_delay(2));
    }

    #[test]
    fn single_leo_single_meo() {
        let snap = ConstellationSnapshot::from_positions(
            0,
            1.0,
            vec![[6_921_000.0, 0.0, 0.0]],
            vec![[14_371_000.0, 0.0, 0.0]],
        );
        let t = TrafficScenario::zeros(1, 2.5).unwrap();
        let a = Allocation::new(vec![0], 0, 1).unwrap();
        let o_syn = sync_overhead(&snap, &a, &t).unwrap();
        assert_relative_eq!(o_syn, 2.5 * propagation_delay(7_450_000.0), max_relative = 1e-12);
    }

    #[test]
    fn sync_overhead_zero_without_members() {
        // no members, and the lone senior is at distance zero from itself
        let snap = ConstellationSnapshot::from_positions(0, 1.0, vec![], vec![[14_371_000.0, 0.0, 0.0]]);
        let t = TrafficScenario::zeros(0, 1.0).unwrap();
        let a = Allocation::new(vec![], 0, 1).unwrap();
        assert_eq!(sync_overhead(&snap, &a, &t).unwrap(), 0.0);
    }

    #[test]
    fn empty_domain_senior_intra_delay_is_zero() {
        let (s, t) = small(6, 2, 4);
        let a = Allocation::new(vec![1; 6], 0, 2).unwrap();
        assert_eq!(intra_delay(&s, &a, &t, &EvalParams::default(), 0).unwrap(), 0.0);
        assert!(intra_delay(&s, &a, &t, &EvalParams::default(), 2).is_err());
    }

    #[test]
    fn single_domain_has_no_cross_terms() {
        let (s, t) = small(8, 3, 2);
        let p = EvalParams::default();
        let a = Allocation::new(vec![2; 8], 0, 3).unwrap();
        let r = evaluate(&s, &a, &t, &p, None).unwrap();
        let max = r.d_intra.iter().cloned().fold(f64::MIN, f64::max);
        assert_relative_eq!(r.d_inter, max + p.inter_path_delay(3), max_relative = 1e-15);
        // every flow is intra-domain in domain 2
        assert_relative_eq!(r.d_avg, r.d_intra[2], max_relative = 1e-12);
    }

    #[test]
    fn self_baseline_scores_penalty() {
        let (s, t) = small(8, 3, 5);
        let p = EvalParams::default();
        let a = Allocation::nearest(&s, medoid_senior(&s)).unwrap();
        let base = evaluate(&s, &a, &t, &p, None).unwrap();
        let again = evaluate(&s, &a, &t, &p, Some(&base)).unwrap();
        assert_eq!((again.o_ratio, again.d_ratio), (1.0, 1.0));
        assert_eq!(again.score, p.penalty);
        assert_eq!(again.o_total, again.o_syn + again.o_flow + again.o_path);
    }

    #[test]
    fn zero_baseline_is_rejected() {
        let (s, t) = small(4, 2, 1);
        let p = EvalParams::default();
        let a = Allocation::new(vec![0, 1, 0, 1], 0, 2).unwrap();
        let mut base = evaluate(&s, &a, &t, &p, None).unwrap();
        base.d_avg = 0.0;
        assert!(matches!(evaluate(&s, &a, &t, &p, Some(&base)), Err(Error::Normalization(_))));
    }

    #[test]
    fn reducing_cross_traffic_never_raises_flow_overhead() {
        let (s, t) = small(8, 3, 9);
        let a = Allocation::new(vec![0, 1, 2, 0, 1, 2, 0, 1], 0, 3).unwrap();
        let before = flow_table_overhead(&s, &a, &t).unwrap();
        let mut volume = t.volume().clone();
        let c = a.controller_of();
        for ((j, k), v) in volume.indexed_iter_mut() {
            if c[j] != c[k] {
                *v *= 0.5;
            }
        }
        let reduced = TrafficScenario::new(volume, t.flows().clone(), 1.0).unwrap();
        assert!(flow_table_overhead(&s, &a, &reduced).unwrap() <= before);
    }

    #[test]
    fn literal_delay_model_charges_inter_to_all_flows() {
        let (s, t) = small(8, 3, 3);
        let a = Allocation::new(vec![2; 8], 0, 3).unwrap();
        let p = EvalParams { delay_model: DelayModel::Literal, ..EvalParams::default() };
        let r = evaluate(&s, &a, &t, &p, None).unwrap();
        assert_relative_eq!(r.d_avg, r.d_intra[2] + r.d_inter, max_relative = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn components_non_negative_and_additive(seed in any::<u64>(), assign in proptest::collection::vec(0usize..3, 8)) {
                let (s, t) = small(8, 3, seed);
                let a = Allocation::new(assign, medoid_senior(&s), 3).unwrap();
                let r = evaluate(&s, &a, &t, &EvalParams::default(), None).unwrap();
                prop_assert_eq!(r.o_total, r.o_syn + r.o_flow + r.o_path);
                prop_assert!(r.o_syn >= 0.0 && r.o_flow >= 0.0 && r.o_path >= 0.0);
                prop_assert!(r.d_intra.iter().all(|&d| d >= 0.0));
                prop_assert!(r.d_inter >= 0.0 && r.d_avg >= 0.0);
            }

            #[test]
            fn score_strictly_decreasing_in_overhead(o1 in 0.0f64..0.99, o2 in 0.0f64..0.99, d in 0.0f64..0.99, alpha in 0.0f64..0.99) {
                prop_assume!((o1 - o2).abs() > 1e-9);
                let p = EvalParams::default().with_alpha(alpha);
                let (lo, hi) = if o1 < o2 { (o1, o2) } else { (o2, o1) };
                prop_assert!(score(lo, d, &p).unwrap() > score(hi, d, &p).unwrap());
            }
        }
    }
}
