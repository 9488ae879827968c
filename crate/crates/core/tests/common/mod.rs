#![allow(dead_code)]

use std::sync::Arc;

use satprov::constellation::{Constellation, ShellConfig};
use satprov::env::{Scenario, ScenarioSampler};
use satprov::netmodel::{Allocation, EvalParams};

const C: f64 = 299_792_458.0;

pub fn sampler(n_leo: usize, n_meo: usize) -> ScenarioSampler {
    ScenarioSampler {
        constellation: Constellation::build(ShellConfig::leo_with_count(n_leo), ShellConfig::meo_with_count(n_meo))
            .unwrap(),
        slot_duration_s: 60.0,
        max_slot: 100,
        n_flows: 6 * n_leo,
        volume_scale: 1.0,
        sync_unit: 1.0,
        params: EvalParams::default(),
    }
}

pub fn scenario(n_leo: usize, n_meo: usize, seed: u64) -> Arc<Scenario> {
    Arc::new(sampler(n_leo, n_meo).sample(0, seed).unwrap())
}

fn light_time(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt() / C
}

/// Components recomputed from positions and the dense traffic matrices.
#[derive(Debug, Clone, Copy)]
pub struct Naive {
    pub o_syn: f64,
    pub o_flow: f64,
    pub o_path: f64,
    pub o_total: f64,
    pub d_inter: f64,
    pub d_avg: f64,
}

pub fn naive_components(s: &Scenario, a: &Allocation, p: &EvalParams) -> (Naive, Vec<f64>) {
    let snap = s.snapshot();
    let leo = snap.leo_positions();
    let meo = snap.meo_positions();
    let (nl, nm) = (leo.len(), meo.len());
    let t = s.traffic().volume();
    let f = s.traffic().flows();
    let cs = s.traffic().sync_unit();
    let c = a.controller_of();
    let star = a.senior();
    let speed = |j: usize, i: usize| light_time(leo[j], meo[i]);
    let to_star = |i: usize| light_time(meo[i], meo[star]);
    let size = |i: usize| c.iter().filter(|&&x| x == i).count();
    let dp = |n: usize| p.c_ospf_s * n as f64 * ((n + 1) as f64).log2();
    let dp_star = p.c_bgp_s * (nm * nm) as f64;
    let ts_star = cs * nm as f64;

    let mut o_syn = 0.0;
    for i in 0..nm {
        let mut far = 0.0_f64;
        for j in 0..nl {
            if c[j] == i {
                far = far.max(speed(j, i));
            }
        }
        o_syn += cs * size(i) as f64 * far;
    }
    let mut far_star = 0.0_f64;
    for i in 0..nm {
        far_star = far_star.max(to_star(i));
    }
    o_syn += ts_star * far_star;

    let mut intra = vec![0.0; nm];
    let mut cross = vec![0.0; nm];
    for i in 0..nm {
        for j in 0..nl {
            for k in 0..nl {
                if c[j] != i {
                    continue;
                }
                if c[k] == i {
                    intra[i] += t[[j, k]] * speed(j, i);
                } else {
                    cross[i] += t[[j, k]] * to_star(i);
                }
            }
        }
    }
    let o_flow: f64 = intra.iter().sum::<f64>() + cross.iter().sum::<f64>();
    let o_path: f64 = (0..nm).map(|i| dp(size(i))).sum::<f64>() + dp_star;

    let d_intra: Vec<f64> = (0..nm).map(|i| ts_star * to_star(i) + dp(size(i)) + intra[i]).collect();
    let d_inter = d_intra.iter().cloned().fold(f64::MIN, f64::max) + cross.iter().sum::<f64>() + dp_star;

    let mut num = 0.0;
    let mut den = 0.0;
    for u in 0..nl {
        for v in 0..nl {
            let w = f[[u, v]] as f64;
            if w == 0.0 {
                continue;
            }
            let d = if c[u] == c[v] { d_intra[c[u]] } else { d_intra[c[u]] + d_inter };
            num += w * d;
            den += w;
        }
    }
    let d_avg = if den == 0.0 { 0.0 } else { num / den };
    (Naive { o_syn, o_flow, o_path, o_total: o_syn + o_flow + o_path, d_inter, d_avg }, d_intra)
}

fn term(ratio: f64, p: &EvalParams) -> f64 {
    if ratio <= 1.0 - p.eps_clip {
        0.5 * (1.0 - ratio).ln()
    } else {
        p.penalty
    }
}

/// Score of `a` relative to the scenario's initial allocation.
pub fn naive_score(s: &Scenario, a: &Allocation, p: &EvalParams) -> (f64, f64, f64) {
    let (x, _) = naive_components(s, a, p);
    let (b, _) = naive_components(s, s.initial_allocation(), p);
    let to = term(x.o_total / b.o_total, p);
    let td = term(x.d_avg / b.d_avg, p);
    (to, td, (1.0 - p.alpha) * to + p.alpha * td)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}
