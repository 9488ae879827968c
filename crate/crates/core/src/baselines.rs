//! Reference solvers: exhaustive search, greedy hill-climbing, a k-means
//! seeded genetic algorithm and random search.

use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::{euclidean, ConstellationSnapshot};
use crate::env::Scenario;
use crate::error::{Error, Result};
use crate::netmodel::{medoid_senior, Allocation, EvalParams, EvalResult, Objective};

/// Largest search space `brute_force` accepts.
pub const BRUTE_FORCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub allocation: Allocation,
    pub eval: EvalResult,
    pub wall_clock_s: f64,
    /// Number of score evaluations.
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GAConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        GAConfig { population: 50, generations: 100, crossover_rate: 0.9, mutation_rate: 0.1, elitism: 2, seed: 0 }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || self.elitism >= self.population {
            return Err(Error::Config(format!(
                "GA needs population >= 2 and elitism < population, got {} / {}",
                self.population, self.elitism
            )));
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

struct Counter<'a> {
    objective: &'a Objective,
    evaluations: u64,
}

impl Counter<'_> {
    fn score(&mut self, a: &Allocation) -> Result<f64> {
        self.evaluations += 1;
        self.objective.score(a)
    }
}

fn finish(objective: &Objective, allocation: Allocation, start: Instant, evaluations: u64) -> Result<SolverResult> {
    let eval = objective.evaluate(&allocation)?;
    Ok(SolverResult { allocation, eval, wall_clock_s: start.elapsed().as_secs_f64(), evaluations })
}

/// Every allocation with the scenario's senior; ties go to the
/// lexicographically smallest assignment.
pub fn brute_force(scenario: &Scenario, params: &EvalParams) -> Result<SolverResult> {
    let (nl, nm) = (scenario.num_leo(), scenario.num_meo());
    let space = (nm as f64).powi(nl as i32);
    if space > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(space));
    }
    let objective = scenario.objective_with(*params)?;
    let start = Instant::now();
    let base = scenario.initial_allocation();
    let mut counter = Counter { objective: &objective, evaluations: 0 };
    let mut digits = vec![0usize; nl];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let s = counter.score(&base.with_assignment(digits.clone())?)?;
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, digits.clone()));
        }
        // odometer with the last LEO as the fastest digit
        let mut k = nl;
        loop {
            if k == 0 {
                let (_, d) = best.expect("at least one allocation");
                let evaluations = counter.evaluations;
                return finish(&objective, base.with_assignment(d)?, start, evaluations);
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < nm {
                break;
            }
            digits[k] = 0;
        }
    }
}

/// Best single reassignment per iteration until no move improves the score.
pub fn greedy_hill_climb(scenario: &Scenario, params: &EvalParams, max_iters: usize) -> Result<SolverResult> {
    Ok(greedy_with_trace(scenario, params, max_iters)?.0)
}

/// As [`greedy_hill_climb`], also returning the accepted score sequence.
pub fn greedy_with_trace(scenario: &Scenario, params: &EvalParams, max_iters: usize) -> Result<(SolverResult, Vec<f64>)> {
    let objective = scenario.objective_with(*params)?;
    let start = Instant::now();
    let mut counter = Counter { objective: &objective, evaluations: 0 };
    let mut current = scenario.initial_allocation().clone();
    let mut score = counter.score(&current)?;
    let mut trace = vec![score];
    for _ in 0..max_iters {
        let mut best: Option<(f64, usize, usize)> = None;
        for leo in 0..current.num_leo() {
            let from = current.controller_of()[leo];
            for meo in (0..current.num_controllers()).filter(|&m| m != from) {
                let mut cand = current.clone();
                cand.reassign(leo, meo)?;
                let s = counter.score(&cand)?;
                if s > best.map_or(score, |b| b.0) {
                    best = Some((s, leo, meo));
                }
            }
        }
        match best {
            Some((s, leo, meo)) => {
                current.reassign(leo, meo)?;
                score = s;
                trace.push(s);
            }
            None => break,
        }
    }
    let evaluations = counter.evaluations;
    Ok((finish(&objective, current, start, evaluations)?, trace))
}

fn nearest(point: &[f64; 3], centers: &[[f64; 3]]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, c) in centers.iter().enumerate() {
        let d = euclidean(point, c);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// Lloyd's k-means on LEO positions with `k = n_meo`; every cluster joins its
/// nearest MEO. Initial centroids are distinct LEOs drawn with `seed`.
pub fn kmeans_seed(snapshot: &ConstellationSnapshot, n_meo: usize, seed: u64) -> Result<Allocation> {
    const TOL: f64 = 1e-6;
    const MAX_ITERS: usize = 100;
    if n_meo != snapshot.num_meo() || n_meo == 0 {
        return Err(Error::Config(format!("k = {n_meo} must equal the snapshot's {} MEO", snapshot.num_meo())));
    }
    let points = snapshot.leo_positions();
    let senior = medoid_senior(snapshot);
    if points.is_empty() {
        return Allocation::new(Vec::new(), senior, n_meo);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, points.len(), n_meo.min(points.len()));
    let mut centers: Vec<[f64; 3]> = picks.iter().map(|i| points[i]).collect();
    while centers.len() < n_meo {
        centers.push(points[rng.random_range(0..points.len())]);
    }
    let mut label = vec![0usize; points.len()];
    for _ in 0..MAX_ITERS {
        for (j, p) in points.iter().enumerate() {
            label[j] = nearest(p, &centers);
        }
        let mut sums = vec![[0.0; 3]; n_meo];
        let mut counts = vec![0usize; n_meo];
        for (j, p) in points.iter().enumerate() {
            counts[label[j]] += 1;
            for d in 0..3 {
                sums[label[j]][d] += p[d];
            }
        }
        let mut shift: f64 = 0.0;
        for k in 0..n_meo {
            let next = if counts[k] > 0 {
                sums[k].map(|s| s / counts[k] as f64)
            } else {
                // farthest point from its own centroid
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        euclidean(&points[a], &centers[label[a]]).total_cmp(&euclidean(&points[b], &centers[label[b]]))
                    })
                    .expect("non-empty");
                points[far]
            };
            shift = shift.max(euclidean(&next, &centers[k]));
            centers[k] = next;
        }
        if shift <= TOL {
            break;
        }
    }
    for (j, p) in points.iter().enumerate() {
        label[j] = nearest(p, &centers);
    }
    let meos = snapshot.meo_positions();
    let cluster_meo: Vec<usize> = centers.iter().map(|c| nearest(c, meos)).collect();
    Allocation::new(label.iter().map(|&k| cluster_meo[k]).collect(), senior, n_meo)
}

fn mutate<R: Rng>(genes: &mut [usize], n_meo: usize, rate: f64, rng: &mut R) {
    for g in genes.iter_mut() {
        if rng.random_bool(rate) {
            *g = rng.random_range(0..n_meo);
        }
    }
}

fn tournament<'a, R: Rng>(pop: &'a [(f64, Vec<usize>)], rng: &mut R) -> &'a Vec<usize> {
    let mut best: Option<&(f64, Vec<usize>)> = None;
    for _ in 0..3 {
        let c = pop.choose(rng).expect("non-empty population");
        if best.is_none_or(|b| c.0 > b.0) {
            best = Some(c);
        }
    }
    &best.expect("three draws").1
}

/// Genetic refinement of `seed_allocation`; returns the best allocation ever evaluated.
pub fn ga_refine(
    scenario: &Scenario,
    seed_allocation: &Allocation,
    config: &GAConfig,
    params: &EvalParams,
) -> Result<SolverResult> {
    Ok(ga_with_history(scenario, seed_allocation, config, params)?.0)
}

/// As [`ga_refine`], also returning the best-ever score after each generation.
pub fn ga_with_history(
    scenario: &Scenario,
    seed_allocation: &Allocation,
    config: &GAConfig,
    params: &EvalParams,
) -> Result<(SolverResult, Vec<f64>)> {
    config.validate()?;
    let objective = scenario.objective_with(*params)?;
    let start = Instant::now();
    let nm = scenario.num_meo();
    if seed_allocation.num_leo() != scenario.num_leo() || seed_allocation.num_controllers() != nm {
        return Err(Error::InvalidAllocation("seed allocation does not fit the scenario".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut counter = Counter { objective: &objective, evaluations: 0 };
    let mut genomes = vec![seed_allocation.controller_of().to_vec()];
    while genomes.len() < config.population {
        let mut g = genomes[0].clone();
        mutate(&mut g, nm, config.mutation_rate, &mut rng);
        genomes.push(g);
    }
    let mut best: (f64, Vec<usize>) = (f64::NEG_INFINITY, Vec::new());
    let mut history = Vec::with_capacity(config.generations + 1);
    for generation in 0..=config.generations {
        let mut pop = Vec::with_capacity(genomes.len());
        for g in genomes {
            let s = counter.score(&seed_allocation.with_assignment(g.clone())?)?;
            if s > best.0 {
                best = (s, g.clone());
            }
            pop.push((s, g));
        }
        history.push(best.0);
        if generation == config.generations {
            break;
        }
        pop.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut next: Vec<Vec<usize>> = pop.iter().take(config.elitism).map(|p| p.1.clone()).collect();
        while next.len() < config.population {
            let a = tournament(&pop, &mut rng);
            let b = tournament(&pop, &mut rng);
            let mut child = if rng.random_bool(config.crossover_rate) {
                a.iter().zip(b).map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y }).collect()
            } else {
                a.clone()
            };
            mutate(&mut child, nm, config.mutation_rate, &mut rng);
            next.push(child);
        }
        genomes = next;
    }
    let evaluations = counter.evaluations;
    Ok((finish(&objective, seed_allocation.with_assignment(best.1)?, start, evaluations)?, history))
}

/// Best of the initial allocation and `n_samples` uniform random ones.
pub fn random_search(scenario: &Scenario, n_samples: usize, seed: u64, params: &EvalParams) -> Result<SolverResult> {
    let objective = scenario.objective_with(*params)?;
    let start = Instant::now();
    let mut counter = Counter { objective: &objective, evaluations: 0 };
    let base = scenario.initial_allocation();
    let mut best = (counter.score(base)?, base.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nl, nm) = (scenario.num_leo(), scenario.num_meo());
    for _ in 0..n_samples {
        let cand = base.with_assignment((0..nl).map(|_| rng.random_range(0..nm)).collect())?;
        let s = counter.score(&cand)?;
        if s > best.0 {
            best = (s, cand);
        }
    }
    let evaluations = counter.evaluations;
    finish(&objective, best.1, start, evaluations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tests::sampler;
    use crate::env::InitialRule;
    use std::sync::Arc;

    fn scenario(nl: usize, nm: usize, seed: u64) -> Scenario {
        sampler(nl, nm).sample(0, seed).unwrap()
    }

    #[test]
    fn brute_force_counts_and_single_allocation() {
        let s = scenario(4, 2, 3);
        let r = brute_force(&s, s.params()).unwrap();
        assert_eq!(r.evaluations, 16);
        let s = scenario(2, 1, 3);
        let r = brute_force(&s, s.params()).unwrap();
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.allocation.controller_of(), &[0, 0]);
    }

    #[test]
    fn brute_force_guard() {
        let s = scenario(13, 3, 1);
        assert!(matches!(brute_force(&s, s.params()), Err(Error::TooLarge(_))));
    }

    #[test]
    fn brute_force_tie_break_is_lexicographic() {
        // all-zero traffic weights nothing but overhead; several optima may tie
        let s = scenario(5, 2, 7);
        let r = brute_force(&s, s.params()).unwrap();
        let obj = s.objective();
        let best = r.eval.score;
        let mut first = None;
        for code in 0..32usize {
            let v: Vec<usize> = (0..5).map(|k| (code >> (4 - k)) & 1).collect();
            let sc = obj.score(&s.initial_allocation().with_assignment(v.clone()).unwrap()).unwrap();
            assert!(sc <= best);
            if sc == best && first.is_none() {
                first = Some(v);
            }
        }
        assert_eq!(r.allocation.controller_of(), first.unwrap().as_slice());
    }

    #[test]
    fn oracle_dominates_other_solvers() {
        for seed in 0..4 {
            let s = scenario(6, 3, seed);
            let p = *s.params();
            let opt = brute_force(&s, &p).unwrap().eval.score;
            let g = greedy_hill_climb(&s, &p, 100).unwrap();
            let r = random_search(&s, 50, seed, &p).unwrap();
            let k = kmeans_seed(s.snapshot(), 3, seed).unwrap();
            let ga = ga_refine(&s, &k, &GAConfig { population: 10, generations: 5, ..GAConfig::default() }, &p).unwrap();
            for other in [g.eval.score, r.eval.score, ga.eval.score] {
                assert!(other <= opt);
            }
        }
    }

    #[test]
    fn greedy_trace_strictly_increases() {
        let s = scenario(8, 3, 2);
        let (r, trace) = greedy_with_trace(&s, s.params(), 100).unwrap();
        assert!(trace.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*trace.last().unwrap(), r.eval.score);
        assert!(r.eval.score >= trace[0]);
    }

    #[test]
    fn greedy_from_optimum_makes_no_moves() {
        let s = scenario(6, 2, 4);
        let opt = brute_force(&s, s.params()).unwrap();
        let (r, trace) = greedy_from(&Arc::new(s), &opt.allocation);
        assert_eq!(trace.len(), 1);
        assert_eq!(r, opt.allocation);
    }

    fn greedy_from(s: &Arc<Scenario>, start: &Allocation) -> (Allocation, Vec<f64>) {
        let obj = s.objective();
        let mut cur = start.clone();
        let mut score = obj.score(&cur).unwrap();
        let mut trace = vec![score];
        loop {
            let mut best = None;
            for l in 0..cur.num_leo() {
                for m in 0..cur.num_controllers() {
                    let mut c = cur.clone();
                    c.reassign(l, m).unwrap();
                    let sc = obj.score(&c).unwrap();
                    if sc > best.as_ref().map_or(score, |b: &(f64, Allocation)| b.0) {
                        best = Some((sc, c));
                    }
                }
            }
            match best {
                Some((sc, c)) => {
                    score = sc;
                    cur = c;
                    trace.push(sc);
                }
                None => return (cur, trace),
            }
        }
    }

    #[test]
    fn ga_zero_generations_is_best_of_initial_population() {
        let s = scenario(6, 3, 1);
        let seed = s.initial_allocation().clone();
        let cfg = GAConfig { population: 8, generations: 0, ..GAConfig::default() };
        let (r, hist) = ga_with_history(&s, &seed, &cfg, s.params()).unwrap();
        assert_eq!(r.evaluations, 8);
        assert_eq!(hist.len(), 1);
        assert!(r.eval.score >= s.objective().score(&seed).unwrap());
    }

    #[test]
    fn ga_best_ever_is_monotone_and_deterministic() {
        let s = scenario(8, 3, 5);
        let k = kmeans_seed(s.snapshot(), 3, 1).unwrap();
        let cfg = GAConfig { population: 20, generations: 30, seed: 4, ..GAConfig::default() };
        let (a, hist) = ga_with_history(&s, &k, &cfg, s.params()).unwrap();
        assert!(hist.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(a.evaluations, 20 * 31);
        let (b, _) = ga_with_history(&s, &k, &cfg, s.params()).unwrap();
        assert_eq!(a.allocation, b.allocation);
    }

    #[test]
    fn ga_rejects_invalid_config() {
        let s = scenario(4, 2, 1);
        let seed = s.initial_allocation().clone();
        for cfg in [
            GAConfig { population: 1, elitism: 0, ..GAConfig::default() },
            GAConfig { population: 4, elitism: 4, ..GAConfig::default() },
            GAConfig { mutation_rate: 1.5, ..GAConfig::default() },
        ] {
            assert!(ga_refine(&s, &seed, &cfg, s.params()).is_err());
        }
    }

    #[test]
    fn kmeans_single_controller_and_determinism() {
        let s = sampler(12, 1).sample_with(0, 2, InitialRule::Nearest).unwrap();
        let a = kmeans_seed(s.snapshot(), 1, 9).unwrap();
        assert!(a.controller_of().iter().all(|&c| c == 0));
        let s = scenario(30, 3, 2);
        assert_eq!(kmeans_seed(s.snapshot(), 3, 5).unwrap(), kmeans_seed(s.snapshot(), 3, 5).unwrap());
    }

    #[test]
    fn kmeans_colinear_hand_partition() {
        let r = 6_921_000.0;
        let leo = vec![[r, 0.0, 0.0], [r, 1000.0, 0.0], [r, 500_000.0, 0.0], [r, 501_000.0, 0.0]];
        let m = 14_371_000.0;
        let meo = vec![[m, 600_000.0, 0.0], [m, -100_000.0, 0.0]];
        let snap = ConstellationSnapshot::from_positions(0, 60.0, leo, meo);
        for seed in 0..10 {
            let a = kmeans_seed(&snap, 2, seed).unwrap();
            assert_eq!(a.controller_of(), &[1, 1, 0, 0], "seed {seed}");
        }
    }

    #[test]
    fn random_search_cases() {
        let s = scenario(6, 3, 3);
        let r0 = random_search(&s, 0, 1, s.params()).unwrap();
        assert_eq!(&r0.allocation, s.initial_allocation());
        assert_eq!(r0.evaluations, 1);
        let mut prev = f64::NEG_INFINITY;
        for n in [1, 5, 20, 100] {
            let r = random_search(&s, n, 11, s.params()).unwrap();
            assert!(r.eval.score >= prev);
            prev = r.eval.score;
        }
    }

    #[test]
    fn random_search_covers_small_space() {
        let s = scenario(4, 2, 6);
        let opt = brute_force(&s, s.params()).unwrap().eval.score;
        let hits = (0..100).filter(|&seed| random_search(&s, 1000, seed, s.params()).unwrap().eval.score == opt).count();
        assert!(hits >= 99, "{hits}");
    }
}
