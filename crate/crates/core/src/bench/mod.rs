//! Experiment harness: training runs, α and scale sweeps, solver comparison.
//!
//! Every data file written here is a pure function of the configuration and
//! seed. Wall-clock measurements go to separate `*_timing.csv` files.

pub mod cli;
pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agent::{infer, train, Checkpoint, EpisodeMetrics, PolicyNet, ScenarioSource, TrainConfig};
use crate::baselines::{brute_force, ga_refine, greedy_hill_climb, kmeans_seed, random_search, GAConfig};
use crate::constellation::{Constellation, ShellConfig};
use crate::env::{Scenario, ScenarioSampler};
use crate::error::{Error, Result};
use crate::netmodel::{Allocation, EvalParams, EvalResult};
use crate::traffic::TrafficScenario;
use stats::{log_log_slope, mean_std, moving_average, spearman};

pub const SCHEMA_VERSION: u32 = 1;
/// Window of the smoothed training curve.
pub const SMOOTHING_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub leo: ShellConfig,
    pub meo: ShellConfig,
    pub slot_duration_s: f64,
    pub max_slot: u64,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        ConstellationConfig {
            leo: ShellConfig::leo_with_count(50),
            meo: ShellConfig::meo_with_count(5),
            slot_duration_s: 60.0,
            max_slot: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Flows generated per LEO satellite.
    pub flows_per_leo: f64,
    /// Mean flow volume, Mb.
    pub volume_scale: f64,
    pub sync_unit: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig { flows_per_leo: 6.0, volume_scale: 1.0, sync_unit: crate::traffic::DEFAULT_SYNC_UNIT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BruteForce,
    Greedy,
    GaKmeans,
    Random,
    Policy,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BruteForce => "brute_force",
            Method::Greedy => "greedy",
            Method::GaKmeans => "ga_kmeans",
            Method::Random => "random",
            Method::Policy => "policy",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::BruteForce => "exhaustive optimum",
            Method::Greedy => "greedy hill-climb (fast local-search slot)",
            Method::GaKmeans => "GA + k-means",
            Method::Random => "random search",
            Method::Policy => "trained policy, greedy inference",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [Method::BruteForce, Method::Greedy, Method::GaKmeans, Method::Random, Method::Policy]
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub methods: Vec<Method>,
    pub greedy_max_iters: usize,
    pub random_samples: usize,
    /// `ga.seed` picks an independent replicate of the per-scenario solver
    /// seeds; the scenarios themselves depend only on the root seed.
    pub ga: GAConfig,
    /// Trained parameters for the `policy` method; trained on demand when absent.
    pub policy_checkpoint: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            methods: vec![Method::Greedy, Method::GaKmeans, Method::Random, Method::Policy],
            greedy_max_iters: 1000,
            random_samples: 1000,
            ga: GAConfig::default(),
            policy_checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub alpha_method: Method,
    pub leo_counts: Vec<usize>,
    pub scale_meo: usize,
    /// Training episodes for the scale-sweep policy when no checkpoint is given.
    pub scale_train_episodes: usize,
    pub scale_eval_repeats: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            alphas: vec![0.1, 0.5, 0.9],
            alpha_method: Method::GaKmeans,
            leo_counts: vec![50, 100, 250, 500, 1000],
            scale_meo: 20,
            scale_train_episodes: 4,
            scale_eval_repeats: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    /// Root of every random stream; overrides `train.seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Test scenarios per experiment cell.
    #[serde(default = "default_scenarios")]
    pub scenarios: usize,
    #[serde(default)]
    pub constellation: ConstellationConfig,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub eval: EvalParams,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub solvers: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_scenarios() -> usize {
    20
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: SCHEMA_VERSION,
            seed: 0,
            out_dir: None,
            scenarios: default_scenarios(),
            constellation: ConstellationConfig::default(),
            traffic: TrafficConfig::default(),
            eval: EvalParams::default(),
            train: TrainConfig::default(),
            solvers: SolverConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

const STREAM_TEST: u64 = 1;
const STREAM_SOLVER: u64 = 2;
const STREAM_SCALE: u64 = 3;

/// Independent seed for item `k` of stream `stream`.
pub fn derive_seed(root: u64, stream: u64, k: u64) -> u64 {
    let mut z = root ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        self.constellation.leo.validate("leo")?;
        self.constellation.meo.validate("meo")?;
        if !(self.constellation.slot_duration_s > 0.0) {
            return Err(Error::Config("slot_duration_s must be positive".into()));
        }
        let t = &self.traffic;
        if !(t.flows_per_leo >= 0.0 && t.volume_scale > 0.0 && t.sync_unit > 0.0) {
            return Err(Error::Config(format!("invalid traffic section {t:?}")));
        }
        self.eval.validate()?;
        self.effective_train().validate()?;
        self.solvers.ga.validate()?;
        if self.scenarios == 0 {
            return Err(Error::Config("scenarios must be positive".into()));
        }
        if self.sweep.scale_meo == 0 || self.sweep.scale_eval_repeats == 0 {
            return Err(Error::Config("scale_meo and scale_eval_repeats must be positive".into()));
        }
        Ok(())
    }

    pub fn effective_train(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn instance(&self) -> String {
        format!(
            "{} LEO / {} MEO, {} scenarios, {} flows per LEO",
            self.constellation.leo.count(),
            self.constellation.meo.count(),
            self.scenarios,
            self.traffic.flows_per_leo
        )
    }

    pub fn sampler_for(&self, leo: ShellConfig, meo: ShellConfig) -> Result<ScenarioSampler> {
        Ok(ScenarioSampler {
            constellation: Constellation::build(leo, meo)?,
            slot_duration_s: self.constellation.slot_duration_s,
            max_slot: self.constellation.max_slot,
            n_flows: (self.traffic.flows_per_leo * leo.count() as f64).round() as usize,
            volume_scale: self.traffic.volume_scale,
            sync_unit: self.traffic.sync_unit,
            params: self.eval,
        })
    }

    pub fn sampler(&self) -> Result<ScenarioSampler> {
        self.sampler_for(self.constellation.leo, self.constellation.meo)
    }

    /// The fixed evaluation scenarios of this configuration.
    pub fn test_scenarios(&self) -> Result<Vec<Arc<Scenario>>> {
        let s = self.sampler()?;
        (0..self.scenarios)
            .map(|k| Ok(Arc::new(s.sample(k, derive_seed(self.seed, STREAM_TEST, k as u64))?)))
            .collect()
    }
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedRow {
    pub episode: usize,
    pub final_score: f64,
    pub reward_sum: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub metrics: Vec<EpisodeMetrics>,
    pub smoothed: Vec<SmoothedRow>,
    /// Rank correlation of the smoothed final score with the episode index.
    pub spearman: Option<f64>,
    pub net: PolicyNet,
}

pub fn smooth(metrics: &[EpisodeMetrics]) -> Vec<SmoothedRow> {
    let fs: Vec<f64> = metrics.iter().map(|m| m.final_score).collect();
    let rs: Vec<f64> = metrics.iter().map(|m| m.reward_sum).collect();
    let (fs, rs) = (moving_average(&fs, SMOOTHING_WINDOW), moving_average(&rs, SMOOTHING_WINDOW));
    metrics
        .iter()
        .enumerate()
        .map(|(i, m)| SmoothedRow { episode: m.episode, final_score: fs[i], reward_sum: rs[i] })
        .collect()
}

pub fn curve_spearman(smoothed: &[SmoothedRow]) -> Option<f64> {
    let ep: Vec<f64> = smoothed.iter().map(|r| r.episode as f64).collect();
    let sc: Vec<f64> = smoothed.iter().map(|r| r.final_score).collect();
    spearman(&ep, &sc)
}

/// Trains on scenarios drawn from the configured constellation and writes
/// `metrics.csv`, `metrics_smoothed.csv` and `checkpoint.json`.
pub fn run_training(config: &ExperimentConfig, out: &Path) -> Result<TrainingReport> {
    config.validate()?;
    create_dir(out)?;
    let tc = config.effective_train();
    let result = train(&ScenarioSource::Sampler(config.sampler()?), &tc)?;
    let smoothed = smooth(&result.metrics);
    write_csv(&out.join("metrics.csv"), &result.metrics)?;
    write_csv(&out.join("metrics_smoothed.csv"), &smoothed)?;
    Checkpoint::new(tc, result.net.clone()).save(&out.join("checkpoint.json"))?;
    Ok(TrainingReport { spearman: curve_spearman(&smoothed), metrics: result.metrics, smoothed, net: result.net })
}

fn policy_for(config: &ExperimentConfig, num_meo: usize, sampler: &ScenarioSampler, episodes: usize) -> Result<PolicyNet> {
    if let Some(path) = &config.solvers.policy_checkpoint {
        let c = Checkpoint::load(path)?;
        if c.net.arch.num_meo != num_meo {
            return Err(Error::Config(format!(
                "checkpoint expects {} MEO, instance has {num_meo}",
                c.net.arch.num_meo
            )));
        }
        return Ok(c.net);
    }
    let tc = TrainConfig { max_episodes: episodes, ..config.effective_train() };
    Ok(train(&ScenarioSource::Sampler(sampler.clone()), &tc)?.net)
}

struct Solved {
    allocation: Allocation,
    eval: EvalResult,
    wall_clock_s: f64,
}

fn solve(
    method: Method,
    config: &ExperimentConfig,
    scenario: &Arc<Scenario>,
    params: &EvalParams,
    k: u64,
    policy: Option<&PolicyNet>,
) -> Result<Solved> {
    let s = config.solvers.clone();
    let seed = derive_seed(derive_seed(config.seed, STREAM_SOLVER, k), STREAM_SOLVER, s.ga.seed);
    let r = match method {
        Method::BruteForce => brute_force(scenario, params)?,
        Method::Greedy => greedy_hill_climb(scenario, params, s.greedy_max_iters)?,
        Method::Random => random_search(scenario, s.random_samples, seed, params)?,
        Method::GaKmeans => {
            let start = Instant::now();
            let init = kmeans_seed(scenario.snapshot(), scenario.num_meo(), seed)?;
            let mut r = ga_refine(scenario, &init, &GAConfig { seed, ..s.ga }, params)?;
            r.wall_clock_s = start.elapsed().as_secs_f64();
            r
        }
        Method::Policy => {
            let net = policy.ok_or_else(|| Error::Config("policy method without a policy".into()))?;
            let tc = config.effective_train();
            let r = infer(net, scenario.clone(), tc.max_steps, tc.max_moves)?;
            let eval = scenario.objective_with(*params)?.evaluate(&r.allocation)?;
            return Ok(Solved { allocation: r.allocation, eval, wall_clock_s: r.wall_clock_s });
        }
    };
    Ok(Solved { allocation: r.allocation, eval: r.eval, wall_clock_s: r.wall_clock_s })
}

/// Score statistics of one method; the deterministic part of a comparison row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub method: String,
    pub label: String,
    pub instance: String,
    pub seed: u64,
    pub n: usize,
    pub mean_score: f64,
    pub std_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(flatten)]
    pub scores: ScoreSummary,
    pub mean_time_s: f64,
    pub std_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub method: String,
    pub scenario: usize,
    pub score: f64,
    pub term_o: f64,
    pub term_d: f64,
    pub controller_of: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TimingRow {
    method: String,
    mean_time_s: f64,
    std_time_s: f64,
}

/// Runs every method on the same test scenarios. Writes `compare.json`,
/// `compare_scenarios.csv` and `compare_timing.csv`.
pub fn compare_algorithms(config: &ExperimentConfig, methods: &[Method], out: &Path) -> Result<Vec<ComparisonRow>> {
    config.validate()?;
    if methods.is_empty() {
        return Err(Error::Config("no methods to compare".into()));
    }
    create_dir(out)?;
    let scenarios = config.test_scenarios()?;
    let sampler = config.sampler()?;
    let policy = if methods.contains(&Method::Policy) {
        Some(policy_for(config, sampler.constellation.num_meo(), &sampler, config.train.max_episodes)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut per_scenario = Vec::new();
    for &m in methods {
        let (mut scores, mut times) = (Vec::new(), Vec::new());
        for (k, s) in scenarios.iter().enumerate() {
            let r = solve(m, config, s, &config.eval, k as u64, policy.as_ref())?;
            scores.push(r.eval.score);
            times.push(r.wall_clock_s);
            per_scenario.push(ScenarioResult {
                method: m.name().into(),
                scenario: k,
                score: r.eval.score,
                term_o: r.eval.term_o,
                term_d: r.eval.term_d,
                controller_of: r.allocation.controller_of().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
            });
        }
        let (mean_score, std_score) = mean_std(&scores);
        let (mean_time_s, std_time_s) = mean_std(&times);
        rows.push(ComparisonRow {
            scores: ScoreSummary {
                method: m.name().into(),
                label: m.label().into(),
                instance: config.instance(),
                seed: config.seed,
                n: scores.len(),
                mean_score,
                std_score,
            },
            mean_time_s,
            std_time_s,
        });
    }
    let summaries: Vec<&ScoreSummary> = rows.iter().map(|r| &r.scores).collect();
    write_json(&out.join("compare.json"), &summaries)?;
    write_csv(&out.join("compare_scenarios.csv"), &per_scenario)?;
    let timing: Vec<TimingRow> = rows
        .iter()
        .map(|r| TimingRow { method: r.scores.method.clone(), mean_time_s: r.mean_time_s, std_time_s: r.std_time_s })
        .collect();
    write_csv(&out.join("compare_timing.csv"), &timing)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub n: usize,
    pub term_o: f64,
    pub term_d: f64,
    pub score: f64,
}

/// Solves the test scenarios at every α and writes `sweep_alpha.csv` and
/// `sweep_alpha_scenarios.csv`.
pub fn sweep_alpha(config: &ExperimentConfig, alphas: &[f64], out: &Path) -> Result<Vec<AlphaRow>> {
    config.validate()?;
    if alphas.is_empty() {
        return Err(Error::Config("empty alpha list".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Config(format!("alpha {a} outside [0, 1]")));
    }
    let method = config.sweep.alpha_method;
    create_dir(out)?;
    let scenarios = config.test_scenarios()?;
    let policy = if method == Method::Policy {
        let sampler = config.sampler()?;
        Some(policy_for(config, sampler.constellation.num_meo(), &sampler, config.train.max_episodes)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut detail = Vec::new();
    for &alpha in alphas {
        let params = config.eval.with_alpha(alpha);
        let (mut to, mut td, mut sc) = (Vec::new(), Vec::new(), Vec::new());
        for (k, s) in scenarios.iter().enumerate() {
            let r = solve(method, config, s, &params, k as u64, policy.as_ref())?;
            to.push(r.eval.term_o);
            td.push(r.eval.term_d);
            sc.push(r.eval.score);
            detail.push((alpha, k, r.eval.term_o, r.eval.term_d, r.eval.score));
        }
        rows.push(AlphaRow {
            alpha,
            n: scenarios.len(),
            term_o: mean_std(&to).0,
            term_d: mean_std(&td).0,
            score: mean_std(&sc).0,
        });
    }
    write_csv(&out.join("sweep_alpha.csv"), &rows)?;
    let mut w = csv::Writer::from_path(out.join("sweep_alpha_scenarios.csv"))?;
    w.write_record(["alpha", "scenario", "term_o", "term_d", "score"])?;
    for (a, k, o, d, s) in detail {
        w.serialize((a, k, o, d, s))?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub n_leo: usize,
    pub n_meo: usize,
    pub n_flows: usize,
    pub initial_score: f64,
    pub inferred_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleTiming {
    pub n_leo: usize,
    /// Mean wall-clock of one score evaluation.
    pub eval_time_s: f64,
    /// Wall-clock of one full greedy inference rollout.
    pub inference_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub rows: Vec<ScaleRow>,
    pub timing: Vec<ScaleTiming>,
    /// Log-log slope of inference time against `N_L`; absent for one size.
    pub inference_slope: Option<f64>,
    pub eval_slope: Option<f64>,
}

/// Times score evaluation and policy inference across LEO counts with
/// `sweep.scale_meo` controllers. Writes `sweep_scale.csv`,
/// `sweep_scale_timing.csv` and `sweep_scale_fit.json`.
pub fn sweep_scale(config: &ExperimentConfig, leo_counts: &[usize], out: &Path) -> Result<ScaleReport> {
    config.validate()?;
    if leo_counts.is_empty() || leo_counts.contains(&0) {
        return Err(Error::Config("LEO counts must be a non-empty list of positive sizes".into()));
    }
    create_dir(out)?;
    let nm = config.sweep.scale_meo;
    let meo = ShellConfig::meo_with_count(nm);
    let smallest = *leo_counts.iter().min().expect("non-empty");
    let train_sampler = config.sampler_for(ShellConfig::leo_with_count(smallest), meo)?;
    let net = policy_for(config, nm, &train_sampler, config.sweep.scale_train_episodes)?;
    let tc = config.effective_train();
    let (mut rows, mut timing) = (Vec::new(), Vec::new());
    for (k, &n) in leo_counts.iter().enumerate() {
        let sampler = config.sampler_for(ShellConfig::leo_with_count(n), meo)?;
        let scenario = Arc::new(sampler.sample(k, derive_seed(config.seed, STREAM_SCALE, k as u64))?);
        let initial = scenario.initial_allocation().clone();
        let mut eval_total = 0.0;
        let mut initial_score = 0.0;
        for _ in 0..config.sweep.scale_eval_repeats {
            let start = Instant::now();
            initial_score = scenario.evaluate(&initial)?.score;
            eval_total += start.elapsed().as_secs_f64();
        }
        let r = infer(&net, scenario.clone(), tc.max_steps, tc.max_moves)?;
        rows.push(ScaleRow {
            n_leo: n,
            n_meo: nm,
            n_flows: sampler.n_flows,
            initial_score,
            inferred_score: r.eval.score,
        });
        timing.push(ScaleTiming {
            n_leo: n,
            eval_time_s: eval_total / config.sweep.scale_eval_repeats as f64,
            inference_time_s: r.wall_clock_s,
        });
    }
    let x: Vec<f64> = timing.iter().map(|t| t.n_leo as f64).collect();
    let inf: Vec<f64> = timing.iter().map(|t| t.inference_time_s.max(1e-12)).collect();
    let ev: Vec<f64> = timing.iter().map(|t| t.eval_time_s.max(1e-12)).collect();
    let report = ScaleReport { inference_slope: log_log_slope(&x, &inf), eval_slope: log_log_slope(&x, &ev), rows, timing };
    write_csv(&out.join("sweep_scale.csv"), &report.rows)?;
    write_csv(&out.join("sweep_scale_timing.csv"), &report.timing)?;
    write_json(
        &out.join("sweep_scale_fit.json"),
        &serde_json::json!({ "inference_slope": report.inference_slope, "eval_slope": report.eval_slope }),
    )?;
    Ok(report)
}

/// On-disk scenario: constellation configuration and slot, a traffic CSV
/// next to it, and the initial allocation vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub id: usize,
    pub leo: ShellConfig,
    pub meo: ShellConfig,
    pub slot: u64,
    pub slot_duration_s: f64,
    pub sync_unit: f64,
    /// Path relative to the scenario file.
    pub traffic_csv: String,
    pub allocation: Allocation,
}

impl ScenarioFile {
    pub fn load_scenario(path: &Path, params: EvalParams) -> Result<Scenario> {
        let text = fs::read_to_string(path)?;
        let f: ScenarioFile = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let snapshot = Arc::new(Constellation::build(f.leo, f.meo)?.propagate(f.slot, f.slot_duration_s));
        let dir = path.parent().unwrap_or(Path::new("."));
        let traffic = TrafficScenario::read_csv(&dir.join(&f.traffic_csv), snapshot.num_leo(), f.sync_unit)?;
        if f.allocation.num_leo() != snapshot.num_leo() || f.allocation.num_controllers() != snapshot.num_meo() {
            return Err(Error::Config("allocation does not fit the constellation".into()));
        }
        Scenario::new(f.id, snapshot, Arc::new(traffic), f.allocation, params)
    }
}

/// Writes every test scenario as `scenario_<k>.json` plus its traffic CSV.
pub fn generate(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    create_dir(out)?;
    let mut paths = Vec::new();
    for s in config.test_scenarios()? {
        let csv_name = format!("scenario_{:03}_traffic.csv", s.id);
        s.traffic().write_csv(&out.join(&csv_name))?;
        let file = ScenarioFile {
            id: s.id,
            leo: config.constellation.leo,
            meo: config.constellation.meo,
            slot: s.snapshot().slot(),
            slot_duration_s: s.snapshot().slot_duration_s(),
            sync_unit: s.traffic().sync_unit(),
            traffic_csv: csv_name,
            allocation: s.initial_allocation().clone(),
        };
        let path = out.join(format!("scenario_{:03}.json", s.id));
        write_json(&path, &file)?;
        paths.push(path);
    }
    Ok(paths)
}
