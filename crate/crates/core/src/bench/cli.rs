//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::{
    compare_algorithms, generate, run_training, sweep_alpha, sweep_scale, ExperimentConfig, Method, ScenarioFile,
};
use crate::error::{Error, Result};
use crate::netmodel::Allocation;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "satprov", version, about = "Controller provisioning for LEO/MEO satellite networks")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the test scenarios as scenario files.
    Generate,
    /// Train the policy and write metrics and a checkpoint.
    Train {
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Score one allocation of a scenario file against its initial allocation.
    Eval {
        #[arg(long)]
        scenario: PathBuf,
        /// JSON allocation; the scenario's own allocation when omitted.
        #[arg(long)]
        allocation: Option<PathBuf>,
    },
    /// Compare solvers on the test scenarios.
    Compare {
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Table of overhead/delay terms across α.
    SweepAlpha {
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Timing across LEO counts.
    SweepScale {
        #[arg(long, value_delimiter = ',')]
        leo_counts: Option<Vec<usize>>,
    },
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = cli.out {
        config.out_dir = Some(o);
    }
    let out = config.out_dir();
    match cli.command {
        Command::Generate => {
            for p in generate(&config, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Train { episodes } => {
            if let Some(n) = episodes {
                config.train.max_episodes = n;
            }
            let r = run_training(&config, &out)?;
            let last = r.smoothed.last().map_or(f64::NAN, |s| s.final_score);
            println!("episodes {} smoothed final score {last:.4}", r.metrics.len());
            match r.spearman {
                Some(rho) => println!("spearman rho {rho:.4}"),
                None => println!("spearman rho undefined"),
            }
        }
        Command::Eval { scenario, allocation } => {
            let s = ScenarioFile::load_scenario(&scenario, config.eval)?;
            let alloc = match allocation {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)?;
                    serde_json::from_str::<Allocation>(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => s.initial_allocation().clone(),
            };
            if alloc.num_leo() != s.num_leo() || alloc.num_controllers() != s.num_meo() {
                return Err(Error::Config("allocation does not fit the scenario".into()));
            }
            let r = s.evaluate(&alloc)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            println!("score {}", r.score);
        }
        Command::Compare { methods } => {
            let methods = match methods {
                Some(v) => v.iter().map(|m| Method::parse(m)).collect::<Result<Vec<_>>>()?,
                None => config.solvers.methods.clone(),
            };
            for r in compare_algorithms(&config, &methods, &out)? {
                println!(
                    "{:<12} score {:>9.4} ± {:<7.4} time {:>9.4}s ± {:.4}",
                    r.scores.method, r.scores.mean_score, r.scores.std_score, r.mean_time_s, r.std_time_s
                );
            }
        }
        Command::SweepAlpha { alphas } => {
            let alphas = alphas.unwrap_or_else(|| config.sweep.alphas.clone());
            println!("alpha,term_o,term_d,score");
            for r in sweep_alpha(&config, &alphas, &out)? {
                println!("{},{:.4},{:.4},{:.4}", r.alpha, r.term_o, r.term_d, r.score);
            }
        }
        Command::SweepScale { leo_counts } => {
            let counts = leo_counts.unwrap_or_else(|| config.sweep.leo_counts.clone());
            let r = sweep_scale(&config, &counts, &out)?;
            for t in &r.timing {
                println!("{:>5} LEO  eval {:.6}s  inference {:.3}s", t.n_leo, t.eval_time_s, t.inference_time_s);
            }
            match r.inference_slope {
                Some(s) => println!("inference log-log slope {s:.3}"),
                None => println!("inference log-log slope undefined (single size)"),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(run(["satprov", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(run(["satprov", "--help"]), EXIT_OK);
        assert_eq!(run(["satprov", "--config", "/nonexistent/x.toml", "generate"]), EXIT_CONFIG);
        assert_eq!(run(["satprov", "sweep-alpha", "--alphas", "2.0", "--out", "/nonexistent-dir/\0"]), EXIT_CONFIG);
    }
}
