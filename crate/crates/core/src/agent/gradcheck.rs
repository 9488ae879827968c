//! Central finite-difference check of the PPO loss gradients.

use serde::Serialize;

use super::nn::Parameters;
use super::policy::PolicyNet;
use super::ppo::{accumulate_gradients, sample_loss, TrainConfig, TransitionRecord};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCheck {
    pub name: String,
    pub len: usize,
    pub analytic_norm: f64,
    /// `|g_a - g_n| / max(|g_a| + |g_n|, 1e-8)` over the whole block.
    pub rel_error: f64,
}

fn loss(net: &PolicyNet, record: &TransitionRecord, advantage: f64, ret: f64, config: &TrainConfig) -> Result<f64> {
    Ok(sample_loss(net, record, advantage, ret, config)?.total(config))
}

fn set(net: &mut PolicyNet, block: usize, i: usize, value: f64) {
    net.blocks_mut()[block].1[i] = value;
}

/// Compares the analytic gradient of one transition's loss with central differences of step `h`.
pub fn check_gradients(
    net: &PolicyNet,
    record: &TransitionRecord,
    advantage: f64,
    ret: f64,
    config: &TrainConfig,
    h: f64,
) -> Result<Vec<BlockCheck>> {
    let mut analytic = net.zeros_like();
    accumulate_gradients(net, record, advantage, ret, config, 1.0, &mut analytic)?;
    let mut probe = net.clone();
    let mut out = Vec::new();
    for (b, (name, grad)) in analytic.blocks().into_iter().enumerate() {
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        for (i, &g) in grad.iter().enumerate() {
            let x = probe.blocks()[b].1[i];
            set(&mut probe, b, i, x + h);
            let up = loss(&probe, record, advantage, ret, config)?;
            set(&mut probe, b, i, x - h);
            let down = loss(&probe, record, advantage, ret, config)?;
            set(&mut probe, b, i, x);
            let numeric = (up - down) / (2.0 * h);
            diff += (g - numeric).powi(2);
            na += g * g;
            nn += numeric * numeric;
        }
        let (diff, na, nn) = (diff.sqrt(), na.sqrt(), nn.sqrt());
        out.push(BlockCheck { name, len: grad.len(), analytic_norm: na, rel_error: diff / (na + nn).max(1e-8) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tests::sampler;
    use crate::env::ProvisioningEnv;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = TrainConfig { hidden_dim: 5, max_moves: 2, ..TrainConfig::default() };
        let s = Arc::new(sampler(6, 3).sample(0, 21).unwrap());
        let net = PolicyNet::new(cfg.arch(3), 2).unwrap();
        let mut env = ProvisioningEnv::new(s, cfg.env_config()).unwrap();
        let obs = env.reset().unwrap();
        let fwd = net.forward(&obs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (decision, eval) = net.sample(&fwd, 2, &mut rng);
        let rec = TransitionRecord {
            observation: obs,
            decision,
            log_prob: eval.log_prob - 0.05,
            reward: 0.0,
            value: fwd.value,
            offset: 0.0,
            done: false,
        };
        for check in check_gradients(&net, &rec, 0.8, 0.3, &cfg, 1e-6).unwrap() {
            assert!(check.rel_error < 1e-4, "{check:?}");
        }
    }
}
