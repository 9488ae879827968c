//! Versioned JSON parameter checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nn::Parameters;
use super::policy::PolicyNet;
use super::ppo::TrainConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockShape {
    pub name: String,
    pub len: usize,
}

/// Training configuration echo, block layout and parameters. Every tensor is
/// stored with its dimensions and a flat row-major data array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub blocks: Vec<BlockShape>,
    pub net: PolicyNet,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, net: PolicyNet) -> Self {
        let blocks = net.blocks().into_iter().map(|(name, b)| BlockShape { name, len: b.len() }).collect();
        Checkpoint { version: CHECKPOINT_VERSION, config, blocks, net }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", c.version)));
        }
        let layout: Vec<BlockShape> =
            c.net.blocks().into_iter().map(|(name, b)| BlockShape { name, len: b.len() }).collect();
        if layout != c.blocks || c.net.encoder.len() != c.net.arch.layers {
            return Err(Error::Config("checkpoint block layout does not match its network".into()));
        }
        if !c.net.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(c)
    }
}
