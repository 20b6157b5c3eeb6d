use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Architecture knobs that do not depend on the data. Combined with a vocabulary
/// and a label inventory this yields a [`ModelConfig`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    #[serde(default = "ArchConfig::default_layers")]
    pub num_layers: usize,
    #[serde(default = "ArchConfig::default_heads")]
    pub num_heads: usize,
    #[serde(default = "ArchConfig::default_model_dim")]
    pub model_dim: usize,
    #[serde(default = "ArchConfig::default_ff_dim")]
    pub feedforward_dim: usize,
    #[serde(default = "ArchConfig::default_max_len")]
    pub max_sequence_length: usize,
}

impl ArchConfig {
    fn default_layers() -> usize {
        4
    }
    fn default_heads() -> usize {
        4
    }
    fn default_model_dim() -> usize {
        64
    }
    fn default_ff_dim() -> usize {
        128
    }
    fn default_max_len() -> usize {
        64
    }

    pub fn total_heads(&self) -> usize {
        self.num_layers * self.num_heads
    }
}

impl Default for ArchConfig {
    /// Desk-scale default: 4 layers of 4 heads, width 64.
    fn default() -> Self {
        Self {
            num_layers: Self::default_layers(),
            num_heads: Self::default_heads(),
            model_dim: Self::default_model_dim(),
            feedforward_dim: Self::default_ff_dim(),
            max_sequence_length: Self::default_max_len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub model_dim: usize,
    pub feedforward_dim: usize,
    pub vocab_size: usize,
    pub max_sequence_length: usize,
    pub num_labels: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(arch: &ArchConfig, vocab_size: usize, num_labels: usize, seed: u64) -> Self {
        Self {
            num_layers: arch.num_layers,
            num_heads: arch.num_heads,
            model_dim: arch.model_dim,
            feedforward_dim: arch.feedforward_dim,
            vocab_size,
            max_sequence_length: arch.max_sequence_length,
            num_labels,
            seed,
        }
    }

    pub fn arch(&self) -> ArchConfig {
        ArchConfig {
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            model_dim: self.model_dim,
            feedforward_dim: self.feedforward_dim,
            max_sequence_length: self.max_sequence_length,
        }
    }

    /// Collects every violated constraint rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_layers < 1 {
            problems.push("num_layers must be >= 1".to_string());
        }
        if self.num_heads < 1 {
            problems.push("num_heads must be >= 1".to_string());
        } else if !self.model_dim.is_multiple_of(self.num_heads) {
            problems.push(format!(
                "model_dim {} is not divisible by num_heads {}",
                self.model_dim, self.num_heads
            ));
        }
        if self.model_dim == 0 {
            problems.push("model_dim must be > 0".to_string());
        }
        if self.feedforward_dim == 0 {
            problems.push("feedforward_dim must be > 0".to_string());
        }
        if self.vocab_size < 2 {
            problems.push("vocab_size must cover at least PAD and UNK".to_string());
        }
        if self.max_sequence_length == 0 {
            problems.push("max_sequence_length must be > 0".to_string());
        }
        if self.num_labels < 2 {
            problems.push("num_labels must be >= 2".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }

    pub fn total_heads(&self) -> usize {
        self.num_layers * self.num_heads
    }

    /// Short content hash identifying this configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        seed::sha256_hex(&json)[..16].to_string()
    }
}
