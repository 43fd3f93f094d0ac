use serde::{Deserialize, Serialize};

use super::ModelError;

/// Number of use cases, one head triple each.
pub const NUM_USE_CASES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Lookup table trained with the rest of the network.
    Trainable,
    /// Externally supplied vectors; receives no gradient.
    Frozen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Width of the query/key projections feeding the biaffine scorer.
    pub proj_dim: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip per batch; 0 disables clipping.
    pub grad_clip: f64,
    pub max_len: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub embedding: EmbeddingMode,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 192,
            hidden_dim: 128,
            proj_dim: 128,
            dropout: 0.2,
            learning_rate: 6e-4,
            batch_size: 64,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            grad_clip: 5.0,
            max_len: 64,
            max_epochs: 30,
            patience: 5,
            embedding: EmbeddingMode::Trainable,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_owned()));
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.proj_dim == 0 {
            return bad("dimensions must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.max_len == 0 {
            return bad("batch size and max length must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("invalid Adam constants");
        }
        if self.grad_clip < 0.0 {
            return bad("grad_clip must be non-negative");
        }
        Ok(())
    }

    /// Width of the encoder output (both directions).
    pub fn state_dim(&self) -> usize {
        2 * self.hidden_dim
    }
}
