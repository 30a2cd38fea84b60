use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DEFAULT_RMS_EPS;

/// Architecture of the toy pre-norm decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub rope_theta: f64,
    pub rms_eps: f64,
    pub bos_token_id: Option<u32>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_layers: 4,
            d_model: 64,
            n_heads: 4,
            d_ff: 256,
            vocab_size: 256,
            max_seq_len: 64,
            rope_theta: 10_000.0,
            rms_eps: DEFAULT_RMS_EPS,
            bos_token_id: None,
        }
    }
}

impl ModelConfig {
    /// Small configuration used by gradient checks.
    pub fn tiny() -> Self {
        Self {
            n_layers: 2,
            d_model: 16,
            n_heads: 2,
            d_ff: 32,
            vocab_size: 32,
            max_seq_len: 16,
            ..Self::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} not divisible into {} heads",
                self.d_model, self.n_heads
            )));
        }
        if !self.head_dim().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "rotary embedding needs an even head_dim, got {}",
                self.head_dim()
            )));
        }
        if self.vocab_size < 2 {
            return Err(Error::Config("vocab_size must be at least 2".into()));
        }
        if self.max_seq_len < 1 || self.d_ff < 1 {
            return Err(Error::Config("max_seq_len and d_ff must be positive".into()));
        }
        if !(self.rope_theta > 0.0) || !(self.rms_eps >= 0.0) {
            return Err(Error::Config("rope_theta must be > 0 and rms_eps >= 0".into()));
        }
        if let Some(b) = self.bos_token_id {
            if b as usize >= self.vocab_size {
                return Err(Error::Config(format!("bos_token_id {b} outside vocab")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.head_dim(), 16);
        ModelConfig::tiny().validate().unwrap();
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut c = ModelConfig {
            n_heads: 3,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
        c = ModelConfig {
            d_model: 12,
            n_heads: 4,
            ..ModelConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c = ModelConfig {
            vocab_size: 1,
            ..ModelConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
