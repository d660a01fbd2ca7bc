use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub patch_size: usize,
    pub d_model: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub num_soft_tokens: usize,
    /// Hard-prompt tokens per side; the crop yields `subject_grid²` tokens.
    pub subject_grid: usize,
    /// Frames are resized to `frame_side × frame_side` before patching.
    pub frame_side: usize,
    pub max_caption_len: usize,
    pub num_frames: usize,
    /// Standard deviation of the soft-prompt initialization.
    pub soft_prompt_init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            patch_size: 8,
            d_model: 128,
            encoder_layers: 2,
            decoder_layers: 2,
            heads: 4,
            num_soft_tokens: 5,
            subject_grid: 2,
            frame_side: 32,
            max_caption_len: 20,
            num_frames: 32,
            soft_prompt_init_std: 0.02,
        }
    }
}

/// Cells per side of the pooled subject-encoder input.
pub const SUBJECT_POOL_GRID: usize = 4;
pub const SUBJECT_POOL_DIM: usize = SUBJECT_POOL_GRID * SUBJECT_POOL_GRID * 3;

impl ModelConfig {
    /// Small configuration used by tests and the synthetic set.
    pub fn test_scale() -> Self {
        ModelConfig {
            d_model: 64,
            frame_side: 16,
            num_frames: 8,
            max_caption_len: 12,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.patch_size == 0 || self.frame_side == 0 || self.frame_side % self.patch_size != 0 {
            return fail(format!(
                "frame_side {} must be a positive multiple of patch_size {}",
                self.frame_side, self.patch_size
            ));
        }
        if self.heads == 0 || self.d_model == 0 || self.d_model % self.heads != 0 {
            return fail(format!("d_model {} must be divisible by heads {}", self.d_model, self.heads));
        }
        if self.subject_grid == 0 {
            return fail("subject_grid must be at least 1".into());
        }
        if self.num_frames == 0 {
            return fail("num_frames must be at least 1".into());
        }
        if self.max_caption_len == 0 {
            return fail("max_caption_len must be at least 1".into());
        }
        if !(self.soft_prompt_init_std >= 0.0 && self.soft_prompt_init_std.is_finite()) {
            return fail("soft_prompt_init_std must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn patches_per_frame(&self) -> usize {
        let n = self.frame_side / self.patch_size;
        n * n
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    pub fn num_hard_tokens(&self) -> usize {
        self.subject_grid * self.subject_grid
    }

    pub fn num_frame_tokens(&self) -> usize {
        self.num_frames * self.patches_per_frame()
    }

    /// Encoder sequence length `g² + T·(R/P)² + K`.
    pub fn encoder_len(&self) -> usize {
        self.num_hard_tokens() + self.num_frame_tokens() + self.num_soft_tokens
    }

    /// Total trainable scalars for a vocabulary of `vocab_size` tokens:
    ///
    /// ```text
    /// patch embedding   (3P² + 1)·d
    /// type embeddings   3d
    /// soft prompts      K·d
    /// subject encoder   (48 + 1)·d
    /// encoder layer     12d² + 13d        (each of E layers, + 2d final norm if E > 0)
    /// token embeddings  V·d
    /// decoder layer     16d² + 19d        (each of D layers, + 2d final norm if D > 0)
    /// output layer      (d + 1)·V
    /// ```
    pub fn parameter_count(&self, vocab_size: usize) -> usize {
        let d = self.d_model;
        let v = vocab_size;
        let final_norm = |layers: usize| if layers > 0 { 2 * d } else { 0 };
        (self.patch_dim() + 1) * d
            + 3 * d
            + self.num_soft_tokens * d
            + (SUBJECT_POOL_DIM + 1) * d
            + self.encoder_layers * (12 * d * d + 13 * d)
            + final_norm(self.encoder_layers)
            + v * d
            + self.decoder_layers * (16 * d * d + 19 * d)
            + final_norm(self.decoder_layers)
            + (d + 1) * v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Write a checkpoint every this many steps (0: only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 7.5e-5,
            steps: 500,
            seed: 7,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must lie in [0,1)".into()));
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config("eps must be positive and weight_decay non-negative".into()));
        }
        Ok(())
    }
}
