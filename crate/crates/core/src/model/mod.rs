//! Subject-oriented captioning model at desk scale.
//!
//! Frames are cut into patches and linearly embedded; the subject crop is
//! embedded with the same weights to form hard-prompt tokens, and learnable
//! soft-prompt tokens are appended. A pre-norm transformer encodes the
//! sequence `[hard][frame][soft]`. A separate subject encoder maps a pooled
//! crop to one token, and the decoder cross-attends over the encoder output
//! followed by that token.

mod checkpoint;
mod config;
mod decode;
mod gradcheck;
mod network;
mod params;
mod tape;
mod tensor;
mod train;
mod vision;
mod vocab;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, load_optimizer_state, parse_checkpoint, save_checkpoint,
    save_optimizer_state, state_path,
};
pub use config::{ModelConfig, TrainConfig, SUBJECT_POOL_DIM, SUBJECT_POOL_GRID};
pub use decode::{length_penalty, DecodeMode, Generation};
pub use gradcheck::{
    gradcheck, gradcheck_params, relative_error, GradcheckReport, ParamCheck, CHECKED_PARAMS,
    REL_ERROR_FLOOR,
};
pub use network::{positional_encoding, CaptionModel, Graph, ModelInput, TokenSequence, TokenType};
pub use params::{init_params, param_shapes, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::{matmul, Mat};
pub use train::{batch_gradients, batch_loss, AdamW, TrainExample, Trainer};
pub use vision::{patchify, pool_grid, resize_bilinear, ImageF};
pub use vocab::{Vocabulary, BOS, EOS, PAD, UNK};
