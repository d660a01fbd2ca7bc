use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, SUBJECT_POOL_GRID};
use super::params::{init_params, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Mat;
use super::vision::{patchify, pool_grid, resize_bilinear, ImageF};
use super::vocab::Vocabulary;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TokenType {
    Hard = 0,
    Frame = 1,
    Soft = 2,
}

/// Encoder input: `[hard][frame][soft]` rows with type embeddings and
/// sinusoidal positions already added.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub embeddings: Mat,
    pub type_tags: Vec<TokenType>,
    pub positions: Vec<usize>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.type_tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.type_tags.is_empty()
    }

    /// Count of (HARD, FRAME, SOFT) tokens.
    pub fn type_histogram(&self) -> (usize, usize, usize) {
        let count = |t| self.type_tags.iter().filter(|x| **x == t).count();
        (count(TokenType::Hard), count(TokenType::Frame), count(TokenType::Soft))
    }
}

/// Sinusoidal position table, `len × d`.
pub fn positional_encoding(len: usize, d: usize) -> Mat {
    Mat::from_fn(len, d, |pos, c| {
        let i = (c / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * i / d as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Frames, subject crop and (for training) target ids for one example.
#[derive(Debug, Clone)]
pub struct ModelInput {
    /// `T` frames already resized to `R × R`, channels in `[0,1]`.
    pub frames: Vec<ImageF>,
    /// Subject crop at its original size, channels in `[0,1]`.
    pub crop: ImageF,
}

/// A computation graph bound to one parameter snapshot. Each parameter is
/// placed on the tape at most once.
pub struct Graph<'a> {
    pub tape: Tape,
    params: &'a ParamStore,
    leaves: HashMap<usize, Var>,
}

impl<'a> Graph<'a> {
    pub fn new(params: &'a ParamStore) -> Self {
        Graph {
            tape: Tape::new(),
            params,
            leaves: HashMap::new(),
        }
    }

    pub fn p(&mut self, name: &str) -> Var {
        let i = self.params.id(name);
        if let Some(v) = self.leaves.get(&i) {
            return *v;
        }
        let v = self.tape.param(i, self.params.value(i));
        self.leaves.insert(i, v);
        v
    }

    fn linear(&mut self, x: Var, name: &str) -> Var {
        let w = self.p(&format!("{name}.w"));
        let b = self.p(&format!("{name}.b"));
        let h = self.tape.matmul(x, w);
        self.tape.add_row(h, b)
    }

    fn norm(&mut self, x: Var, name: &str) -> Var {
        let g = self.p(&format!("{name}.g"));
        let b = self.p(&format!("{name}.b"));
        self.tape.layer_norm(x, g, b)
    }

    fn attention(&mut self, x: Var, memory: Var, name: &str, heads: usize, causal: bool) -> Var {
        let q = self.linear(x, &format!("{name}.q"));
        let k = self.linear(memory, &format!("{name}.k"));
        let v = self.linear(memory, &format!("{name}.v"));
        let d = self.tape.value(q).cols;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.tape.slice_cols(q, h * dh, dh);
            let kh = self.tape.slice_cols(k, h * dh, dh);
            let vh = self.tape.slice_cols(v, h * dh, dh);
            let s = self.tape.matmul_t(qh, kh);
            let s = self.tape.scale(s, scale);
            let a = if causal {
                self.tape.causal_softmax(s)
            } else {
                self.tape.softmax(s)
            };
            outs.push(self.tape.matmul(a, vh));
        }
        let cat = if heads == 1 { outs[0] } else { self.tape.concat_cols(&outs) };
        self.linear(cat, &format!("{name}.o"))
    }

    fn ffn(&mut self, x: Var, name: &str) -> Var {
        let h = self.linear(x, &format!("{name}.fc1"));
        let h = self.tape.gelu(h);
        self.linear(h, &format!("{name}.fc2"))
    }

    pub fn patch_embed(&mut self, config: &ModelConfig, frames: &[ImageF]) -> Var {
        let p = config.patch_size;
        let mut rows = Vec::new();
        for f in frames {
            rows.extend(patchify(f, p).data);
        }
        let n = rows.len() / config.patch_dim();
        let x = self.tape.input(Mat::from_vec(n, config.patch_dim(), rows));
        self.linear(x, "patch")
    }

    pub fn embed_subject_prompt(&mut self, config: &ModelConfig, crop: &ImageF) -> Var {
        let side = config.subject_grid * config.patch_size;
        let resized = resize_bilinear(crop, side, side);
        self.patch_embed(config, std::slice::from_ref(&resized))
    }

    /// Returns the encoder input and its token tags.
    pub fn build_encoder_input(&mut self, config: &ModelConfig, frame_tokens: Var, hard_tokens: Var) -> (Var, Vec<TokenType>) {
        let n_hard = self.tape.value(hard_tokens).rows;
        let n_frame = self.tape.value(frame_tokens).rows;
        let k = config.num_soft_tokens;
        let mut tags = vec![TokenType::Hard; n_hard];
        tags.extend(std::iter::repeat_n(TokenType::Frame, n_frame));
        tags.extend(std::iter::repeat_n(TokenType::Soft, k));
        let mut parts = vec![hard_tokens, frame_tokens];
        if k > 0 {
            parts.push(self.p("soft_prompt"));
        }
        let x = self.tape.concat_rows(&parts);
        let type_emb = self.p("type_emb");
        let ids: Vec<usize> = tags.iter().map(|t| *t as usize).collect();
        let types = self.tape.gather(type_emb, &ids);
        let x = self.tape.add(x, types);
        let pe = self.tape.input(positional_encoding(tags.len(), config.d_model));
        (self.tape.add(x, pe), tags)
    }

    /// Pre-norm transformer encoder.
    pub fn encode(&mut self, config: &ModelConfig, x: Var) -> Var {
        let mut h = x;
        for l in 0..config.encoder_layers {
            let n = self.norm(h, &format!("enc.{l}.ln1"));
            let a = self.attention(n, n, &format!("enc.{l}.attn"), config.heads, false);
            h = self.tape.add(h, a);
            let n = self.norm(h, &format!("enc.{l}.ln2"));
            let f = self.ffn(n, &format!("enc.{l}.ffn"));
            h = self.tape.add(h, f);
        }
        if config.encoder_layers > 0 {
            h = self.norm(h, "enc.ln");
        }
        h
    }

    pub fn encode_subject(&mut self, config: &ModelConfig, crop: &ImageF) -> Var {
        let r = config.frame_side;
        let pooled = pool_grid(&resize_bilinear(crop, r, r), SUBJECT_POOL_GRID);
        let x = self.tape.input(Mat::from_vec(1, pooled.len(), pooled));
        self.linear(x, "subject")
    }

    /// Encoder memory `Concat(V̄, subject token)` for one input.
    pub fn memory(&mut self, config: &ModelConfig, input: &ModelInput) -> Var {
        let frames = self.patch_embed(config, &input.frames);
        let hard = self.embed_subject_prompt(config, &input.crop);
        let (x, _) = self.build_encoder_input(config, frames, hard);
        let v = self.encode(config, x);
        let s = self.encode_subject(config, &input.crop);
        self.tape.concat_rows(&[v, s])
    }

    /// Next-token logits for every prefix position of `ids`.
    pub fn decode(&mut self, config: &ModelConfig, memory: Var, ids: &[usize]) -> Var {
        let emb = self.p("tok_emb");
        let x = self.tape.gather(emb, ids);
        let pe = self.tape.input(positional_encoding(ids.len(), config.d_model));
        let mut h = self.tape.add(x, pe);
        for l in 0..config.decoder_layers {
            let n = self.norm(h, &format!("dec.{l}.ln1"));
            let a = self.attention(n, n, &format!("dec.{l}.self"), config.heads, true);
            h = self.tape.add(h, a);
            let n = self.norm(h, &format!("dec.{l}.ln2"));
            let a = self.attention(n, memory, &format!("dec.{l}.cross"), config.heads, false);
            h = self.tape.add(h, a);
            let n = self.norm(h, &format!("dec.{l}.ln3"));
            let f = self.ffn(n, &format!("dec.{l}.ffn"));
            h = self.tape.add(h, f);
        }
        if config.decoder_layers > 0 {
            h = self.norm(h, "dec.ln");
        }
        self.linear(h, "out")
    }
}

/// Captioning model: configuration, vocabulary and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParamStore,
}

fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.all_finite() {
        Ok(())
    } else {
        Err(Error::Diverged(format!("non-finite values in {what}")))
    }
}

impl CaptionModel {
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config, vocab.len(), seed);
        Ok(CaptionModel { config, vocab, params })
    }

    pub fn graph(&self) -> Graph<'_> {
        Graph::new(&self.params)
    }

    fn check_frames(&self, frames: &[ImageF]) -> Result<()> {
        let r = self.config.frame_side;
        for (i, f) in frames.iter().enumerate() {
            if (f.height, f.width) != (r, r) {
                return Err(Error::Contract(format!(
                    "frame {i} is {}x{}, expected {r}x{r}",
                    f.height, f.width
                )));
            }
        }
        Ok(())
    }

    fn check_crop(crop: &ImageF) -> Result<()> {
        if crop.height == 0 || crop.width == 0 {
            return Err(Error::Contract("empty subject crop".into()));
        }
        Ok(())
    }

    /// Frame tokens, `T·(R/P)² × d`, frame-major and row-major within a frame.
    pub fn patch_embed(&self, frames: &[ImageF]) -> Result<Mat> {
        self.check_frames(frames)?;
        let mut g = self.graph();
        let v = g.patch_embed(&self.config, frames);
        Ok(g.tape.value(v).clone())
    }

    /// Hard-prompt tokens, `g² × d`.
    pub fn embed_subject_prompt(&self, crop: &ImageF) -> Result<Mat> {
        Self::check_crop(crop)?;
        let mut g = self.graph();
        let v = g.embed_subject_prompt(&self.config, crop);
        Ok(g.tape.value(v).clone())
    }

    pub fn build_encoder_input(&self, frame_tokens: &Mat, hard_tokens: &Mat) -> Result<TokenSequence> {
        let d = self.config.d_model;
        if frame_tokens.cols != d || hard_tokens.cols != d {
            return Err(Error::Contract(format!("token width must be d_model = {d}")));
        }
        let mut g = self.graph();
        let f = g.tape.input(frame_tokens.clone());
        let h = g.tape.input(hard_tokens.clone());
        let (x, tags) = g.build_encoder_input(&self.config, f, h);
        Ok(TokenSequence {
            embeddings: g.tape.value(x).clone(),
            positions: (0..tags.len()).collect(),
            type_tags: tags,
        })
    }

    /// Encoder output `V̄`, one row per input token.
    pub fn encode(&self, seq: &TokenSequence) -> Result<Mat> {
        let mut g = self.graph();
        let x = g.tape.input(seq.embeddings.clone());
        let v = g.encode(&self.config, x);
        let out = g.tape.value(v).clone();
        check_finite(&out, "encoder output")?;
        Ok(out)
    }

    /// Subject token, `1 × d`.
    pub fn encode_subject(&self, crop: &ImageF) -> Result<Mat> {
        Self::check_crop(crop)?;
        let mut g = self.graph();
        let v = g.encode_subject(&self.config, crop);
        Ok(g.tape.value(v).clone())
    }

    /// Decoder memory for an input: encoder output followed by the subject
    /// token.
    pub fn memory(&self, input: &ModelInput) -> Result<Mat> {
        self.check_frames(&input.frames)?;
        Self::check_crop(&input.crop)?;
        let mut g = self.graph();
        let m = g.memory(&self.config, input);
        let out = g.tape.value(m).clone();
        check_finite(&out, "encoder memory")?;
        Ok(out)
    }

    /// Logits for the token following each prefix of `ids`, `len × V`.
    pub fn decoder_logits(&self, memory: &Mat, ids: &[usize]) -> Mat {
        let mut g = self.graph();
        let m = g.tape.input(memory.clone());
        let l = g.decode(&self.config, m, ids);
        g.tape.value(l).clone()
    }
}
