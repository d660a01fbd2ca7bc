use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{ModelConfig, SUBJECT_POOL_DIM};
use super::tensor::Mat;
use crate::sampler::SplitMix64;

/// Named trainable tensors in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new(entries: Vec<(String, Mat)>) -> Self {
        let mut store = ParamStore {
            names: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        };
        for (n, v) in entries {
            assert!(!store.index.contains_key(&n), "duplicate parameter {n}");
            store.index.insert(n.clone(), store.names.len());
            store.names.push(n);
            store.values.push(v);
        }
        store
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Panics on an unknown name; names come from [`param_shapes`].
    pub fn id(&self, name: &str) -> usize {
        self.index_of(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get(&self, name: &str) -> &Mat {
        &self.values[self.id(name)]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Mat {
        let i = self.id(name);
        &mut self.values[i]
    }

    pub fn value(&self, i: usize) -> &Mat {
        &self.values[i]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Mat {
        &mut self.values[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Mat::len).sum()
    }
}

fn linear(out: &mut Vec<(String, usize, usize)>, name: &str, fan_in: usize, fan_out: usize) {
    out.push((format!("{name}.w"), fan_in, fan_out));
    out.push((format!("{name}.b"), 1, fan_out));
}

fn norm(out: &mut Vec<(String, usize, usize)>, name: &str, d: usize) {
    out.push((format!("{name}.g"), 1, d));
    out.push((format!("{name}.b"), 1, d));
}

fn attention(out: &mut Vec<(String, usize, usize)>, name: &str, d: usize) {
    for p in ["q", "k", "v", "o"] {
        linear(out, &format!("{name}.{p}"), d, d);
    }
}

fn ffn(out: &mut Vec<(String, usize, usize)>, name: &str, d: usize) {
    linear(out, &format!("{name}.fc1"), d, 4 * d);
    linear(out, &format!("{name}.fc2"), 4 * d, d);
}

/// Names and shapes of every parameter, in storage order.
pub fn param_shapes(config: &ModelConfig, vocab_size: usize) -> Vec<(String, usize, usize)> {
    let d = config.d_model;
    let mut out = Vec::new();
    linear(&mut out, "patch", config.patch_dim(), d);
    out.push(("type_emb".into(), 3, d));
    if config.num_soft_tokens > 0 {
        out.push(("soft_prompt".into(), config.num_soft_tokens, d));
    }
    linear(&mut out, "subject", SUBJECT_POOL_DIM, d);
    for l in 0..config.encoder_layers {
        let p = format!("enc.{l}");
        norm(&mut out, &format!("{p}.ln1"), d);
        attention(&mut out, &format!("{p}.attn"), d);
        norm(&mut out, &format!("{p}.ln2"), d);
        ffn(&mut out, &format!("{p}.ffn"), d);
    }
    if config.encoder_layers > 0 {
        norm(&mut out, "enc.ln", d);
    }
    out.push(("tok_emb".into(), vocab_size, d));
    for l in 0..config.decoder_layers {
        let p = format!("dec.{l}");
        norm(&mut out, &format!("{p}.ln1"), d);
        attention(&mut out, &format!("{p}.self"), d);
        norm(&mut out, &format!("{p}.ln2"), d);
        attention(&mut out, &format!("{p}.cross"), d);
        norm(&mut out, &format!("{p}.ln3"), d);
        ffn(&mut out, &format!("{p}.ffn"), d);
    }
    if config.decoder_layers > 0 {
        norm(&mut out, "dec.ln", d);
    }
    linear(&mut out, "out", d, vocab_size);
    out
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Initial standard deviation by parameter role; `None` means a constant
/// (zero for biases, one for norm gains).
fn init_std(name: &str, rows: usize, config: &ModelConfig) -> Option<f64> {
    if name == "soft_prompt" {
        Some(config.soft_prompt_init_std)
    } else if name == "tok_emb" || name == "type_emb" {
        Some(1.0)
    } else if name.ends_with(".w") {
        Some(1.0 / (rows as f64).sqrt())
    } else {
        None
    }
}

/// Deterministic initialization. Each tensor draws from its own stream keyed
/// by `(seed, name)`, so adding or removing a tensor leaves the others
/// unchanged.
pub fn init_params(config: &ModelConfig, vocab_size: usize, seed: u64) -> ParamStore {
    let entries = param_shapes(config, vocab_size)
        .into_iter()
        .map(|(name, rows, cols)| {
            let value = match init_std(&name, rows, config) {
                Some(std) => {
                    let stream = SplitMix64::new(seed ^ fnv1a(&name)).next_u64();
                    let mut rng = ChaCha8Rng::seed_from_u64(stream);
                    let normal = Normal::new(0.0, std).expect("finite std");
                    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| normal.sample(&mut rng)).collect())
                }
                None if name.ends_with(".g") => Mat::from_vec(rows, cols, vec![1.0; rows * cols]),
                None => Mat::zeros(rows, cols),
            };
            (name, value)
        })
        .collect();
    ParamStore::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_matches_closed_form() {
        for cfg in [
            ModelConfig::default(),
            ModelConfig::test_scale(),
            ModelConfig {
                encoder_layers: 0,
                decoder_layers: 1,
                num_soft_tokens: 0,
                ..ModelConfig::test_scale()
            },
        ] {
            for v in [4, 37] {
                let p = init_params(&cfg, v, 1);
                assert_eq!(p.scalar_count(), cfg.parameter_count(v));
            }
        }
    }

    #[test]
    fn tensors_independent_of_soft_prompt_presence() {
        let with = init_params(&ModelConfig::test_scale(), 10, 3);
        let without = init_params(
            &ModelConfig {
                num_soft_tokens: 0,
                ..ModelConfig::test_scale()
            },
            10,
            3,
        );
        assert_eq!(with.get("enc.0.attn.q.w"), without.get("enc.0.attn.q.w"));
        assert!(without.index_of("soft_prompt").is_none());
        let sp = with.get("soft_prompt");
        let std = (sp.data.iter().map(|v| v * v).sum::<f64>() / sp.len() as f64).sqrt();
        assert!((0.01..0.03).contains(&std));
    }
}
