//! Run configuration: defaults, then an optional JSON file, then `SOVC_`
//! environment variables, then dotted command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sovc_core::model::{DecodeMode, ModelConfig, TrainConfig};
use sovc_core::sampler::SamplerConfig;

use crate::error::CliError;

pub const ENV_PREFIX: &str = "SOVC_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Correction file backing the annotation endpoints.
    pub annotations: Option<PathBuf>,
    /// Detections (JSON lines) offered as ranked candidates during review.
    pub detections: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            annotations: None,
            detections: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding `annotations.json`.
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub sampler: SamplerConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// `greedy` or `beam:<width>`.
    pub decode: String,
    pub vocab_min_freq: usize,
    pub service: ServiceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            checkpoint: None,
            sampler: SamplerConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            decode: "greedy".into(),
            vocab_min_freq: 1,
            service: ServiceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn decode_mode(&self) -> Result<DecodeMode, CliError> {
        Ok(self.decode.parse()?)
    }

    pub fn dataset_path(&self) -> Result<&Path, CliError> {
        self.dataset
            .as_deref()
            .ok_or_else(|| CliError::input("no dataset given (--dataset or dataset in the config file)"))
    }

    pub fn checkpoint_path(&self) -> Result<&Path, CliError> {
        self.checkpoint
            .as_deref()
            .ok_or_else(|| CliError::input("no checkpoint given (--checkpoint or checkpoint in the config file)"))
    }
}

/// Top-level keys without a dedicated command-line option.
const PLAIN_KEYS: [&str; 2] = ["decode", "vocab_min_freq"];

fn is_config_flag(name: &str) -> bool {
    let key = name.split('=').next().unwrap_or(name);
    key.contains('.') || PLAIN_KEYS.contains(&key)
}

/// Splits `--a.b value` and `--a.b=value` pairs (and the plain top-level
/// keys) out of `args`. Returns the remaining arguments and the extracted
/// `(path, value)` pairs.
pub fn split_dotted_flags(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut flags = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(name) = a.strip_prefix("--").filter(|n| is_config_flag(n)) else {
            rest.push(a);
            continue;
        };
        match name.split_once('=') {
            Some((k, v)) => flags.push((k.to_string(), v.to_string())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::input(format!("flag --{name} needs a value")))?;
                flags.push((name.to_string(), v));
            }
        }
    }
    Ok((rest, flags))
}

/// `SOVC_TRAIN__LEARNING_RATE` → `train.learning_rate`.
pub fn env_path(var: &str) -> Option<String> {
    let rest = var.strip_prefix(ENV_PREFIX)?;
    if rest.is_empty() {
        return None;
    }
    Some(rest.split("__").map(str::to_lowercase).collect::<Vec<_>>().join("."))
}

fn parse_leaf(current: &Value, raw: &str) -> Value {
    match current {
        Value::String(_) => Value::String(raw.to_string()),
        _ => serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string())),
    }
}

/// Sets a dotted path in `root`. Keys match exactly or, failing that,
/// case-insensitively; unknown keys are an error.
pub fn set_path(root: &mut Value, path: &str, raw: &str) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::input(format!("config key {path:?}: {} is not a section", parts[..i].join("."))))?;
        let key = if obj.contains_key(*part) {
            part.to_string()
        } else {
            obj.keys()
                .find(|k| k.eq_ignore_ascii_case(part))
                .cloned()
                .ok_or_else(|| CliError::input(format!("unknown config key {path:?}")))?
        };
        cur = obj.get_mut(&key).expect("key present");
    }
    *cur = parse_leaf(cur, raw);
    Ok(())
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Builds the effective configuration. Unknown environment keys are ignored
/// with a warning; unknown file keys and flags are input errors.
pub fn resolve(
    file: Option<&Path>,
    env: impl IntoIterator<Item = (String, String)>,
    flags: &[(String, String)],
) -> Result<RunConfig, CliError> {
    let mut value = serde_json::to_value(RunConfig::default()).expect("config serializes");
    if let Some(p) = file {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
        merge(&mut value, v);
    }
    let mut env: Vec<(String, String)> = env.into_iter().collect();
    env.sort();
    for (k, v) in env {
        if let Some(path) = env_path(&k) {
            if let Err(e) = set_path(&mut value, &path, &v) {
                log::warn!("ignoring {k}: {e}");
            }
        }
    }
    for (k, v) in flags {
        set_path(&mut value, k, v)?;
    }
    let cfg: RunConfig =
        serde_json::from_value(value).map_err(|e| CliError::input(format!("invalid configuration: {e}")))?;
    cfg.model.validate()?;
    cfg.train.validate()?;
    cfg.decode_mode()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &str) -> String {
        v.to_string()
    }

    #[test]
    fn dotted_flags_are_split_out() {
        let (rest, flags) = split_dotted_flags(vec![s("train"), s("--train.steps"), s("3"), s("--sampler.T=4"), s("--out"), s("x"), s("--decode"), s("beam:2")]).unwrap();
        assert_eq!(rest, [s("train"), s("--out"), s("x")]);
        assert_eq!(flags, [(s("train.steps"), s("3")), (s("sampler.T"), s("4")), (s("decode"), s("beam:2"))]);
    }

    #[test]
    fn env_names_map_to_paths() {
        assert_eq!(env_path("SOVC_TRAIN__LEARNING_RATE").as_deref(), Some("train.learning_rate"));
        assert_eq!(env_path("SOVC_DATASET").as_deref(), Some("dataset"));
        assert_eq!(env_path("HOME"), None);
    }

    #[test]
    fn precedence_file_env_flag() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"train": {"steps": 10, "batch_size": 4}, "sampler": {"T": 6}}"#).unwrap();
        let env = vec![(s("SOVC_TRAIN__STEPS"), s("20")), (s("SOVC_SAMPLER__T"), s("7")), (s("SOVC_UNRELATED"), s("x"))];
        let cfg = resolve(Some(&p), env, &[(s("train.steps"), s("30"))]).unwrap();
        assert_eq!(cfg.train.steps, 30);
        assert_eq!(cfg.train.batch_size, 4);
        assert_eq!(cfg.sampler.t, 7);
    }

    #[test]
    fn string_and_path_fields() {
        let cfg = resolve(None, vec![], &[(s("dataset"), s("data/x")), (s("decode"), s("beam:3")), (s("sampler.strategy"), s("regular"))]).unwrap();
        assert_eq!(cfg.dataset, Some(PathBuf::from("data/x")));
        assert_eq!(cfg.decode_mode().unwrap(), DecodeMode::Beam(3));
        assert_eq!(cfg.sampler.strategy, sovc_core::sampler::Strategy::Regular);
    }

    #[test]
    fn bad_keys_and_values_are_input_errors() {
        for (k, v) in [("train.stepz", "1"), ("model.d_model", "\"big\""), ("decode", "fast"), ("model.heads", "5")] {
            let e = resolve(None, vec![], &[(s(k), s(v))]).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{k}");
        }
    }
}
