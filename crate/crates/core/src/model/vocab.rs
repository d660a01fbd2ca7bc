use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::tokenize_caption;
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Caption vocabulary. Ids are dense: the four special tokens first, then
/// words in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_freq: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    min_freq: usize,
    specials: BTreeMap<String, usize>,
    tokens: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Words occurring at least `min_freq` times across `captions`.
    pub fn build<S: AsRef<str>>(captions: &[S], min_freq: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for c in captions {
            for w in tokenize_caption(c.as_ref()) {
                *counts.entry(w).or_insert(0) += 1;
            }
        }
        let words = counts
            .into_iter()
            .filter(|(w, n)| *n >= min_freq && !SPECIALS.contains(&w.as_str()))
            .map(|(w, _)| w);
        Self::from_tokens(SPECIALS.iter().map(|s| s.to_string()).chain(words).collect(), min_freq)
    }

    fn from_tokens(tokens: Vec<String>, min_freq: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            tokens,
            index,
            min_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// `[BOS] words.. [EOS]`, truncated to at most `max_len` words.
    pub fn encode(&self, caption: &str, max_len: usize) -> Vec<usize> {
        let mut ids = vec![BOS];
        ids.extend(tokenize_caption(caption).iter().take(max_len).map(|w| self.id(w)));
        ids.push(EOS);
        ids
    }

    /// Words up to the first EOS; BOS and PAD are skipped.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .take_while(|&&i| i != EOS)
            .filter(|&&i| i != BOS && i != PAD)
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            min_freq: self.min_freq,
            specials: [("bos", BOS), ("eos", EOS), ("pad", PAD), ("unk", UNK)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            tokens: self.index.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(text).map_err(|e| Error::parse("vocabulary", e))?;
        let expected = [("bos", BOS), ("eos", EOS), ("pad", PAD), ("unk", UNK)];
        for (k, v) in expected {
            if file.specials.get(k) != Some(&v) {
                return Err(Error::validation("vocabulary", format!("special {k} must have id {v}")));
            }
        }
        let mut tokens = vec![String::new(); file.tokens.len()];
        for (t, &i) in &file.tokens {
            if i >= tokens.len() || !tokens[i].is_empty() {
                return Err(Error::validation("vocabulary", format!("ids are not dense (token {t:?} -> {i})")));
            }
            tokens[i] = t.clone();
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(s) {
                return Err(Error::validation("vocabulary", format!("id {i} must be {s}")));
            }
        }
        Ok(Self::from_tokens(tokens, file.min_freq))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_freq_filters_rare_words() {
        let v = Vocabulary::build(&["a man runs", "a man walks", "a dog"], 2);
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("man"), 5);
        assert_eq!(v.id("dog"), UNK);
        assert_eq!(v.encode("A man, sleeping.", 20), vec![BOS, 4, 5, UNK, EOS]);
        assert_eq!(v.decode(&[BOS, 4, 5, EOS, 4]), "a man");
    }

    #[test]
    fn json_round_trip() {
        let v = Vocabulary::build(&["x y x y z"], 1);
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn rejects_sparse_ids() {
        let bad = r#"{"min_freq":1,"specials":{"bos":1,"eos":2,"pad":0,"unk":3},
            "tokens":{"<pad>":0,"<bos>":1,"<eos>":2,"<unk>":3,"a":5}}"#;
        assert!(Vocabulary::from_json(bad).is_err());
    }
}
