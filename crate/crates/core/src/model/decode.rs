use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::network::{CaptionModel, ModelInput};
use super::tensor::Mat;
use super::vocab::{BOS, EOS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

impl Default for DecodeMode {
    fn default() -> Self {
        DecodeMode::Greedy
    }
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeMode::Greedy => write!(f, "greedy"),
            DecodeMode::Beam(b) => write!(f, "beam:{b}"),
        }
    }
}

impl FromStr for DecodeMode {
    type Err = Error;

    /// `greedy` or `beam:<width>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "greedy" {
            return Ok(DecodeMode::Greedy);
        }
        match s.strip_prefix("beam:").map(str::parse::<usize>) {
            Some(Ok(b)) if b >= 1 => Ok(DecodeMode::Beam(b)),
            _ => Err(Error::Config(format!("decode mode {s:?}: expected greedy or beam:<width>"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub caption: String,
    /// Generated ids after BOS, including EOS when one was produced.
    pub ids: Vec<usize>,
    /// The first generated token was EOS.
    pub empty: bool,
}

/// Beam-search length normalizer `((5 + len) / 6)^0.6`.
pub fn length_penalty(len: usize) -> f64 {
    ((5.0 + len as f64) / 6.0).powf(0.6)
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

impl CaptionModel {
    /// Captions an input: encodes once, then decodes with `mode`.
    pub fn caption(&self, input: &ModelInput, mode: DecodeMode) -> Result<Generation> {
        let memory = self.memory(input)?;
        Ok(self.generate_from_memory(&memory, mode))
    }

    /// Decodes against `Concat(vbar, subject)`.
    pub fn generate(&self, vbar: &Mat, subject: &Mat, mode: DecodeMode) -> Generation {
        let mut data = vbar.data.clone();
        data.extend_from_slice(&subject.data);
        let memory = Mat::from_vec(vbar.rows + subject.rows, vbar.cols, data);
        self.generate_from_memory(&memory, mode)
    }

    pub fn generate_from_memory(&self, memory: &Mat, mode: DecodeMode) -> Generation {
        let ids = match mode {
            DecodeMode::Greedy => self.greedy(memory),
            DecodeMode::Beam(b) => self.beam(memory, b.max(1)),
        };
        Generation {
            caption: self.vocab.decode(&ids),
            empty: ids.first() == Some(&EOS),
            ids,
        }
    }

    fn greedy(&self, memory: &Mat) -> Vec<usize> {
        let mut ids = vec![BOS];
        while ids.len() <= self.config.max_caption_len + 1 {
            let logits = self.decoder_logits(memory, &ids);
            let next = argmax(logits.row(logits.rows - 1));
            ids.push(next);
            if next == EOS {
                break;
            }
        }
        ids.split_off(1)
    }

    /// Beam search over cumulative log-probabilities. Hypotheses ending in
    /// EOS (or reaching the length limit) are ranked by score divided by
    /// [`length_penalty`]. Ties prefer earlier beams and smaller token ids, so
    /// width 1 reproduces greedy decoding.
    fn beam(&self, memory: &Mat, width: usize) -> Vec<usize> {
        let max_len = self.config.max_caption_len;
        let mut live: Vec<(Vec<usize>, f64)> = vec![(vec![BOS], 0.0)];
        let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();
        while !live.is_empty() {
            let mut cands: Vec<(f64, usize, usize)> = Vec::new();
            for (b, (ids, score)) in live.iter().enumerate() {
                let logits = self.decoder_logits(memory, ids);
                let lp = log_softmax(logits.row(logits.rows - 1));
                cands.extend(lp.iter().enumerate().map(|(t, l)| (score + l, b, t)));
            }
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut next = Vec::new();
            for &(score, b, t) in cands.iter().take(width) {
                let mut ids = live[b].0.clone();
                ids.push(t);
                let generated = ids.len() - 1;
                if t == EOS || generated > max_len {
                    finished.push((ids, score / length_penalty(generated)));
                } else {
                    next.push((ids, score));
                }
            }
            live = next;
        }
        let mut best = 0;
        for (i, f) in finished.iter().enumerate() {
            if f.1 > finished[best].1 {
                best = i;
            }
        }
        finished.swap_remove(best).0.split_off(1)
    }
}
