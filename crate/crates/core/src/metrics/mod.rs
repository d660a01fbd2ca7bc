//! Caption evaluation: BLEU-4, METEOR (exact and stemmed matching only),
//! ROUGE-L, CIDEr-D and subject accuracy.

mod bleu;
mod cider;
mod meteor;
mod ngram;
mod rouge;
mod stem;
mod subject;

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::{default_blacklist, extract_subjects, PosTagger, RuleTagger};
use crate::data::Dataset;
use crate::text::tokenize_caption;
use crate::{Error, Result};

pub use bleu::{bleu4, sentence_bleu4};
pub use cider::{cider_d, cider_d_per_pair, CiderIdf};
pub use meteor::{align, count_chunks, meteor_lite, meteor_pair, meteor_single, Alignment, MatchStage, MeteorConfig};
pub use rouge::{rouge_l, rouge_l_pair};
pub use stem::porter_stem;
pub use subject::{subject_accuracy, subject_correct};

/// One generated caption and what it is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub id: String,
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
    pub gt_subject_words: BTreeSet<String>,
}

impl EvalPair {
    pub fn new(id: impl Into<String>, candidate: &str, references: &[&str]) -> Self {
        EvalPair {
            id: id.into(),
            candidate: tokenize_caption(candidate),
            references: references.iter().map(|r| tokenize_caption(r)).collect(),
            gt_subject_words: BTreeSet::new(),
        }
    }

    pub fn with_subjects<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.gt_subject_words = words.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    #[serde(rename = "B@4")]
    pub bleu4: f64,
    #[serde(rename = "M")]
    pub meteor: f64,
    #[serde(rename = "R")]
    pub rouge_l: f64,
    #[serde(rename = "C")]
    pub cider_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub id: String,
    /// Smoothed sentence-level BLEU-4; diagnostic only.
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider_d: f64,
    pub subject_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub num_pairs: usize,
    pub corpus: CorpusScores,
    pub subject_accuracy: f64,
    pub per_pair: Vec<PairScores>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn evaluate(pairs: &[EvalPair], tagger: &dyn PosTagger, blacklist: &HashSet<String>) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::validation("predictions", "no caption pairs to evaluate"));
    }
    for p in pairs {
        if p.references.is_empty() {
            return Err(Error::validation(p.id.clone(), "pair has no reference captions"));
        }
    }
    let idf = CiderIdf::new(pairs);
    let config = MeteorConfig::default();
    let per_pair: Vec<PairScores> = pairs
        .iter()
        .map(|p| PairScores {
            id: p.id.clone(),
            bleu4: sentence_bleu4(p),
            meteor: meteor_pair(p, &config),
            rouge_l: rouge_l_pair(p),
            cider_d: idf.score(&p.candidate, &p.references),
            subject_correct: subject_correct(p, tagger, blacklist),
        })
        .collect();
    let n = pairs.len() as f64;
    let mean = |f: fn(&PairScores) -> f64| per_pair.iter().map(f).sum::<f64>() / n;
    let corpus = CorpusScores {
        bleu4: bleu4(pairs),
        meteor: mean(|s| s.meteor),
        rouge_l: mean(|s| s.rouge_l),
        cider_d: mean(|s| s.cider_d),
    };
    let subject_accuracy = per_pair.iter().filter(|s| s.subject_correct).count() as f64 / n;
    Ok(EvalReport {
        num_pairs: pairs.len(),
        corpus,
        subject_accuracy,
        per_pair,
    })
}

/// One line of a predictions file. `id` is `video_id/subject_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub caption: String,
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), n + 1), e))?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for p in predictions {
        let line = serde_json::to_string(p).expect("prediction serializes");
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    file.flush().map_err(|e| Error::io(path, e))
}

/// Pairs each prediction with the references of the sample it names. The
/// ground-truth subject set holds the sample's subject word plus the first
/// subject extracted from each reference caption.
pub fn pairs_from_dataset(dataset: &Dataset, predictions: &[Prediction]) -> Result<Vec<EvalPair>> {
    let tagger = RuleTagger::default();
    let blacklist = default_blacklist();
    let mut seen = HashSet::new();
    let mut dangling = Vec::new();
    let mut pairs = Vec::with_capacity(predictions.len());
    for pred in predictions {
        if !seen.insert(pred.id.as_str()) {
            return Err(Error::validation(pred.id.clone(), "duplicate prediction id"));
        }
        let sample = pred
            .id
            .split_once('/')
            .and_then(|(v, s)| dataset.video(v).and_then(|video| video.subject(s)));
        let Some(sample) = sample else {
            dangling.push(pred.id.clone());
            continue;
        };
        let mut gt: BTreeSet<String> = BTreeSet::new();
        gt.insert(sample.subject_word.to_lowercase());
        for c in &sample.captions {
            if let Some(w) = extract_subjects(c, &tagger, &blacklist).into_iter().next() {
                gt.insert(w);
            }
        }
        pairs.push(EvalPair {
            id: pred.id.clone(),
            candidate: tokenize_caption(&pred.caption),
            references: sample.captions.iter().map(|c| tokenize_caption(c)).collect(),
            gt_subject_words: gt,
        });
    }
    if !dangling.is_empty() {
        return Err(Error::DanglingReference(dangling));
    }
    let total: usize = dataset.videos.iter().map(|v| v.subjects.len()).sum();
    if pairs.len() < total {
        log::warn!("{} of {} subject samples have no prediction", total - pairs.len(), total);
    }
    Ok(pairs)
}
