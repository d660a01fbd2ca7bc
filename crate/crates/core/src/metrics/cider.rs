use std::collections::{HashMap, HashSet};

use crate::metrics::ngram::ngrams;
use crate::metrics::EvalPair;

const MAX_N: usize = 4;
const SIGMA: f64 = 6.0;

/// Document frequencies over the reference sets (one document per pair) and
/// the log corpus size. Built once per corpus and read-only afterwards.
pub struct CiderIdf<'a> {
    df: HashMap<&'a [String], usize>,
    log_docs: f64,
}

struct TfIdf<'a> {
    vecs: [HashMap<&'a [String], f64>; MAX_N],
    norms: [f64; MAX_N],
    /// Bigram count, the length measure used by the reference CIDEr-D scorer.
    length: usize,
}

impl<'a> CiderIdf<'a> {
    pub fn new(pairs: &'a [EvalPair]) -> Self {
        if pairs.len() < 2 {
            log::warn!(
                "CIDEr-D over {} pair(s): inverse document frequencies are degenerate",
                pairs.len()
            );
        }
        let mut df = HashMap::new();
        for p in pairs {
            let mut seen = HashSet::new();
            for r in &p.references {
                for n in 1..=MAX_N {
                    seen.extend(ngrams(r, n).into_keys());
                }
            }
            for g in seen {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        CiderIdf {
            df,
            log_docs: (pairs.len() as f64).ln(),
        }
    }

    fn tfidf<'b>(&self, tokens: &'b [String]) -> TfIdf<'b> {
        let mut out = TfIdf {
            vecs: Default::default(),
            norms: [0.0; MAX_N],
            length: tokens.len().saturating_sub(1),
        };
        for n in 1..=MAX_N {
            for (g, tf) in ngrams(tokens, n) {
                let df = self.df.get(g).copied().unwrap_or(0).max(1) as f64;
                let w = tf as f64 * (self.log_docs - df.ln());
                out.norms[n - 1] += w * w;
                out.vecs[n - 1].insert(g, w);
            }
        }
        for v in &mut out.norms {
            *v = v.sqrt();
        }
        out
    }

    /// CIDEr-D of one candidate against its references: clipped TF-IDF cosine
    /// per n, Gaussian length penalty, averaged over n and references, ×10.
    pub fn score(&self, candidate: &[String], references: &[Vec<String>]) -> f64 {
        if references.is_empty() {
            return 0.0;
        }
        let hyp = self.tfidf(candidate);
        let mut total = [0.0; MAX_N];
        for r in references {
            let rv = self.tfidf(r);
            let delta = hyp.length as f64 - rv.length as f64;
            let penalty = (-(delta * delta) / (2.0 * SIGMA * SIGMA)).exp();
            for n in 0..MAX_N {
                let mut val: f64 = hyp.vecs[n]
                    .iter()
                    .map(|(g, h)| {
                        let rw = rv.vecs[n].get(g).copied().unwrap_or(0.0);
                        h.min(rw) * rw
                    })
                    .sum();
                if hyp.norms[n] != 0.0 && rv.norms[n] != 0.0 {
                    val /= hyp.norms[n] * rv.norms[n];
                }
                total[n] += val * penalty;
            }
        }
        let mean_n = total.iter().sum::<f64>() / MAX_N as f64;
        mean_n / references.len() as f64 * 10.0
    }
}

pub fn cider_d_per_pair(pairs: &[EvalPair]) -> Vec<f64> {
    let idf = CiderIdf::new(pairs);
    pairs
        .iter()
        .map(|p| idf.score(&p.candidate, &p.references))
        .collect()
}

/// Corpus CIDEr-D: mean of per-pair scores, IDF taken from the references of
/// the whole corpus.
pub fn cider_d(pairs: &[EvalPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    cider_d_per_pair(pairs).iter().sum::<f64>() / pairs.len() as f64
}
