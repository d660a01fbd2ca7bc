use std::collections::{HashMap, HashSet};

use crate::metrics::stem::porter_stem;
use crate::metrics::EvalPair;

/// Unigram matching stage. Stages run in order; each only sees tokens left
/// unaligned by the previous ones.
#[derive(Debug, Clone)]
pub enum MatchStage {
    Exact,
    Stem,
    /// Word pairs treated as equivalent (symmetric).
    Synonym(HashSet<(String, String)>),
}

impl MatchStage {
    fn matches(&self, a: &str, b: &str, stems: &HashMap<&str, String>) -> bool {
        match self {
            MatchStage::Exact => a == b,
            MatchStage::Stem => stems[a] == stems[b],
            MatchStage::Synonym(t) => {
                t.contains(&(a.to_owned(), b.to_owned())) || t.contains(&(b.to_owned(), a.to_owned()))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeteorConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub stages: Vec<MatchStage>,
}

impl Default for MeteorConfig {
    fn default() -> Self {
        MeteorConfig {
            alpha: 0.9,
            beta: 3.0,
            gamma: 0.5,
            stages: vec![MatchStage::Exact, MatchStage::Stem],
        }
    }
}

/// Aligned (candidate index, reference index) pairs, sorted by candidate index.
pub type Alignment = Vec<(usize, usize)>;

/// Number of runs of matches contiguous and in the same order in both
/// sentences.
pub fn count_chunks(alignment: &[(usize, usize)]) -> usize {
    let mut sorted = alignment.to_vec();
    sorted.sort_unstable();
    let mut chunks = 0;
    let mut prev: Option<(usize, usize)> = None;
    for &(i, j) in &sorted {
        match prev {
            Some((pi, pj)) if i == pi + 1 && j == pj + 1 => {}
            _ => chunks += 1,
        }
        prev = Some((i, j));
    }
    chunks
}

const SEARCH_BUDGET: usize = 1_000_000;

struct StageSearch<'a> {
    /// Eligible reference positions per candidate position (ascending).
    options: Vec<Vec<usize>>,
    fixed: &'a [(usize, usize)],
    best: Option<(usize, usize, Alignment)>,
    visited: usize,
}

impl StageSearch<'_> {
    /// Depth-first over candidate positions, trying references in ascending
    /// order before skipping; the first alignment found with the most matches
    /// and then the fewest chunks wins, which is the lexicographically smallest
    /// pair list among equally good ones.
    fn run(&mut self, i: usize, used: &mut Vec<bool>, current: &mut Alignment) {
        self.visited += 1;
        if self.visited > SEARCH_BUDGET {
            return;
        }
        let bound = current.len()
            + self.options[i..]
                .iter()
                .filter(|o| o.iter().any(|&j| !used[j]))
                .count();
        if let Some((bm, _, _)) = &self.best {
            if bound < *bm {
                return;
            }
        }
        if i == self.options.len() {
            let mut all: Alignment = self.fixed.to_vec();
            all.extend_from_slice(current);
            let chunks = count_chunks(&all);
            let better = match &self.best {
                None => true,
                Some((bm, bc, _)) => current.len() > *bm || (current.len() == *bm && chunks < *bc),
            };
            if better {
                self.best = Some((current.len(), chunks, current.clone()));
            }
            return;
        }
        for k in 0..self.options[i].len() {
            let j = self.options[i][k];
            if used[j] {
                continue;
            }
            used[j] = true;
            current.push((i, j));
            self.run(i + 1, used, current);
            current.pop();
            used[j] = false;
        }
        self.run(i + 1, used, current);
    }
}

/// Stage-wise alignment: each stage adds the largest set of new matches,
/// preferring fewer chunks over the whole alignment.
pub fn align(candidate: &[String], reference: &[String], stages: &[MatchStage]) -> Alignment {
    let stems: HashMap<&str, String> = candidate
        .iter()
        .chain(reference)
        .map(|w| (w.as_str(), porter_stem(w)))
        .collect();
    let mut alignment: Alignment = Vec::new();
    for stage in stages {
        let cand_used: HashSet<usize> = alignment.iter().map(|p| p.0).collect();
        let ref_used: HashSet<usize> = alignment.iter().map(|p| p.1).collect();
        let options: Vec<Vec<usize>> = candidate
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if cand_used.contains(&i) {
                    return Vec::new();
                }
                reference
                    .iter()
                    .enumerate()
                    .filter(|(j, r)| !ref_used.contains(j) && stage.matches(c, r, &stems))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        if options.iter().all(Vec::is_empty) {
            continue;
        }
        let mut search = StageSearch {
            options,
            fixed: &alignment,
            best: None,
            visited: 0,
        };
        let mut used = vec![false; reference.len()];
        for &(_, j) in &alignment {
            used[j] = true;
        }
        search.run(0, &mut used, &mut Vec::new());
        if let Some((_, _, found)) = search.best {
            alignment.extend(found);
        }
    }
    alignment.sort_unstable();
    alignment
}

/// METEOR score of a candidate against one reference.
pub fn meteor_single(candidate: &[String], reference: &[String], config: &MeteorConfig) -> f64 {
    let alignment = align(candidate, reference, &config.stages);
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = p * r / (config.alpha * p + (1.0 - config.alpha) * r);
    let frag = count_chunks(&alignment) as f64 / m as f64;
    let penalty = config.gamma * frag.powf(config.beta);
    f_mean * (1.0 - penalty)
}

pub fn meteor_pair(pair: &EvalPair, config: &MeteorConfig) -> f64 {
    pair.references
        .iter()
        .map(|r| meteor_single(&pair.candidate, r, config))
        .fold(0.0, f64::max)
}

/// METEOR without synonym and paraphrase resources: exact then stemmed
/// unigram matching. Mean of per-pair best-reference scores.
pub fn meteor_lite(pairs: &[EvalPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let config = MeteorConfig::default();
    pairs.iter().map(|p| meteor_pair(p, &config)).sum::<f64>() / pairs.len() as f64
}
