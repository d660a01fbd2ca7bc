use std::collections::{HashMap, HashSet};

/// Similarity between a detector class label and a subject word, in [-1, 1].
pub trait WordSimilarity {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// 1 for identical strings, 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatch;

impl WordSimilarity for ExactMatch {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            1.0
        } else {
            0.0
        }
    }
}

/// Cosine similarity of character-trigram count vectors. Each word is padded
/// with `#` on both sides, so `dog` yields `#do`, `dog`, `og#`. Pairs listed
/// in the synonym table score 1.
#[derive(Debug, Clone, Default)]
pub struct TrigramSimilarity {
    synonyms: HashSet<(String, String)>,
}

impl TrigramSimilarity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_synonyms<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut synonyms = HashSet::new();
        for (a, b) in pairs {
            let (a, b) = (a.into(), b.into());
            synonyms.insert((b.clone(), a.clone()));
            synonyms.insert((a, b));
        }
        TrigramSimilarity { synonyms }
    }

    pub fn trigrams(word: &str) -> HashMap<String, usize> {
        let padded: Vec<char> = std::iter::once('#')
            .chain(word.chars())
            .chain(std::iter::once('#'))
            .collect();
        let mut counts = HashMap::new();
        for w in padded.windows(3) {
            *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        }
        counts
    }
}

impl WordSimilarity for TrigramSimilarity {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b || self.synonyms.contains(&(a.to_owned(), b.to_owned())) {
            return 1.0;
        }
        let (ta, tb) = (Self::trigrams(a), Self::trigrams(b));
        let dot: usize = ta
            .iter()
            .filter_map(|(g, &n)| tb.get(g).map(|&m| n * m))
            .sum();
        let norm = |t: &HashMap<String, usize>| {
            (t.values().map(|&n| (n * n) as f64).sum::<f64>()).sqrt()
        };
        let denom = norm(&ta) * norm(&tb);
        if denom == 0.0 {
            0.0
        } else {
            dot as f64 / denom
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigram_basics() {
        let s = TrigramSimilarity::new();
        assert_eq!(s.similarity("dog", "dog"), 1.0);
        assert_eq!(s.similarity("dog", "cat"), 0.0);
        // "#dogs#" shares #do, dog with "#dog#": 2 / (sqrt(3) * sqrt(4))
        let v = s.similarity("dog", "dogs");
        assert!((v - 2.0 / 12f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn synonyms_are_symmetric() {
        let s = TrigramSimilarity::with_synonyms([("puppy", "dog")]);
        assert_eq!(s.similarity("dog", "puppy"), 1.0);
        assert_eq!(s.similarity("puppy", "dog"), 1.0);
    }
}
