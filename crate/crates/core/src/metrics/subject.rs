use std::collections::HashSet;

use crate::annotate::{extract_subjects, PosTagger};
use crate::metrics::stem::porter_stem;
use crate::metrics::EvalPair;

/// Whether the first subject extracted from the candidate, stemmed, is among
/// the stemmed ground-truth subject words.
pub fn subject_correct(pair: &EvalPair, tagger: &dyn PosTagger, blacklist: &HashSet<String>) -> bool {
    let text = pair.candidate.join(" ");
    let Some(predicted) = extract_subjects(&text, tagger, blacklist).into_iter().next() else {
        return false;
    };
    let predicted = porter_stem(&predicted);
    pair.gt_subject_words
        .iter()
        .any(|w| porter_stem(&w.to_lowercase()) == predicted)
}

pub fn subject_accuracy(pairs: &[EvalPair], tagger: &dyn PosTagger, blacklist: &HashSet<String>) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let correct = pairs
        .iter()
        .filter(|p| subject_correct(p, tagger, blacklist))
        .count();
    correct as f64 / pairs.len() as f64
}
