use crate::metrics::ngram::ngrams;
use crate::metrics::EvalPair;

const MAX_N: usize = 4;

/// Per-pair sufficient statistics: clipped matches and candidate totals for
/// n = 1..4, candidate length and closest reference length.
#[derive(Debug, Clone, Copy, Default)]
struct BleuStats {
    clipped: [usize; MAX_N],
    total: [usize; MAX_N],
    cand_len: usize,
    ref_len: usize,
}

fn stats(pair: &EvalPair) -> BleuStats {
    let mut s = BleuStats {
        cand_len: pair.candidate.len(),
        ..Default::default()
    };
    // closest reference length, ties resolved towards the shorter one
    s.ref_len = pair
        .references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(s.cand_len), r))
        .unwrap_or(0);
    for n in 1..=MAX_N {
        let cand = ngrams(&pair.candidate, n);
        let refs: Vec<_> = pair.references.iter().map(|r| ngrams(r, n)).collect();
        for (g, &c) in &cand {
            let max_ref = refs.iter().filter_map(|r| r.get(g)).copied().max().unwrap_or(0);
            s.clipped[n - 1] += c.min(max_ref);
            s.total[n - 1] += c;
        }
    }
    s
}

fn score(s: &BleuStats, eps: f64) -> f64 {
    if s.cand_len == 0 {
        return 0.0;
    }
    let mut log_p = 0.0;
    for n in 0..MAX_N {
        let (m, t) = (s.clipped[n] as f64 + eps, s.total[n] as f64 + eps);
        if m == 0.0 || t == 0.0 {
            return 0.0;
        }
        log_p += (m / t).ln() / MAX_N as f64;
    }
    let (c, r) = (s.cand_len as f64, s.ref_len as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * log_p.exp()
}

/// Corpus BLEU-4: modified n-gram precisions summed over the corpus, uniform
/// geometric mean, brevity penalty against the closest reference lengths.
/// Unsmoothed: any n with zero matches (or zero candidate n-grams) gives 0.
pub fn bleu4(pairs: &[EvalPair]) -> f64 {
    let mut acc = BleuStats::default();
    for p in pairs {
        let s = stats(p);
        for n in 0..MAX_N {
            acc.clipped[n] += s.clipped[n];
            acc.total[n] += s.total[n];
        }
        acc.cand_len += s.cand_len;
        acc.ref_len += s.ref_len;
    }
    score(&acc, 0.0)
}

/// Sentence BLEU-4 with `1e-9` added to every match and total count, for
/// per-pair diagnostics only.
pub fn sentence_bleu4(pair: &EvalPair) -> f64 {
    score(&stats(pair), 1e-9)
}
