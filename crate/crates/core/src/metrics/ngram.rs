use std::collections::HashMap;

pub(crate) type Counts<'a> = HashMap<&'a [String], usize>;

/// Counts of all `n`-grams of `tokens`.
pub(crate) fn ngrams(tokens: &[String], n: usize) -> Counts<'_> {
    let mut c = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *c.entry(w).or_insert(0) += 1;
        }
    }
    c
}
