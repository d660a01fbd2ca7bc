//! Deterministic inputs shared by the benchmarks.

use sovc_core::metrics::EvalPair;
use sovc_core::sampler::FrameFeatures;

/// Integer hash used to build reproducible inputs without an RNG dependency.
pub fn mix(i: u64) -> u64 {
    let mut z = i.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const WORDS: [&str; 16] = [
    "a", "man", "woman", "dog", "is", "playing", "riding", "the", "guitar", "bike", "on", "street", "two", "people",
    "cooking", "running",
];

fn sentence(seed: u64, len: usize) -> String {
    (0..len)
        .map(|k| WORDS[(mix(seed * 31 + k as u64) % WORDS.len() as u64) as usize])
        .collect::<Vec<_>>()
        .join(" ")
}

/// `n` pairs, each with `refs` references of 8 to 11 words.
pub fn caption_pairs(n: usize, refs: usize) -> Vec<EvalPair> {
    (0..n as u64)
        .map(|i| {
            let r: Vec<String> = (0..refs as u64).map(|j| sentence(i * 100 + j, 8 + (j as usize % 4))).collect();
            let r: Vec<&str> = r.iter().map(String::as_str).collect();
            EvalPair::new(format!("p{i}"), &sentence(i * 100 + 99, 9), &r)
        })
        .collect()
}

/// `n` unit-norm-ish frame rows of dimension `d` drawn from three drifting
/// groups, plus a subject vector.
pub fn frame_features(n: usize, d: usize) -> FrameFeatures {
    let val = |i: u64| (mix(i) % 1000) as f64 / 1000.0 + 0.05;
    let rows = (0..n)
        .map(|i| {
            let g = (i * 3 / n) as u64;
            (0..d as u64).map(|k| val(g * 1000 + k) + 0.1 * val(i as u64 * 7919 + k)).collect()
        })
        .collect();
    let subject = (0..d as u64).map(|k| val(k + 555)).collect();
    FrameFeatures::new(rows, subject).expect("valid features")
}
