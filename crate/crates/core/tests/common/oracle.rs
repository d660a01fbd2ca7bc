//! Brute-force reference scorers. Deliberately naive: no hashing, exhaustive
//! enumeration wherever the library searches.

pub struct Case {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

pub fn case(candidate: &str, references: &[&str]) -> Case {
    Case {
        candidate: toks(candidate),
        references: references.iter().map(|r| toks(r)).collect(),
    }
}

fn grams(t: &[String], n: usize) -> Vec<Vec<String>> {
    if t.len() < n {
        return Vec::new();
    }
    (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

fn distinct(list: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

pub fn bleu4(cases: &[Case]) -> f64 {
    let mut matched = [0f64; 4];
    let mut total = [0f64; 4];
    let mut c_len = 0f64;
    let mut r_len = 0f64;
    for cs in cases {
        c_len += cs.candidate.len() as f64;
        let mut best = usize::MAX;
        let mut best_diff = usize::MAX;
        for r in &cs.references {
            let d = r.len().abs_diff(cs.candidate.len());
            if d < best_diff || (d == best_diff && r.len() < best) {
                best = r.len();
                best_diff = d;
            }
        }
        r_len += best as f64;
        for n in 1..=4 {
            let cg = grams(&cs.candidate, n);
            for g in distinct(&cg) {
                let c = count(&cg, &g);
                let mut m = 0;
                for r in &cs.references {
                    m = m.max(count(&grams(r, n), &g));
                }
                matched[n - 1] += c.min(m) as f64;
                total[n - 1] += c as f64;
            }
        }
    }
    if c_len == 0.0 {
        return 0.0;
    }
    let mut prod = 1.0;
    for n in 0..4 {
        if matched[n] == 0.0 {
            return 0.0;
        }
        prod *= matched[n] / total[n];
    }
    let bp = if c_len > r_len { 1.0 } else { (1.0 - r_len / c_len).exp() };
    bp * prod.powf(0.25)
}

fn is_subsequence(sub: &[&String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|x| x == *s))
}

/// Longest common subsequence by enumerating every subsequence of `a`.
pub fn lcs(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 16);
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
        if sub.len() > best && is_subsequence(&sub, b) {
            best = sub.len();
        }
    }
    best
}

pub fn rouge_l(cases: &[Case]) -> f64 {
    let beta2 = 1.2f64 * 1.2;
    let mut sum = 0.0;
    for cs in cases {
        let mut best = 0.0f64;
        for r in &cs.references {
            let l = lcs(&cs.candidate, r) as f64;
            if l > 0.0 {
                let p = l / cs.candidate.len() as f64;
                let rc = l / r.len() as f64;
                best = best.max((1.0 + beta2) * p * rc / (rc + beta2 * p));
            }
        }
        sum += best;
    }
    sum / cases.len() as f64
}

/// Per-pair CIDEr-D: one document per pair (union of its references), weight
/// `tf * (ln N - ln max(1, df))`, clipped products, bigram-count length
/// penalty with sigma 6, mean over n = 1..4 and references, times ten.
pub fn cider_d_per_pair(cases: &[Case]) -> Vec<f64> {
    let docs = cases.len() as f64;
    let df = |g: &[String]| -> f64 {
        let mut c = 0;
        for cs in cases {
            if cs.references.iter().any(|r| count(&grams(r, g.len()), g) > 0) {
                c += 1;
            }
        }
        (c.max(1)) as f64
    };
    let vector = |t: &[String], n: usize| -> Vec<(Vec<String>, f64)> {
        let gs = grams(t, n);
        distinct(&gs)
            .into_iter()
            .map(|g| {
                let w = count(&gs, &g) as f64 * (docs.ln() - df(&g).ln());
                (g, w)
            })
            .collect()
    };
    let mut out = Vec::new();
    for cs in cases {
        let mut acc = 0.0;
        for r in &cs.references {
            let dl = cs.candidate.len().saturating_sub(1) as f64 - r.len().saturating_sub(1) as f64;
            let pen = (-dl * dl / 72.0).exp();
            for n in 1..=4 {
                let hv = vector(&cs.candidate, n);
                let rv = vector(r, n);
                let mut dot = 0.0;
                for (g, h) in &hv {
                    for (g2, w) in &rv {
                        if g == g2 {
                            dot += h.min(*w) * w;
                        }
                    }
                }
                let nh = hv.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
                let nr = rv.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
                if nh > 0.0 && nr > 0.0 {
                    dot /= nh * nr;
                }
                acc += dot * pen;
            }
        }
        out.push(acc / 4.0 / cs.references.len() as f64 * 10.0);
    }
    out
}

pub fn cider_d(cases: &[Case]) -> f64 {
    let v = cider_d_per_pair(cases);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Porter stems for the fixture vocabulary, taken from the published
/// vocabulary/output lists rather than computed.
pub const STEMS: &[(&str, &str)] = &[
    ("a", "a"),
    ("are", "ar"),
    ("ball", "ball"),
    ("car", "car"),
    ("cars", "car"),
    ("cat", "cat"),
    ("cats", "cat"),
    ("dog", "dog"),
    ("dogs", "dog"),
    ("down", "down"),
    ("drive", "drive"),
    ("driving", "drive"),
    ("field", "field"),
    ("green", "green"),
    ("guitar", "guitar"),
    ("horse", "hors"),
    ("horses", "hors"),
    ("in", "in"),
    ("is", "is"),
    ("jumped", "jump"),
    ("jumping", "jump"),
    ("jumps", "jump"),
    ("man", "man"),
    ("men", "men"),
    ("on", "on"),
    ("piano", "piano"),
    ("play", "plai"),
    ("playing", "plai"),
    ("plays", "plai"),
    ("red", "red"),
    ("riding", "ride"),
    ("run", "run"),
    ("running", "run"),
    ("runs", "run"),
    ("sits", "sit"),
    ("sitting", "sit"),
    ("street", "street"),
    ("table", "tabl"),
    ("talking", "talk"),
    ("the", "the"),
    ("two", "two"),
    ("woman", "woman"),
    ("women", "women"),
];

pub fn stem(w: &str) -> &'static str {
    STEMS
        .iter()
        .find(|(k, _)| *k == w)
        .map(|(_, v)| *v)
        .unwrap_or_else(|| panic!("no fixture stem for {w:?}"))
}

fn chunks(pairs: &[(usize, usize)]) -> usize {
    let mut p = pairs.to_vec();
    p.sort();
    let mut c = 0;
    for k in 0..p.len() {
        if k == 0 || p[k].0 != p[k - 1].0 + 1 || p[k].1 != p[k - 1].1 + 1 {
            c += 1;
        }
    }
    c
}

/// Every injective partial matching between free candidate and reference
/// positions where `eq` holds.
fn all_matchings(
    cand: &[String],
    refs: &[String],
    fixed: &[(usize, usize)],
    eq: &dyn Fn(&str, &str) -> bool,
) -> Vec<Vec<(usize, usize)>> {
    let edges: Vec<(usize, usize)> = (0..cand.len())
        .flat_map(|i| (0..refs.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            !fixed.iter().any(|p| p.0 == i || p.1 == j) && eq(&cand[i], &refs[j])
        })
        .collect();
    assert!(edges.len() <= 20, "fixture too large for exhaustive search");
    let mut out = Vec::new();
    for mask in 0u32..(1 << edges.len()) {
        let chosen: Vec<(usize, usize)> = (0..edges.len()).filter(|k| mask >> k & 1 == 1).map(|k| edges[k]).collect();
        let ok = chosen.iter().enumerate().all(|(a, x)| {
            chosen[a + 1..].iter().all(|y| x.0 != y.0 && x.1 != y.1)
        });
        if ok {
            out.push(chosen);
        }
    }
    out
}

pub fn meteor_single(cand: &[String], refs: &[String]) -> f64 {
    let stages: [&dyn Fn(&str, &str) -> bool; 2] = [&|a, b| a == b, &|a, b| stem(a) == stem(b)];
    let mut fixed: Vec<(usize, usize)> = Vec::new();
    for eq in stages {
        let mut best: Option<(usize, usize, Vec<(usize, usize)>)> = None;
        for mut m in all_matchings(cand, refs, &fixed, eq) {
            m.sort();
            let mut all = fixed.clone();
            all.extend(&m);
            let key = (m.len(), chunks(&all));
            let better = match &best {
                None => true,
                Some((bm, bc, bl)) => {
                    key.0 > *bm || (key.0 == *bm && (key.1 < *bc || (key.1 == *bc && m < *bl)))
                }
            };
            if better {
                best = Some((key.0, key.1, m));
            }
        }
        fixed.extend(best.unwrap().2);
    }
    let m = fixed.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / cand.len() as f64;
    let r = m / refs.len() as f64;
    let f = p * r / (0.9 * p + 0.1 * r);
    let frag = chunks(&fixed) as f64 / m;
    f * (1.0 - 0.5 * frag.powi(3))
}

pub fn meteor(cases: &[Case]) -> f64 {
    let mut s = 0.0;
    for cs in cases {
        let mut best = 0.0f64;
        for r in &cs.references {
            best = best.max(meteor_single(&cs.candidate, r));
        }
        s += best;
    }
    s / cases.len() as f64
}

/// Corpora used for oracle equivalence. Vocabulary is restricted to
/// [`STEMS`].
pub fn fixture_corpora() -> Vec<(&'static str, Vec<Case>)> {
    vec![
        (
            "identity",
            vec![
                case("a man is driving a car", &["a man is driving a car"]),
                case("two dogs are running", &["two dogs are running"]),
                case("the cat sits on the table", &["the cat sits on the table"]),
            ],
        ),
        (
            "mixed",
            vec![
                case(
                    "a man is driving a red car",
                    &["a man is driving a car", "a man drive the red car down the street"],
                ),
                case("dogs are running on the field", &["two dog runs in the green field", "the dogs are playing"]),
                case("a woman plays the piano", &["a woman is playing a piano", "the woman plays piano"]),
                case("the cat is jumping", &["a cat jumped on the table"]),
            ],
        ),
        (
            "hard",
            vec![
                case("the horse the man is riding", &["a man is riding the horse", "the man is riding a horse"]),
                case("a a a a", &["a man is talking"]),
                case("men talking", &["two men are talking on the street"]),
                case("cats sitting on a ball", &["the cat sits on the ball", "a ball"]),
                case("guitar", &["a man plays the guitar"]),
            ],
        ),
    ]
}
