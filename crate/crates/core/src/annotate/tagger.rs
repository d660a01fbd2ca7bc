use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PosTag {
    Det,
    Num,
    Pron,
    Adj,
    Adv,
    Noun,
    Verb,
    Aux,
    Prep,
    Conj,
}

/// Part-of-speech tagging over already tokenized, lowercased captions.
pub trait PosTagger {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag>;
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "every", "each", "another",
    "his", "her", "their", "its", "my", "your", "our", "no", "all", "both", "several", "many",
    "few", "most", "other",
];
const NUMBERS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "dozen",
    "couple",
];
const PRONOUNS: &[&str] = &[
    "he", "she", "it", "they", "we", "i", "you", "him", "them", "us", "me", "who", "which",
    "what", "himself", "herself", "itself", "themselves",
];
const CONJUNCTIONS: &[&str] = &["and", "or", "but", "nor", "&", "while", "as"];
const PREPOSITIONS: &[&str] = &[
    "of", "in", "on", "at", "with", "by", "from", "to", "into", "onto", "over", "under", "near",
    "behind", "beside", "between", "through", "across", "along", "around", "inside", "outside",
    "for", "about", "up", "down", "off", "out", "than", "like", "via", "against", "toward",
    "towards", "upon", "within", "without",
];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "does", "do",
    "did", "can", "could", "will", "would", "should", "may", "might", "must", "'s", "isn't",
    "aren't", "doesn't", "don't", "gets", "get", "seems", "appears",
];
const ADVERBS: &[&str] = &[
    "very", "slowly", "quickly", "fast", "now", "then", "there", "here", "together", "also",
    "still", "just", "really", "away", "back", "again", "not", "carefully", "happily", "loudly",
];
const ADJECTIVES: &[&str] = &[
    "small", "big", "large", "little", "young", "old", "red", "blue", "green", "yellow", "black",
    "white", "brown", "pink", "orange", "purple", "gray", "grey", "tall", "short", "long",
    "beautiful", "cute", "funny", "pretty", "happy", "sad", "baby", "fat", "thin", "asian",
    "animated", "cartoon", "blond", "blonde", "dark", "wild",
];
/// Base forms; `-s`/`-es` forms are derived.
const VERBS: &[&str] = &[
    "run", "walk", "talk", "play", "sing", "dance", "ride", "drive", "cook", "cut", "eat",
    "drink", "swim", "jump", "sit", "stand", "fly", "fall", "throw", "catch", "kick", "hit",
    "fight", "climb", "write", "read", "draw", "paint", "open", "close", "pour", "mix", "slice",
    "chop", "show", "explain", "speak", "smile", "laugh", "cry", "sleep", "shoot", "perform",
    "wash", "brush", "put", "take", "make", "give", "go", "come", "look", "watch", "hold", "hug",
    "kiss", "push", "pull", "carry", "lift", "drop", "move", "roll", "spin", "skate", "ski",
    "surf", "type", "use", "try", "teach", "wear", "peel", "fry", "bake", "add", "place", "lay",
    "lie", "chase", "bite", "bark", "feed", "pet", "crawl", "race", "shake", "wave", "point",
    "say", "tell", "sit", "sits", "demonstrate", "prepare", "stir", "grate", "load", "park",
];
const IRREGULAR_VERBS: &[&str] = &[
    "ran", "rode", "drove", "ate", "sat", "stood", "flew", "fell", "threw", "caught", "fought",
    "wrote", "drew", "sang", "spoke", "swam", "went", "came", "took", "made", "gave", "held",
    "said", "told", "does", "goes", "tries", "flies", "cries", "carries",
];
/// `-ing` words that are nouns.
const ING_NOUNS: &[&str] = &[
    "thing", "something", "nothing", "anything", "everything", "ceiling", "building", "king",
    "ring", "string", "evening", "morning", "painting", "wedding", "clothing", "offspring",
    "spring", "wing", "sibling", "duckling", "pudding", "stuffing", "icing", "frosting",
    "swing", "ping", "dumpling", "seasoning",
];

/// Closed-class word lists plus suffix heuristics, adequate for the short
/// declarative captions found in video-captioning corpora.
#[derive(Debug, Clone)]
pub struct RuleTagger {
    det: HashSet<&'static str>,
    num: HashSet<&'static str>,
    pron: HashSet<&'static str>,
    conj: HashSet<&'static str>,
    prep: HashSet<&'static str>,
    aux: HashSet<&'static str>,
    adv: HashSet<&'static str>,
    adj: HashSet<&'static str>,
    verbs: HashSet<String>,
    ing_nouns: HashSet<&'static str>,
}

impl Default for RuleTagger {
    fn default() -> Self {
        let set = |l: &[&'static str]| l.iter().copied().collect::<HashSet<_>>();
        let mut verbs = HashSet::new();
        for v in VERBS {
            verbs.insert(v.to_string());
            verbs.insert(format!("{v}s"));
            verbs.insert(format!("{v}es"));
            let stem = v.strip_suffix('e').unwrap_or(v);
            verbs.insert(format!("{stem}ed"));
        }
        verbs.extend(IRREGULAR_VERBS.iter().map(|v| v.to_string()));
        RuleTagger {
            det: set(DETERMINERS),
            num: set(NUMBERS),
            pron: set(PRONOUNS),
            conj: set(CONJUNCTIONS),
            prep: set(PREPOSITIONS),
            aux: set(AUXILIARIES),
            adv: set(ADVERBS),
            adj: set(ADJECTIVES),
            verbs,
            ing_nouns: set(ING_NOUNS),
        }
    }
}

impl RuleTagger {
    fn lexical(&self, w: &str) -> Option<PosTag> {
        if self.det.contains(w) {
            Some(PosTag::Det)
        } else if self.num.contains(w) || w.chars().all(|c| c.is_ascii_digit()) {
            Some(PosTag::Num)
        } else if self.pron.contains(w) {
            Some(PosTag::Pron)
        } else if self.conj.contains(w) {
            Some(PosTag::Conj)
        } else if self.prep.contains(w) {
            Some(PosTag::Prep)
        } else if self.aux.contains(w) {
            Some(PosTag::Aux)
        } else if self.adv.contains(w) || (w.ends_with("ly") && w.len() > 4) {
            Some(PosTag::Adv)
        } else if self.adj.contains(w) {
            Some(PosTag::Adj)
        } else {
            None
        }
    }

    fn looks_verbal(&self, w: &str) -> bool {
        self.verbs.contains(w)
            || (w.len() > 4 && w.ends_with("ing") && !self.ing_nouns.contains(w))
    }
}

impl PosTagger for RuleTagger {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag> {
        let mut tags: Vec<PosTag> = Vec::with_capacity(tokens.len());
        for w in tokens {
            let tag = match self.lexical(w) {
                Some(t) => t,
                None if self.looks_verbal(w) => {
                    // a verb form right after a determiner, number or adjective
                    // heads a noun phrase instead ("a cook", "the painting")
                    match tags.last() {
                        Some(PosTag::Det | PosTag::Num | PosTag::Adj) => PosTag::Noun,
                        _ => PosTag::Verb,
                    }
                }
                None => PosTag::Noun,
            };
            tags.push(tag);
        }
        tags
    }
}
