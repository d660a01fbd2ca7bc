use std::collections::{BTreeMap, HashSet};

use crate::annotate::tagger::{PosTag, PosTagger};
use crate::data::SubjectSample;
use crate::text::tokenize_caption;

/// Abstract subjects that never denote an on-screen entity.
pub fn default_blacklist() -> HashSet<String> {
    ["video", "clip", "footage", "scene", "screen"]
        .into_iter()
        .map(String::from)
        .collect()
}

/// A subject head noun together with the noun phrase it was taken from
/// (leading determiners and numbers removed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectPhrase {
    pub head: String,
    pub phrase: Vec<String>,
}

/// Head nouns of the caption's subject noun phrases. An empty result means
/// the caption has no usable subject.
pub fn extract_subjects(
    caption: &str,
    tagger: &dyn PosTagger,
    blacklist: &HashSet<String>,
) -> Vec<String> {
    extract_subject_phrases(caption, tagger, blacklist)
        .into_iter()
        .map(|p| p.head)
        .collect()
}

pub fn extract_subject_phrases(
    caption: &str,
    tagger: &dyn PosTagger,
    blacklist: &HashSet<String>,
) -> Vec<SubjectPhrase> {
    let tokens = tokenize_caption(caption);
    if tokens.is_empty() {
        return Vec::new();
    }
    let tags = tagger.tag(&tokens);
    let is_predicate = |t: &PosTag| matches!(t, PosTag::Verb | PosTag::Aux);

    let mut span = match tags.iter().position(is_predicate) {
        Some(v) => 0..v,
        None => 0..tokens.len(),
    };
    // existential "there is/are NP ..."
    if span.len() == 1 && tokens[0] == "there" && tags.get(1) == Some(&PosTag::Aux) {
        let end = tags[2..]
            .iter()
            .position(is_predicate)
            .map_or(tokens.len(), |p| p + 2);
        span = 2..end;
    }

    let mut out = Vec::new();
    let mut start = span.start;
    for i in span.clone().chain(std::iter::once(span.end)) {
        if i == span.end || tags[i] == PosTag::Conj {
            if let Some(p) = phrase_head(&tokens[start..i], &tags[start..i], blacklist) {
                out.push(p);
            }
            start = i + 1;
        }
    }
    out
}

/// Head of one conjunct: the last noun before the first preposition. When that
/// head is missing or blacklisted, the attached prepositional phrase is tried.
fn phrase_head(
    tokens: &[String],
    tags: &[PosTag],
    blacklist: &HashSet<String>,
) -> Option<SubjectPhrase> {
    let prep = tags
        .iter()
        .position(|t| *t == PosTag::Prep)
        .unwrap_or(tokens.len());
    let head = tags[..prep].iter().rposition(|t| *t == PosTag::Noun);
    match head {
        Some(h) if !blacklist.contains(&tokens[h]) => {
            let first = tags[..=h]
                .iter()
                .position(|t| !matches!(t, PosTag::Det | PosTag::Num))
                .unwrap_or(h);
            Some(SubjectPhrase {
                head: tokens[h].clone(),
                phrase: tokens[first..=h].to_vec(),
            })
        }
        _ if prep < tokens.len() => {
            phrase_head(&tokens[prep + 1..], &tags[prep + 1..], blacklist)
        }
        _ => None,
    }
}

/// Groups a video's raw captions by their first extracted subject word,
/// producing region-less subject samples (`s0`, `s1`, ... in order of first
/// appearance). Captions without a subject are returned separately.
pub fn build_subject_samples(
    captions: &[String],
    tagger: &dyn PosTagger,
    blacklist: &HashSet<String>,
) -> (Vec<SubjectSample>, Vec<String>) {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut discarded = Vec::new();
    for c in captions {
        match extract_subjects(c, tagger, blacklist).into_iter().next() {
            Some(word) => {
                if !groups.contains_key(&word) {
                    order.push(word.clone());
                }
                groups.entry(word).or_default().push(c.clone());
            }
            None => discarded.push(c.clone()),
        }
    }
    let samples = order
        .into_iter()
        .enumerate()
        .map(|(i, word)| SubjectSample {
            subject_id: format!("s{i}"),
            captions: groups.remove(&word).unwrap_or_default(),
            subject_word: word,
            regions: Vec::new(),
        })
        .collect();
    (samples, discarded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::RuleTagger;

    fn subjects(caption: &str) -> Vec<String> {
        extract_subjects(caption, &RuleTagger::default(), &default_blacklist())
    }

    #[test]
    fn simple_subject() {
        assert_eq!(subjects("a man is driving a car"), ["man"]);
        assert_eq!(subjects("A woman is driving a car."), ["woman"]);
        assert_eq!(subjects("two men are talking"), ["men"]);
    }

    #[test]
    fn blacklisted_head_recurses_into_prepositional_phrase() {
        assert_eq!(subjects("a video of a dog"), ["dog"]);
        assert!(subjects("a video is playing").is_empty());
    }

    #[test]
    fn no_noun_before_verb() {
        assert!(subjects("run fast now").is_empty());
    }

    #[test]
    fn coordinated_subjects() {
        assert_eq!(subjects("a man and a woman are dancing"), ["man", "woman"]);
    }

    #[test]
    fn multiword_subject_keeps_head_and_phrase() {
        let p = extract_subject_phrases(
            "an ice hockey player is skating",
            &RuleTagger::default(),
            &default_blacklist(),
        );
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].head, "player");
        assert_eq!(p[0].phrase, ["ice", "hockey", "player"]);
    }

    #[test]
    fn existential_there() {
        assert_eq!(subjects("there is a cat sitting on a sofa"), ["cat"]);
    }

    #[test]
    fn pronoun_subject_is_not_extracted() {
        assert!(subjects("he is running").is_empty());
    }

    #[test]
    fn grouping_by_subject() {
        let caps: Vec<String> = [
            "a man is running",
            "a dog is barking",
            "the man runs fast",
            "a video is playing",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let (samples, dropped) =
            build_subject_samples(&caps, &RuleTagger::default(), &default_blacklist());
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].subject_word, "man");
        assert_eq!(samples[0].captions.len(), 2);
        assert_eq!(samples[1].subject_id, "s1");
        assert_eq!(dropped, ["a video is playing"]);
    }
}
