use std::cmp::Ordering;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::similarity::WordSimilarity;
use crate::data::BBox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_index: u32,
    pub bbox: BBox,
    pub class_label: String,
    pub confidence: f64,
}

/// One line of a detections file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoDetection {
    pub video_id: String,
    #[serde(flatten)]
    pub detection: Detection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectCandidate {
    pub subject_word: String,
    pub detection: Detection,
    pub similarity: f64,
}

fn candidate_order(a: &SubjectCandidate, b: &SubjectCandidate) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then(b.detection.confidence.total_cmp(&a.detection.confidence))
        .then(a.detection.frame_index.cmp(&b.detection.frame_index))
        .then(a.detection.bbox.cmp(&b.detection.bbox))
        .then(a.detection.class_label.cmp(&b.detection.class_label))
}

/// Scores every detection against the subject word and sorts by similarity,
/// then confidence (both descending), then frame index ascending. Remaining
/// ties fall back to box geometry and label so the order is total.
///
/// An empty result means the subject needs a manual box.
pub fn rank_candidates(
    subject_word: &str,
    detections: &[Detection],
    word_sim: &dyn WordSimilarity,
) -> Vec<SubjectCandidate> {
    let mut out: Vec<SubjectCandidate> = detections
        .iter()
        .map(|d| SubjectCandidate {
            subject_word: subject_word.to_owned(),
            detection: d.clone(),
            similarity: word_sim
                .similarity(&d.class_label, subject_word)
                .clamp(-1.0, 1.0),
        })
        .collect();
    out.sort_by(candidate_order);
    out
}

/// Reads JSON-lines detections. Blank lines are skipped.
pub fn read_detections(path: &Path) -> Result<Vec<VideoDetection>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let d: VideoDetection = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), n + 1), e))?;
        if !(0.0..=1.0).contains(&d.detection.confidence) {
            return Err(Error::validation(
                format!("{}:{}", path.display(), n + 1),
                format!("confidence {} outside [0,1]", d.detection.confidence),
            ));
        }
        out.push(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{ExactMatch, TrigramSimilarity};
    use proptest::prelude::*;

    fn det(label: &str, conf: f64, frame: u32) -> Detection {
        Detection {
            frame_index: frame,
            bbox: BBox::new(0, 0, 1, 1),
            class_label: label.into(),
            confidence: conf,
        }
    }

    #[test]
    fn exact_match_first() {
        let r = rank_candidates("dog", &[det("car", 0.99, 0), det("dog", 0.5, 3)], &ExactMatch);
        assert_eq!(r[0].detection.class_label, "dog");
        assert_eq!(r[0].similarity, 1.0);
    }

    #[test]
    fn confidence_breaks_similarity_ties() {
        let r = rank_candidates("dog", &[det("dog", 0.7, 0), det("dog", 0.9, 5)], &ExactMatch);
        assert_eq!(r[0].detection.confidence, 0.9);
        let r = rank_candidates("dog", &[det("dog", 0.7, 4), det("dog", 0.7, 2)], &ExactMatch);
        assert_eq!(r[0].detection.frame_index, 2);
    }

    #[test]
    fn empty_detections_give_empty_candidates() {
        assert!(rank_candidates("dog", &[], &ExactMatch).is_empty());
    }

    #[test]
    fn puppy_against_trigram_oracle() {
        // independent count: "#puppy#" -> {#pu,pup,upp,ppy,py#}; "#person#" ->
        // {#pe,per,ers,rso,son,on#}; "#dog#" -> {#do,dog,og#}; no shared
        // trigrams with either label, so both score 0 and confidence decides.
        let dets = [det("person", 0.6, 0), det("dog", 0.8, 0)];
        let r = rank_candidates("puppy", &dets, &TrigramSimilarity::new());
        assert_eq!(r[0].similarity, 0.0);
        assert_eq!(r[1].similarity, 0.0);
        assert_eq!(r[0].detection.class_label, "dog");
        // "puppies" shares #pu, pup, upp with "puppy": 3 / (sqrt(5) * sqrt(7))
        let dets = [det("puppies", 0.1, 0), det("dog", 0.9, 0)];
        let r = rank_candidates("puppy", &dets, &TrigramSimilarity::new());
        assert_eq!(r[0].detection.class_label, "puppies");
        assert!((r[0].similarity - 3.0 / 35f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn parses_detection_lines() {
        let line = r#"{"video_id":"v1","frame_index":2,"bbox":[1,2,3,4],"class_label":"dog","confidence":0.5}"#;
        let d: VideoDetection = serde_json::from_str(line).unwrap();
        assert_eq!(d.video_id, "v1");
        assert_eq!(d.detection.bbox, BBox::new(1, 2, 3, 4));
    }

    fn arb_detection() -> impl Strategy<Value = Detection> {
        (
            0u32..4,
            (0u32..3, 0u32..3, 1u32..3, 1u32..3),
            prop::sample::select(vec!["dog", "dogs", "cat", "man", "person"]),
            prop::sample::select(vec![0.1, 0.5, 0.9]),
        )
            .prop_map(|(f, (x, y, w, h), l, c)| Detection {
                frame_index: f,
                bbox: BBox::new(x, y, w, h),
                class_label: l.to_string(),
                confidence: c,
            })
    }

    proptest! {
        #[test]
        fn ordering_is_independent_of_input_order(
            dets in prop::collection::vec(arb_detection(), 0..12),
            seed in any::<u64>(),
        ) {
            let sim = TrigramSimilarity::new();
            let a = rank_candidates("dog", &dets, &sim);
            let mut shuffled = dets.clone();
            // deterministic Fisher-Yates from the seed
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = rank_candidates("dog", &shuffled, &sim);
            prop_assert_eq!(a, b);
        }
    }
}
