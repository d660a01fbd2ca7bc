//! Dataset construction: subject-word extraction from captions, ranking of
//! detector proposals against subject words, and merging of manual
//! corrections into a validated dataset.

mod corrections;
mod rank;
mod similarity;
mod subjects;
mod tagger;

pub use corrections::{
    annotate_dataset, merge_corrections, read_corrections, write_corrections, CorrectionFile,
    Decision, MergeOutcome, MergeReport, SubjectKey,
};
pub use rank::{read_detections, rank_candidates, Detection, SubjectCandidate, VideoDetection};
pub use similarity::{ExactMatch, TrigramSimilarity, WordSimilarity};
pub use subjects::{
    build_subject_samples, default_blacklist, extract_subject_phrases, extract_subjects,
    SubjectPhrase,
};
pub use tagger::{PosTag, PosTagger, RuleTagger};
