use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotate::rank::{rank_candidates, SubjectCandidate, VideoDetection};
use crate::annotate::similarity::WordSimilarity;
use crate::data::{Dataset, SubjectRegion};
use crate::error::{Error, Result};

/// `video_id/subject_id`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubjectKey {
    pub video_id: String,
    pub subject_id: String,
}

impl SubjectKey {
    pub fn new(video_id: impl Into<String>, subject_id: impl Into<String>) -> Self {
        SubjectKey {
            video_id: video_id.into(),
            subject_id: subject_id.into(),
        }
    }
}

impl fmt::Display for SubjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.video_id, self.subject_id)
    }
}

impl FromStr for SubjectKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('/') {
            Some((v, sub)) if !v.is_empty() && !sub.is_empty() => Ok(SubjectKey::new(v, sub)),
            _ => Err(Error::parse(
                "correction key",
                format!("{s:?} is not video_id/subject_id"),
            )),
        }
    }
}

/// A reviewer's verdict on one subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    /// Install the ranked candidate at this index.
    Accept(usize),
    /// Replace the region with a hand-drawn one.
    Manual(SubjectRegion),
    /// Drop the subject sample.
    Discard,
}

/// Corrections keyed by `video_id/subject_id`, serialized as a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CorrectionFile {
    pub entries: BTreeMap<String, Decision>,
}

impl CorrectionFile {
    pub fn insert(&mut self, key: &SubjectKey, decision: Decision) {
        self.entries.insert(key.to_string(), decision);
    }

    pub fn get(&self, key: &SubjectKey) -> Option<&Decision> {
        self.entries.get(&key.to_string())
    }
}

pub fn read_corrections(path: &Path) -> Result<CorrectionFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CorrectionFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    for k in file.entries.keys() {
        k.parse::<SubjectKey>()?;
    }
    Ok(file)
}

pub fn write_corrections(path: &Path, file: &CorrectionFile) -> Result<()> {
    let mut text = serde_json::to_string_pretty(file).expect("corrections serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MergeReport {
    /// Top-ranked candidate installed without a reviewer decision.
    pub auto_installed: Vec<String>,
    pub accepted: Vec<String>,
    pub manual: Vec<String>,
    pub discarded: Vec<String>,
    /// Subjects that kept their existing regions (no decision, no candidates).
    pub kept: Vec<String>,
    /// Subjects dropped because no region could be assigned.
    pub unresolved: Vec<String>,
    /// Videos left with zero subjects.
    pub empty_videos: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub dataset: Dataset,
    pub report: MergeReport,
}

/// Applies reviewer decisions to ranked candidates. Subjects without a
/// decision get their top-1 candidate. The returned dataset satisfies every
/// dataset invariant.
pub fn merge_corrections(
    draft: &Dataset,
    candidates: &HashMap<SubjectKey, Vec<SubjectCandidate>>,
    corrections: &CorrectionFile,
) -> Result<MergeOutcome> {
    let mut known = std::collections::HashSet::new();
    for v in &draft.videos {
        for s in &v.subjects {
            known.insert(SubjectKey::new(&v.video_id, &s.subject_id).to_string());
        }
    }
    let dangling: Vec<String> = corrections
        .entries
        .keys()
        .filter(|k| !known.contains(*k))
        .cloned()
        .collect();
    if !dangling.is_empty() {
        return Err(Error::DanglingReference(dangling));
    }

    let mut report = MergeReport::default();
    let mut out = draft.clone();
    for video in &mut out.videos {
        let mut kept = Vec::with_capacity(video.subjects.len());
        for mut subject in std::mem::take(&mut video.subjects) {
            let key = SubjectKey::new(&video.video_id, &subject.subject_id);
            let name = key.to_string();
            let ranked = candidates.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            let candidate_region = |c: &SubjectCandidate| SubjectRegion {
                frame_index: c.detection.frame_index,
                bbox: c.detection.bbox,
            };
            let region = match corrections.get(&key) {
                Some(Decision::Discard) => {
                    report.discarded.push(name);
                    continue;
                }
                Some(Decision::Accept(i)) => {
                    let c = ranked.get(*i).ok_or_else(|| {
                        Error::validation(
                            name.clone(),
                            format!("accept index {i} out of range ({} candidates)", ranked.len()),
                        )
                    })?;
                    report.accepted.push(name.clone());
                    Some(candidate_region(c))
                }
                Some(Decision::Manual(r)) => {
                    report.manual.push(name.clone());
                    Some(*r)
                }
                None => match ranked.first() {
                    Some(c) => {
                        report.auto_installed.push(name.clone());
                        Some(candidate_region(c))
                    }
                    None if !subject.regions.is_empty() => {
                        report.kept.push(name.clone());
                        None
                    }
                    None => {
                        report.unresolved.push(name);
                        continue;
                    }
                },
            };
            if let Some(r) = region {
                video
                    .check_region(&r)
                    .map_err(|m| Error::validation(name.clone(), m))?;
                subject.regions = vec![r];
            }
            kept.push(subject);
        }
        video.subjects = kept;
        if video.subjects.is_empty() {
            report.empty_videos.push(video.video_id.clone());
        }
    }
    out.validate()?;
    Ok(MergeOutcome {
        dataset: out,
        report,
    })
}

/// Full pipeline: rank each subject's detections, then merge corrections.
pub fn annotate_dataset(
    draft: &Dataset,
    detections: &[VideoDetection],
    corrections: &CorrectionFile,
    word_sim: &dyn WordSimilarity,
) -> Result<MergeOutcome> {
    let mut by_video: HashMap<&str, Vec<crate::annotate::Detection>> = HashMap::new();
    for d in detections {
        let video = draft.video(&d.video_id).ok_or_else(|| {
            Error::DanglingReference(vec![format!("detection video_id {}", d.video_id)])
        })?;
        let region = SubjectRegion {
            frame_index: d.detection.frame_index,
            bbox: d.detection.bbox,
        };
        video
            .check_region(&region)
            .map_err(|m| Error::validation(format!("detection in {}", d.video_id), m))?;
        by_video
            .entry(d.video_id.as_str())
            .or_default()
            .push(d.detection.clone());
    }
    let mut candidates = HashMap::new();
    for v in &draft.videos {
        let dets = by_video.get(v.video_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        for s in &v.subjects {
            candidates.insert(
                SubjectKey::new(&v.video_id, &s.subject_id),
                rank_candidates(&s.subject_word, dets, word_sim),
            );
        }
    }
    merge_corrections(draft, &candidates, corrections)
}
