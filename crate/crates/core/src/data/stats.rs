use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_videos: usize,
    pub num_subject_samples: usize,
    pub num_regions: usize,
    /// Distinct (video, frame) pairs carrying at least one region.
    pub num_annotated_frames: usize,
    pub num_captions: usize,
    /// Subjects-per-video count → mean captions per subject over those videos.
    pub captions_per_subject_count: BTreeMap<usize, f64>,
    /// Subject word → number of subject samples using it.
    pub subject_word_frequencies: BTreeMap<String, usize>,
}

pub fn dataset_stats(dataset: &Dataset) -> DatasetStats {
    let mut stats = DatasetStats {
        num_videos: dataset.videos.len(),
        ..Default::default()
    };
    // subjects-per-video -> (captions, subjects)
    let mut by_count: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for video in &dataset.videos {
        let mut frames = HashSet::new();
        let mut captions = 0;
        for s in &video.subjects {
            stats.num_regions += s.regions.len();
            frames.extend(s.regions.iter().map(|r| r.frame_index));
            captions += s.captions.len();
            *stats
                .subject_word_frequencies
                .entry(s.subject_word.clone())
                .or_default() += 1;
        }
        stats.num_subject_samples += video.subjects.len();
        stats.num_annotated_frames += frames.len();
        stats.num_captions += captions;
        if !video.subjects.is_empty() {
            let e = by_count.entry(video.subjects.len()).or_default();
            e.0 += captions;
            e.1 += video.subjects.len();
        }
    }
    stats.captions_per_subject_count = by_count
        .into_iter()
        .map(|(k, (caps, subs))| (k, caps as f64 / subs as f64))
        .collect();
    stats
}
