use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::features::FrameFeatures;
use crate::sampler::kmeans::{kmeans_with_rng, ClusterAssignment};
use crate::sampler::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Evenly spaced frames.
    Regular,
    /// T draws without replacement from the softmax of subject similarity.
    Similarity,
    /// Similarity draws with a minimum index gap between picks.
    AddingInterval,
    /// k-means over frames, one softmax-weighted draw per cluster.
    Clustering,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Regular => "regular",
            Strategy::Similarity => "similarity",
            Strategy::AddingInterval => "adding_interval",
            Strategy::Clustering => "clustering",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "regular" => Ok(Strategy::Regular),
            "similarity" => Ok(Strategy::Similarity),
            "adding_interval" => Ok(Strategy::AddingInterval),
            "clustering" => Ok(Strategy::Clustering),
            _ => Err(Error::Config(format!("unknown sampling strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Number of frames to select (and clusters to form).
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub kmeans_max_iters: usize,
    pub strategy: Strategy,
    /// Minimum spacing for [`Strategy::AddingInterval`]; `None` means
    /// `floor(N / (2T))`.
    pub min_gap: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            t: 32,
            seed: 0,
            kmeans_max_iters: 100,
            strategy: Strategy::Clustering,
            min_gap: None,
        }
    }
}

/// Within-cluster selection probabilities `p(f_i | C_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProbs {
    pub cluster: usize,
    pub members: Vec<usize>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    /// Selected frame indices, ascending; padded by repeating the last index
    /// when the video has no more than T frames.
    pub indices: Vec<usize>,
    pub probs: Vec<ClusterProbs>,
    pub assignment: Option<ClusterAssignment>,
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax of subject similarity restricted to each cluster.
pub fn cluster_probs(
    features: &FrameFeatures,
    assignment: &ClusterAssignment,
) -> Result<Vec<ClusterProbs>> {
    let sims = features.subject_similarities()?;
    Ok(cluster_probs_from_sims(&sims, assignment))
}

fn cluster_probs_from_sims(sims: &[f64], assignment: &ClusterAssignment) -> Vec<ClusterProbs> {
    assignment
        .members()
        .into_iter()
        .enumerate()
        .map(|(j, members)| {
            let s: Vec<f64> = members.iter().map(|&i| sims[i]).collect();
            ClusterProbs {
                cluster: j,
                probs: softmax(&s),
                members,
            }
        })
        .collect()
}

/// `round(k (N-1) / (T-1))` for `k = 0..T`; all zeros when `T = 1`.
fn regular_indices(n: usize, t: usize) -> Vec<usize> {
    if t == 1 {
        return vec![0];
    }
    (0..t)
        .map(|k| ((k * (n - 1)) as f64 / (t - 1) as f64).round() as usize)
        .collect()
}

fn draw_without_replacement(
    sims: &[f64],
    t: usize,
    min_gap: usize,
    rng: &mut SplitMix64,
) -> Vec<usize> {
    let n = sims.len();
    let mut picked: Vec<usize> = Vec::with_capacity(t);
    while picked.len() < t {
        let mut gap = min_gap;
        let admissible = loop {
            let cand: Vec<usize> = (0..n)
                .filter(|i| !picked.contains(i))
                .filter(|&i| picked.iter().all(|&p| i.abs_diff(p) >= gap))
                .collect();
            if !cand.is_empty() || gap == 0 {
                break cand;
            }
            // infeasible spacing: relax
            gap /= 2;
        };
        let scores: Vec<f64> = admissible.iter().map(|&i| sims[i]).collect();
        picked.push(admissible[rng.categorical(&softmax(&scores))]);
    }
    picked
}

fn singleton_assignment(features: &FrameFeatures) -> ClusterAssignment {
    ClusterAssignment {
        labels: (0..features.num_frames()).collect(),
        centroids: features.rows.clone(),
        inertia_history: vec![0.0],
    }
}

/// Selects `config.t` frames according to the configured strategy.
pub fn sample_frames(features: &FrameFeatures, config: &SamplerConfig) -> Result<SampleResult> {
    features.validate()?;
    let t = config.t;
    if t == 0 {
        return Err(Error::Config("T must be >= 1".into()));
    }
    let n = features.num_frames();
    let mut rng = SplitMix64::seeded(config.seed);

    if n <= t {
        let mut indices: Vec<usize> = (0..n).collect();
        indices.resize(t, n - 1);
        let (probs, assignment) = if config.strategy == Strategy::Clustering {
            let a = singleton_assignment(features);
            (cluster_probs(features, &a)?, Some(a))
        } else {
            (Vec::new(), None)
        };
        return Ok(SampleResult {
            indices,
            probs,
            assignment,
        });
    }

    let (mut indices, probs, assignment) = match config.strategy {
        Strategy::Regular => (regular_indices(n, t), Vec::new(), None),
        Strategy::Similarity => {
            let sims = features.subject_similarities()?;
            (draw_without_replacement(&sims, t, 0, &mut rng), Vec::new(), None)
        }
        Strategy::AddingInterval => {
            let sims = features.subject_similarities()?;
            let gap = config.min_gap.unwrap_or(n / (2 * t));
            (draw_without_replacement(&sims, t, gap, &mut rng), Vec::new(), None)
        }
        Strategy::Clustering => {
            let a = kmeans_with_rng(&features.rows, t, &mut rng, config.kmeans_max_iters)?;
            let sims = features.subject_similarities()?;
            let probs = cluster_probs_from_sims(&sims, &a);
            let picks = probs
                .iter()
                .map(|c| c.members[rng.categorical(&c.probs)])
                .collect();
            (picks, probs, Some(a))
        }
    };
    indices.sort_unstable();
    indices.dedup();
    if let Some(&last) = indices.last() {
        indices.resize(t, last);
    }
    Ok(SampleResult {
        indices,
        probs,
        assignment,
    })
}
