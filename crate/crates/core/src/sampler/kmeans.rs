use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster id per row, each in `0..k`.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Inertia after every Lloyd iteration (assignment, repair, mean update).
    pub inertia_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn num_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }

    /// Row indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.num_clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l].push(i);
        }
        m
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances from each row to its cluster centroid.
pub fn inertia(rows: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    rows.iter()
        .zip(labels)
        .map(|(r, &l)| dist2(r, &centroids[l]))
        .sum()
}

/// k-means++ seeding: the first centre is uniform; each further centre is
/// drawn with probability proportional to its squared distance to the nearest
/// chosen centre. When every remaining distance is zero the lowest-index
/// unchosen row is taken.
fn init_plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = vec![rng.below(n)];
    let mut d2: Vec<f64> = rows.iter().map(|r| dist2(r, &rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            rng.categorical(&d2)
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(dist2(r, &rows[next]));
        }
    }
    chosen.into_iter().map(|i| rows[i].clone()).collect()
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

/// Fills each empty cluster (lowest id first) with the row farthest from its
/// current centroid, taken from clusters that have more than one member. Ties
/// go to the lowest row index.
fn repair_empty(rows: &[Vec<f64>], labels: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in rows.iter().enumerate() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            let d = dist2(r, &centroids[labels[i]]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("some cluster has two members when k <= n");
        sizes[labels[i]] -= 1;
        labels[i] = empty;
        sizes[empty] = 1;
        centroids[empty] = rows[i].clone();
    }
}

fn update_means(rows: &[Vec<f64>], labels: &[usize], centroids: &mut [Vec<f64>]) {
    let d = rows[0].len();
    let mut sums = vec![vec![0.0; d]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
        if n > 0 {
            *c = s.into_iter().map(|v| v / n as f64).collect();
        }
    }
}

pub(crate) fn kmeans_with_rng(
    rows: &[Vec<f64>],
    k: usize,
    rng: &mut SplitMix64,
    max_iters: usize,
) -> Result<ClusterAssignment> {
    let n = rows.len();
    if k == 0 {
        return Err(Error::Config("cluster count must be >= 1".into()));
    }
    if k > n {
        return Err(Error::Config(format!(
            "{k} clusters requested for {n} frames; sample_frames handles N <= T by using every frame"
        )));
    }
    let mut centroids = init_plus_plus(rows, k, rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut next: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids)).collect();
        repair_empty(rows, &mut next, &mut centroids);
        update_means(rows, &next, &mut centroids);
        history.push(inertia(rows, &next, &centroids));
        let converged = next == labels;
        labels = next;
        if converged {
            break;
        }
    }
    Ok(ClusterAssignment {
        labels,
        centroids,
        inertia_history: history,
    })
}

/// Lloyd's k-means with k-means++ seeding from a [`SplitMix64`] stream.
/// Deterministic for a given seed.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<ClusterAssignment> {
    kmeans_with_rng(rows, k, &mut SplitMix64::seeded(seed), max_iters)
}
