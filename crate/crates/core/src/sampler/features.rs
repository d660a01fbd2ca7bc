use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Frames, Image, ImageView};
use crate::error::{Error, Result};

const SFF_MAGIC: &[u8; 4] = b"SFF1";

/// Produces a fixed-length feature vector for one RGB frame.
pub trait FrameFeatureExtractor {
    fn dim(&self) -> usize;
    fn extract(&self, image: ImageView<'_>) -> Vec<f64>;
}

/// Desk-scale stand-in for a pretrained CNN: a 4×4 grid of per-channel mean
/// intensities (48 values in `[0,1]`, ordered row, column, channel) followed
/// by an 8-bin histogram per channel (24 values, fraction of pixels per bin,
/// bin = value / 32). 72 dimensions in total.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToyExtractor;

pub const GRID: usize = 4;
const BINS: usize = 8;

/// Half-open pixel range of grid cell `cell` along an axis of length `len`.
/// Axes shorter than the grid reuse the nearest pixel.
pub(crate) fn grid_span(cell: usize, len: usize, grid: usize) -> std::ops::Range<usize> {
    let lo = cell * len / grid;
    let hi = (cell + 1) * len / grid;
    if hi > lo {
        lo..hi
    } else {
        let p = lo.min(len - 1);
        p..p + 1
    }
}

/// Mean of each channel over a `grid`×`grid` partition, values scaled to
/// `[0,1]`; ordered row, column, channel.
pub(crate) fn grid_pool(image: ImageView<'_>, grid: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid * grid * 3);
    for gy in 0..grid {
        let ys = grid_span(gy, image.height, grid);
        for gx in 0..grid {
            let xs = grid_span(gx, image.width, grid);
            let mut sum = [0.0f64; 3];
            for y in ys.clone() {
                for x in xs.clone() {
                    let p = image.pixel(x, y);
                    for c in 0..3 {
                        sum[c] += f64::from(p[c]);
                    }
                }
            }
            let n = (ys.len() * xs.len()) as f64 * 255.0;
            out.extend(sum.iter().map(|s| s / n));
        }
    }
    out
}

impl FrameFeatureExtractor for ToyExtractor {
    fn dim(&self) -> usize {
        GRID * GRID * 3 + 3 * BINS
    }

    fn extract(&self, image: ImageView<'_>) -> Vec<f64> {
        let mut v = grid_pool(image, GRID);
        let mut hist = [[0usize; BINS]; 3];
        for px in image.data.chunks_exact(3) {
            for c in 0..3 {
                hist[c][usize::from(px[c]) * BINS / 256] += 1;
            }
        }
        let n = (image.width * image.height) as f64;
        for h in &hist {
            v.extend(h.iter().map(|&k| k as f64 / n));
        }
        v
    }
}

/// Per-frame features (one row per frame) and the subject's feature vector,
/// all rows L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub rows: Vec<Vec<f64>>,
    pub subject: Vec<f64>,
}

impl FrameFeatures {
    pub fn new(rows: Vec<Vec<f64>>, subject: Vec<f64>) -> Result<Self> {
        let f = FrameFeatures { rows, subject };
        f.validate()?;
        Ok(f)
    }

    pub fn num_frames(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.subject.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() || self.subject.is_empty() {
            return Err(Error::Contract("features need N >= 1 and d >= 1".into()));
        }
        let d = self.subject.len();
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Contract(format!(
                    "row {i} has dimension {}, expected {d}",
                    r.len()
                )));
            }
        }
        let finite = self
            .rows
            .iter()
            .flatten()
            .chain(&self.subject)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Contract("non-finite feature value".into()));
        }
        Ok(())
    }

    /// Cosine similarity of every frame to the subject.
    pub fn subject_similarities(&self) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| cosine_sim(r, &self.subject))
            .collect()
    }
}

fn l2_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

pub fn extract_frame_features(
    frames: &Frames,
    subject_crop: &Image,
    extractor: &dyn FrameFeatureExtractor,
) -> Result<FrameFeatures> {
    if frames.num_frames == 0 {
        return Err(Error::Contract("no frames to extract".into()));
    }
    let d = extractor.dim();
    let checked = |v: Vec<f64>| {
        if v.len() == d {
            Ok(l2_normalize(v))
        } else {
            Err(Error::Contract(format!(
                "extractor returned {} values, declared dimension {d}",
                v.len()
            )))
        }
    };
    let rows = frames
        .iter()
        .map(|f| checked(extractor.extract(f)))
        .collect::<Result<Vec<_>>>()?;
    let subject = checked(extractor.extract(subject_crop.view()))?;
    FrameFeatures::new(rows, subject)
}

/// `a·b / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "dimension mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine similarity of a zero vector".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Writes the `.sff` feature cache: magic, big-endian u32 N and d, N·d f32
/// values, then d f32 values for the subject.
pub fn write_sff(path: &Path, features: &FrameFeatures) -> Result<()> {
    let (n, d) = (features.num_frames(), features.dim());
    let mut out = Vec::with_capacity(12 + 4 * d * (n + 1));
    out.extend_from_slice(SFF_MAGIC);
    out.extend_from_slice(&(n as u32).to_be_bytes());
    out.extend_from_slice(&(d as u32).to_be_bytes());
    for v in features.rows.iter().flatten().chain(&features.subject) {
        out.extend_from_slice(&(*v as f32).to_be_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_sff(path: &Path) -> Result<FrameFeatures> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |m: String| Error::Format(format!("{}: {m}", path.display()));
    if bytes.len() < 12 || &bytes[..4] != SFF_MAGIC {
        return Err(fail("bad header".into()));
    }
    let n = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_be_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let need = 4 * d * (n + 1);
    if bytes.len() - 12 != need {
        return Err(fail(format!(
            "payload is {} bytes, header implies {need}",
            bytes.len() - 12
        )));
    }
    let vals: Vec<f64> = bytes[12..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_be_bytes(c.try_into().unwrap())))
        .collect();
    let rows = vals[..n * d].chunks(d).map(<[f64]>::to_vec).collect();
    FrameFeatures::new(rows, vals[n * d..].to_vec())
}
