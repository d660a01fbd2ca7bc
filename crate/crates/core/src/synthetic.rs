//! Procedurally rendered videos with two moving objects each, used for
//! overfitting checks and demos. Every object has its own caption, so the
//! two subjects of a video must be told apart by their boxes.

use std::path::Path;

use crate::data::{save_dataset, write_svf, BBox, Dataset, Frames, Image, Split, SubjectRegion, SubjectSample, VideoRecord};
use crate::Result;

pub const COLORS: [(&str, [u8; 3]); 4] = [
    ("red", [220, 40, 40]),
    ("green", [40, 200, 60]),
    ("blue", [50, 80, 230]),
    ("yellow", [230, 210, 40]),
];
pub const SHAPES: [&str; 2] = ["ball", "box"];
pub const DIRECTIONS: [&str; 4] = ["left", "right", "up", "down"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_videos: usize,
    pub num_frames: usize,
    /// Frame width and height in pixels.
    pub size: usize,
    /// Object side length in pixels.
    pub object: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_videos: 8,
            num_frames: 16,
            size: 32,
            object: 8,
        }
    }
}

/// Appearance and motion of one object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectSpec {
    pub color: usize,
    pub shape: usize,
    pub direction: usize,
}

impl ObjectSpec {
    pub fn caption(&self) -> String {
        format!(
            "a {} {} is moving {}",
            COLORS[self.color].0, SHAPES[self.shape], DIRECTIONS[self.direction]
        )
    }
}

/// Object `s` of video `v`. Over the first eight videos the sixteen
/// (color, shape, direction) triples are distinct, and the two objects of a
/// video differ in color and shape.
pub fn object_spec(v: usize, s: usize) -> ObjectSpec {
    let half = (v / 4) % 2;
    ObjectSpec {
        color: (v + 2 * s) % 4,
        shape: (s + half) % 2,
        direction: (2 * half + v + s) % 4,
    }
}

fn background(v: usize) -> [u8; 3] {
    [
        (16 + 12 * (v % 4)) as u8,
        (16 + 10 * ((v / 2) % 4)) as u8,
        (24 + 8 * (v % 8)) as u8,
    ]
}

/// Top-left corner of object `s` at frame `f`.
fn position(spec: &SyntheticSpec, s: usize, direction: usize, f: usize) -> (usize, usize) {
    let start = if s == 0 { spec.size * 3 / 16 } else { spec.size * 9 / 16 };
    let travel = f / 2;
    let (dx, dy): (isize, isize) = match direction {
        0 => (-1, 0),
        1 => (1, 0),
        2 => (0, -1),
        _ => (0, 1),
    };
    let max = (spec.size - spec.object) as isize;
    let clamp = |v: isize| v.clamp(0, max) as usize;
    (
        clamp(start as isize + dx * travel as isize),
        clamp(start as isize + dy * travel as isize),
    )
}

fn draw(img: &mut Image, spec: &SyntheticSpec, obj: &ObjectSpec, x0: usize, y0: usize) {
    let n = spec.object;
    let r2 = (n as f64 / 2.0).powi(2);
    for y in 0..n {
        for x in 0..n {
            let inside = obj.shape == 1 || {
                let (cx, cy) = (x as f64 + 0.5 - n as f64 / 2.0, y as f64 + 0.5 - n as f64 / 2.0);
                cx * cx + cy * cy <= r2
            };
            if inside {
                img.put(x0 + x, y0 + y, COLORS[obj.color].1);
            }
        }
    }
}

/// One rendered video and its annotation record (frames stored as
/// `videos/<id>.svf`).
pub fn render_video(spec: &SyntheticSpec, v: usize) -> (VideoRecord, Frames) {
    let objs = [object_spec(v, 0), object_spec(v, 1)];
    let images: Vec<Image> = (0..spec.num_frames)
        .map(|f| {
            let bg = background(v);
            let mut img = Image::from_fn(spec.size, spec.size, |_, _| bg);
            for (s, o) in objs.iter().enumerate() {
                let (x, y) = position(spec, s, o.direction, f);
                draw(&mut img, spec, o, x, y);
            }
            img
        })
        .collect();
    let frames = Frames::from_images(&images).expect("uniform frame sizes");
    let subjects = objs
        .iter()
        .enumerate()
        .map(|(s, o)| {
            let (x, y) = position(spec, s, o.direction, 0);
            let side = spec.object as u32;
            SubjectSample {
                subject_id: format!("s{s}"),
                subject_word: SHAPES[o.shape].to_string(),
                regions: vec![SubjectRegion {
                    frame_index: 0,
                    bbox: BBox::new(x as u32, y as u32, side, side),
                }],
                captions: vec![o.caption()],
            }
        })
        .collect();
    let id = format!("syn{v:02}");
    let record = VideoRecord {
        frame_source: format!("videos/{id}.svf"),
        video_id: id,
        num_frames: spec.num_frames as u32,
        width: spec.size as u32,
        height: spec.size as u32,
        subjects,
    };
    (record, frames)
}

pub fn render_dataset(spec: &SyntheticSpec) -> (Dataset, Vec<Frames>) {
    let (videos, frames) = (0..spec.num_videos).map(|v| render_video(spec, v)).unzip();
    (Dataset::new(Split::Train, videos), frames)
}

/// Renders the set into `dir` (annotations plus one SVF per video) and
/// returns it with `root` set to `dir`.
pub fn write_synthetic_dataset(dir: &Path, spec: &SyntheticSpec) -> Result<Dataset> {
    let (mut ds, frames) = render_dataset(spec);
    let videos = dir.join("videos");
    std::fs::create_dir_all(&videos).map_err(|e| crate::Error::io(&videos, e))?;
    for (v, f) in ds.videos.iter().zip(&frames) {
        write_svf(&dir.join(&v.frame_source), f)?;
    }
    save_dataset(&ds, dir)?;
    ds.root = dir.to_path_buf();
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashSet};

    use super::*;
    use crate::text::tokenize_caption;

    #[test]
    fn captions_distinct_and_words_repeat() {
        let (ds, _) = render_dataset(&SyntheticSpec::default());
        let caps: Vec<String> = ds.videos.iter().flat_map(|v| v.subjects.iter().map(|s| s.captions[0].clone())).collect();
        assert_eq!(caps.len(), 16);
        assert_eq!(caps.iter().collect::<HashSet<_>>().len(), 16);
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        for c in &caps {
            for w in tokenize_caption(c) {
                *freq.entry(w).or_default() += 1;
            }
        }
        assert!(freq.values().all(|&n| n >= 2), "{freq:?}");
        ds.validate().unwrap();
    }

    #[test]
    fn objects_of_a_video_differ() {
        for v in 0..8 {
            let (a, b) = (object_spec(v, 0), object_spec(v, 1));
            assert_ne!(a.color, b.color);
            assert_ne!(a.shape, b.shape);
        }
    }

    #[test]
    fn boxes_cover_their_object() {
        let spec = SyntheticSpec::default();
        let (rec, frames) = render_video(&spec, 3);
        for s in &rec.subjects {
            let crop = crate::data::crop_subject(&frames, &s.regions[0]);
            let color = COLORS[object_spec(3, s.subject_id[1..].parse().unwrap()).color].1;
            let center = crop.view().pixel(crop.width / 2, crop.height / 2);
            assert_eq!(center, color);
        }
    }
}
