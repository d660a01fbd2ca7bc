use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;
pub const ANNOTATIONS_FILE: &str = "annotations.json";

/// Axis-aligned box in integer pixels. The origin is the top-left corner of the
/// frame; `w`/`h` are extents, so the box covers columns `x..x+w` and rows
/// `y..y+h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        BBox { x, y, w, h }
    }

    /// Checks the box is non-empty and lies inside a `width`×`height` frame.
    pub fn check_within(&self, width: u32, height: u32) -> std::result::Result<(), String> {
        if self.w == 0 || self.h == 0 {
            return Err(format!("bbox {self} has zero extent"));
        }
        if u64::from(self.x) + u64::from(self.w) > u64::from(width)
            || u64::from(self.y) + u64::from(self.h) > u64::from(height)
        {
            return Err(format!("bbox {self} exceeds frame {width}x{height}"));
        }
        Ok(())
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }
}

impl From<[u32; 4]> for BBox {
    fn from([x, y, w, h]: [u32; 4]) -> Self {
        BBox { x, y, w, h }
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{},{}]", self.x, self.y, self.w, self.h)
    }
}

impl FromStr for BBox {
    type Err = Error;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::parse("bbox", format!("expected x,y,w,h, got {s:?}")));
        }
        let mut v = [0u32; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|e| Error::parse("bbox", format!("{p:?}: {e}")))?;
        }
        Ok(BBox::from(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubjectRegion {
    pub frame_index: u32,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSample {
    pub subject_id: String,
    pub subject_word: String,
    pub regions: Vec<SubjectRegion>,
    pub captions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub frame_source: String,
    pub num_frames: u32,
    pub width: u32,
    pub height: u32,
    pub subjects: Vec<SubjectSample>,
}

impl VideoRecord {
    pub fn subject(&self, subject_id: &str) -> Option<&SubjectSample> {
        self.subjects.iter().find(|s| s.subject_id == subject_id)
    }

    /// Checks a region against this video's frame count and frame size.
    pub fn check_region(&self, region: &SubjectRegion) -> std::result::Result<(), String> {
        if region.frame_index >= self.num_frames {
            return Err(format!(
                "frame_index {} out of range (num_frames {})",
                region.frame_index, self.num_frames
            ));
        }
        region.bbox.check_within(self.width, self.height)
    }

    fn validate(&self, require_regions: bool) -> Result<()> {
        let here = format!("video_id={}", self.video_id);
        if self.video_id.is_empty() {
            return Err(Error::validation(here, "empty video_id"));
        }
        if self.num_frames == 0 {
            return Err(Error::validation(here, "num_frames must be >= 1"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation(here, "frame size must be non-zero"));
        }
        let mut seen = HashSet::new();
        for s in &self.subjects {
            let at = format!("video_id={}, subject_id={}", self.video_id, s.subject_id);
            if !seen.insert(s.subject_id.as_str()) {
                return Err(Error::validation(at, "duplicate subject_id"));
            }
            if s.subject_word.is_empty() {
                return Err(Error::validation(at, "empty subject_word"));
            }
            if s.subject_word != s.subject_word.to_lowercase() {
                return Err(Error::validation(at, "subject_word must be lowercase"));
            }
            if s.captions.is_empty() {
                return Err(Error::validation(at, "subject has no captions"));
            }
            if require_regions && s.regions.is_empty() {
                return Err(Error::validation(at, "subject has no regions"));
            }
            for r in &s.regions {
                self.check_region(r)
                    .map_err(|m| Error::validation(at.clone(), m))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub videos: Vec<VideoRecord>,
    /// Directory that `frame_source` paths are resolved against.
    pub root: PathBuf,
}

impl Dataset {
    pub fn new(split: Split, videos: Vec<VideoRecord>) -> Self {
        Dataset {
            split,
            videos,
            root: PathBuf::new(),
        }
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoRecord> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn frame_path(&self, video: &VideoRecord) -> PathBuf {
        self.root.join(&video.frame_source)
    }

    /// Checks every invariant of the dataset format.
    pub fn validate(&self) -> Result<()> {
        self.validate_inner(true)
    }

    fn validate_inner(&self, require_regions: bool) -> Result<()> {
        let mut ids = HashSet::new();
        for v in &self.videos {
            if !ids.insert(v.video_id.as_str()) {
                return Err(Error::validation(
                    format!("video_id={}", v.video_id),
                    format!("duplicate video_id in split {}", self.split),
                ));
            }
            v.validate(require_regions)?;
        }
        Ok(())
    }

    /// Canonical JSON text: sorted keys, two-space indent, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let doc = serde_json::json!({
            "format_version": FORMAT_VERSION,
            "split": self.split,
            "videos": self.videos,
        });
        // serde_json's default map is ordered by key.
        let mut text = serde_json::to_string_pretty(&doc).expect("dataset serializes");
        text.push('\n');
        text
    }

    /// Parses annotation JSON text. `require_regions = false` admits subjects
    /// that have not been localized yet (input to the annotation pipeline).
    pub fn from_json_str(text: &str, require_regions: bool) -> Result<Self> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| Error::parse(ANNOTATIONS_FILE, e))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::parse(ANNOTATIONS_FILE, "top level is not an object"))?;
        match obj.get("format_version").and_then(Value::as_u64) {
            Some(FORMAT_VERSION) => {}
            other => {
                return Err(Error::parse(
                    ANNOTATIONS_FILE,
                    format!("unsupported format_version {other:?}"),
                ))
            }
        }
        let split: Split = serde_json::from_value(obj.get("split").cloned().unwrap_or(Value::Null))
            .map_err(|e| Error::parse(format!("{ANNOTATIONS_FILE}: split"), e))?;
        let raw_videos = obj
            .get("videos")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse(ANNOTATIONS_FILE, "missing videos array"))?;
        let mut videos = Vec::with_capacity(raw_videos.len());
        for (i, raw) in raw_videos.iter().enumerate() {
            let id = raw
                .get("video_id")
                .and_then(Value::as_str)
                .unwrap_or("<unknown>");
            let v: VideoRecord = serde_json::from_value(raw.clone()).map_err(|e| {
                Error::parse(format!("{ANNOTATIONS_FILE}: videos[{i}] (video_id={id})"), e)
            })?;
            videos.push(v);
        }
        let ds = Dataset::new(split, videos);
        ds.validate_inner(require_regions)?;
        Ok(ds)
    }
}

fn annotations_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(ANNOTATIONS_FILE)
    } else {
        path.to_path_buf()
    }
}

fn load_with(path: &Path, require_regions: bool) -> Result<Dataset> {
    let file = annotations_path(path);
    let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    let mut ds = Dataset::from_json_str(&text, require_regions)?;
    ds.root = file.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(ds)
}

/// Loads and validates `annotations.json` from a dataset directory (or the
/// file itself). Frame bundles are checked for existence.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let ds = load_with(path, true)?;
    for v in &ds.videos {
        let src = ds.frame_path(v);
        if !src.exists() {
            return Err(Error::validation(
                format!("video_id={}", v.video_id),
                format!("frame source {} does not exist", src.display()),
            ));
        }
    }
    Ok(ds)
}

/// Like [`load_dataset`] but tolerates subjects without regions and does not
/// touch frame bundles.
pub fn load_dataset_unvalidated(path: &Path) -> Result<Dataset> {
    load_with(path, false)
}

/// Writes the canonical `annotations.json` into `dir`.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = dir.join(ANNOTATIONS_FILE);
    std::fs::write(&file, dataset.to_canonical_json()).map_err(|e| Error::io(&file, e))?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"format_version":1,"split":"train","videos":[{"video_id":"v0","frame_source":"v0.svf",
        "num_frames":2,"width":8,"height":6,"subjects":[{"subject_id":"s0","subject_word":"man",
        "regions":[{"frame_index":1,"bbox":[1,2,3,4]}],"captions":["a man is running"]}]}]}"#
    }

    #[test]
    fn parses_minimal_file() {
        let ds = Dataset::from_json_str(minimal(), true).unwrap();
        assert_eq!(ds.split, Split::Train);
        assert_eq!(ds.videos.len(), 1);
        let s = &ds.videos[0].subjects[0];
        assert_eq!(s.regions[0].bbox, BBox::new(1, 2, 3, 4));
        assert_eq!(s.captions.len(), 1);
    }

    #[test]
    fn bbox_exceeding_width_is_rejected() {
        let text = minimal().replace("[1,2,3,4]", "[6,2,3,4]");
        let err = Dataset::from_json_str(&text, true).unwrap_err();
        match err {
            Error::Validation { location, .. } => {
                assert!(location.contains("video_id=v0"));
                assert!(location.contains("subject_id=s0"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn frame_index_out_of_range_is_rejected() {
        let text = minimal().replace("\"frame_index\":1", "\"frame_index\":2");
        assert!(matches!(
            Dataset::from_json_str(&text, true),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn malformed_record_names_the_video() {
        let text = minimal().replace("\"num_frames\":2", "\"num_frames\":\"two\"");
        let err = Dataset::from_json_str(&text, true).unwrap_err();
        assert!(err.to_string().contains("video_id=v0"), "{err}");
    }

    #[test]
    fn duplicate_video_ids_are_rejected() {
        let mut ds = Dataset::from_json_str(minimal(), true).unwrap();
        ds.videos.push(ds.videos[0].clone());
        assert!(ds.validate().is_err());
    }

    #[test]
    fn unvalidated_mode_admits_empty_regions() {
        let text = minimal().replace(r#"[{"frame_index":1,"bbox":[1,2,3,4]}]"#, "[]");
        assert!(Dataset::from_json_str(&text, true).is_err());
        assert!(Dataset::from_json_str(&text, false).is_ok());
    }

    #[test]
    fn canonical_json_is_stable() {
        let ds = Dataset::from_json_str(minimal(), true).unwrap();
        let once = ds.to_canonical_json();
        let twice = Dataset::from_json_str(&once, true).unwrap().to_canonical_json();
        assert_eq!(once, twice);
        assert!(once.find("\"format_version\"").unwrap() < once.find("\"split\"").unwrap());
    }

    #[test]
    fn bbox_parses_from_cli_text() {
        assert_eq!("1, 2,3,4".parse::<BBox>().unwrap(), BBox::new(1, 2, 3, 4));
        assert!("1,2,3".parse::<BBox>().is_err());
        assert!("1,2,3,-4".parse::<BBox>().is_err());
    }
}
