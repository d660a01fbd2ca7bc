use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::{SubjectRegion, VideoRecord};
use crate::error::{Error, Result};

const SVF_MAGIC: &[u8; 4] = b"SVF1";
const CHANNELS: usize = 3;

/// Owned 8-bit RGB image, row-major, channel-last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Borrowed view of an 8-bit RGB image.
#[derive(Debug, Clone, Copy)]
pub struct ImageView<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [u8],
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            data: vec![0; width * height * CHANNELS],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Self {
        let mut img = Image::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.put(x, y, f(x, y));
            }
        }
        img
    }

    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = (y * self.width + x) * CHANNELS;
        self.data[o..o + CHANNELS].copy_from_slice(&rgb);
    }

    pub fn view(&self) -> ImageView<'_> {
        ImageView {
            width: self.width,
            height: self.height,
            data: &self.data,
        }
    }
}

impl<'a> ImageView<'a> {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * CHANNELS;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn to_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.to_vec(),
        }
    }
}

/// A video's frames as one contiguous M×H×W×3 buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frames {
    pub num_frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl Frames {
    pub fn from_images(images: &[Image]) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::Format("no frames".into()))?;
        let (width, height) = (first.width, first.height);
        let mut data = Vec::with_capacity(images.len() * width * height * CHANNELS);
        for (i, img) in images.iter().enumerate() {
            if img.width != width || img.height != height {
                return Err(Error::Format(format!(
                    "frame {i} is {}x{}, expected {width}x{height}",
                    img.width, img.height
                )));
            }
            data.extend_from_slice(&img.data);
        }
        Ok(Frames {
            num_frames: images.len(),
            height,
            width,
            data,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * CHANNELS
    }

    pub fn frame(&self, index: usize) -> ImageView<'_> {
        let n = self.frame_len();
        ImageView {
            width: self.width,
            height: self.height,
            data: &self.data[index * n..(index + 1) * n],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ImageView<'_>> {
        (0..self.num_frames).map(move |i| self.frame(i))
    }
}

/// Exact pixel copy of a subject's bounding box from its annotated frame.
///
/// Panics if the region does not fit the frames; callers validate regions
/// against the owning [`VideoRecord`] first.
pub fn crop_subject(frames: &Frames, region: &SubjectRegion) -> Image {
    let b = region.bbox;
    let (x0, y0, w, h) = (b.x as usize, b.y as usize, b.w as usize, b.h as usize);
    assert!(
        (region.frame_index as usize) < frames.num_frames
            && x0 + w <= frames.width
            && y0 + h <= frames.height
            && w > 0
            && h > 0,
        "region {region:?} outside {}x{}x{} frames",
        frames.num_frames,
        frames.height,
        frames.width
    );
    let src = frames.frame(region.frame_index as usize);
    let mut data = Vec::with_capacity(w * h * CHANNELS);
    for y in y0..y0 + h {
        let row = (y * src.width + x0) * CHANNELS;
        data.extend_from_slice(&src.data[row..row + w * CHANNELS]);
    }
    Image {
        width: w,
        height: h,
        data,
    }
}

/// Loads all frames of a video from its frame source under `root`: either a
/// `.svf` container or a directory of `frame_NNNNNN.ppm` files.
pub fn load_frames(video: &VideoRecord, root: &Path) -> Result<Frames> {
    let path = root.join(&video.frame_source);
    let frames = if path.is_dir() {
        read_ppm_dir(&path, video.num_frames as usize)?
    } else {
        read_svf(&path)?
    };
    let expect = (
        video.num_frames as usize,
        video.height as usize,
        video.width as usize,
    );
    let got = (frames.num_frames, frames.height, frames.width);
    if got != expect {
        return Err(Error::Format(format!(
            "{}: frames are {got:?} (M,H,W), annotation declares {expect:?}",
            path.display()
        )));
    }
    Ok(frames)
}

fn ppm_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

fn read_ppm_dir(dir: &Path, num_frames: usize) -> Result<Frames> {
    let paths: Vec<PathBuf> = (0..num_frames).map(|i| dir.join(ppm_name(i))).collect();
    let missing: Vec<usize> = paths
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_file())
        .map(|(i, _)| i)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingFrames {
            path: dir.to_path_buf(),
            missing,
        });
    }
    let images = paths
        .iter()
        .map(|p| read_ppm(p))
        .collect::<Result<Vec<_>>>()?;
    Frames::from_images(&images)
}

/// Reads a binary (P6) PPM with maxval 255.
pub fn read_ppm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ppm(&bytes).map_err(|m| Error::Format(format!("{}: {m}", path.display())))
}

fn parse_ppm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P6" {
        return Err(format!("bad magic {:?}, expected P6", fields[0]));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| format!("bad {what} {s:?} in header"))
    };
    let width = num(&fields[1], "width")?;
    let height = num(&fields[2], "height")?;
    let maxval = num(&fields[3], "maxval")?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    if width == 0 || height == 0 {
        return Err("zero-sized image".into());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height * CHANNELS;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() != need {
        return Err(format!(
            "payload is {} bytes, header implies {need}",
            payload.len()
        ));
    }
    Ok(Image {
        width,
        height,
        data: payload.to_vec(),
    })
}

pub fn write_ppm(path: &Path, image: &Image) -> Result<()> {
    let mut out = Vec::with_capacity(image.data.len() + 20);
    write!(out, "P6\n{} {}\n255\n", image.width, image.height).expect("vec write");
    out.extend_from_slice(&image.data);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes frames as `frame_000000.ppm`, `frame_000001.ppm`, ... under `dir`.
pub fn write_ppm_dir(dir: &Path, frames: &Frames) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        write_ppm(&dir.join(ppm_name(i)), &f.to_image())?;
    }
    Ok(())
}

pub fn read_svf(path: &Path) -> Result<Frames> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_svf(&bytes).map_err(|m| Error::Format(format!("{}: {m}", path.display())))
}

fn parse_svf(bytes: &[u8]) -> std::result::Result<Frames, String> {
    if bytes.len() < 20 {
        return Err("truncated header".into());
    }
    if &bytes[..4] != SVF_MAGIC {
        return Err("bad magic, expected SVF1".into());
    }
    let dims: Vec<usize> = bytes[4..20]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let (m, h, w, c) = (dims[0], dims[1], dims[2], dims[3]);
    if c != CHANNELS {
        return Err(format!("unsupported channel count {c}"));
    }
    if m == 0 || h == 0 || w == 0 {
        return Err(format!("degenerate shape {m}x{h}x{w}x{c}"));
    }
    let need = m
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(c))
        .ok_or("shape overflows")?;
    let payload = &bytes[20..];
    if payload.len() < need {
        return Err(format!(
            "truncated payload: {} bytes, header implies {need}",
            payload.len()
        ));
    }
    if payload.len() > need {
        return Err(format!(
            "{} trailing bytes after payload",
            payload.len() - need
        ));
    }
    Ok(Frames {
        num_frames: m,
        height: h,
        width: w,
        data: payload.to_vec(),
    })
}

pub fn write_svf(path: &Path, frames: &Frames) -> Result<()> {
    let mut out = Vec::with_capacity(frames.data.len() + 20);
    out.extend_from_slice(SVF_MAGIC);
    for d in [frames.num_frames, frames.height, frames.width, CHANNELS] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&frames.data);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
