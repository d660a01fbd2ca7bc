use crate::data::ImageView;
use crate::sampler::grid_span;

use super::tensor::Mat;

/// Height × width × 3 image with real-valued channels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl ImageF {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width * 3, "ImageF::new size");
        ImageF { height, width, data }
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        ImageF { height, width, data }
    }

    /// 8-bit image scaled to `[0,1]`.
    pub fn from_u8(view: ImageView<'_>) -> Self {
        ImageF {
            height: view.height,
            width: view.width,
            data: view.data.iter().map(|&v| f64::from(v) / 255.0).collect(),
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * 3 + c]
    }
}

fn source_coord(dst: usize, in_len: usize, out_len: usize) -> (usize, usize, f64) {
    let scale = in_len as f64 / out_len as f64;
    let src = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
    let i0 = (src.floor() as usize).min(in_len - 1);
    let i1 = (i0 + 1).min(in_len - 1);
    (i0, i1, src - i0 as f64)
}

/// Bilinear resampling with half-pixel centres (`align_corners = false`);
/// source coordinates below zero clamp to the first pixel.
pub fn resize_bilinear(image: &ImageF, out_h: usize, out_w: usize) -> ImageF {
    assert!(image.height > 0 && image.width > 0, "resize of an empty image");
    if (out_h, out_w) == (image.height, image.width) {
        return image.clone();
    }
    let xs: Vec<_> = (0..out_w).map(|x| source_coord(x, image.width, out_w)).collect();
    let mut data = Vec::with_capacity(out_h * out_w * 3);
    for y in 0..out_h {
        let (y0, y1, wy) = source_coord(y, image.height, out_h);
        for &(x0, x1, wx) in &xs {
            for c in 0..3 {
                let top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
                let bottom = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
                data.push(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    ImageF::new(out_h, out_w, data)
}

/// Non-overlapping `p × p` patches, one row each in row-major patch order,
/// flattened in (row, column, channel) order.
pub fn patchify(image: &ImageF, p: usize) -> Mat {
    assert!(
        image.height % p == 0 && image.width % p == 0,
        "image {}x{} not divisible by patch size {p}",
        image.height,
        image.width
    );
    let (ny, nx) = (image.height / p, image.width / p);
    let mut out = Mat::zeros(ny * nx, p * p * 3);
    for py in 0..ny {
        for px in 0..nx {
            let row = out.row_mut(py * nx + px);
            let mut k = 0;
            for y in 0..p {
                for x in 0..p {
                    for c in 0..3 {
                        row[k] = image.at(py * p + y, px * p + x, c);
                        k += 1;
                    }
                }
            }
        }
    }
    out
}

/// Per-channel means over a `grid × grid` partition, ordered row, column,
/// channel.
pub fn pool_grid(image: &ImageF, grid: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid * grid * 3);
    for gy in 0..grid {
        let ys = grid_span(gy, image.height, grid);
        for gx in 0..grid {
            let xs = grid_span(gx, image.width, grid);
            let mut sum = [0.0; 3];
            for y in ys.clone() {
                for x in xs.clone() {
                    for (c, s) in sum.iter_mut().enumerate() {
                        *s += image.at(y, x, c);
                    }
                }
            }
            let n = (ys.len() * xs.len()) as f64;
            out.extend(sum.iter().map(|s| s / n));
        }
    }
    out
}
