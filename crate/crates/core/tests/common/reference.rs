//! Straight-line reference computations for the model, written with plain
//! loops over nested vectors and sharing no code with the library.

use sovc_core::model::{CaptionModel, ImageF, Mat};

pub type M = Vec<Vec<f64>>;

pub fn to_m(m: &Mat) -> M {
    (0..m.rows).map(|r| m.row(r).to_vec()).collect()
}

fn p(model: &CaptionModel, name: &str) -> M {
    to_m(model.params.get(name))
}

fn mm(a: &M, b: &M) -> M {
    let mut out = vec![vec![0.0; b[0].len()]; a.len()];
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            let mut s = 0.0;
            for k in 0..b.len() {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn affine(x: &M, model: &CaptionModel, name: &str) -> M {
    let w = p(model, &format!("{name}.w"));
    let b = p(model, &format!("{name}.b"));
    let mut y = mm(x, &w);
    for row in &mut y {
        for (v, bb) in row.iter_mut().zip(&b[0]) {
            *v += bb;
        }
    }
    y
}

fn layer_norm(x: &M, model: &CaptionModel, name: &str) -> M {
    let g = &p(model, &format!("{name}.g"))[0];
    let b = &p(model, &format!("{name}.b"))[0];
    x.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            row.iter()
                .enumerate()
                .map(|(c, v)| (v - mean) / (var + 1e-5).sqrt() * g[c] + b[c])
                .collect()
        })
        .collect()
}

fn gelu(v: f64) -> f64 {
    0.5 * v * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (v + 0.044715 * v.powi(3))).tanh())
}

fn self_attention(x: &M, model: &CaptionModel, name: &str, heads: usize) -> M {
    let q = affine(x, model, &format!("{name}.q"));
    let k = affine(x, model, &format!("{name}.k"));
    let v = affine(x, model, &format!("{name}.v"));
    let d = q[0].len();
    let dh = d / heads;
    let mut ctx = vec![vec![0.0; d]; x.len()];
    for h in 0..heads {
        for i in 0..x.len() {
            let scores: Vec<f64> = (0..x.len())
                .map(|j| (0..dh).map(|c| q[i][h * dh + c] * k[j][h * dh + c]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let max = scores.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = e.iter().sum();
            for j in 0..x.len() {
                for c in 0..dh {
                    ctx[i][h * dh + c] += e[j] / z * v[j][h * dh + c];
                }
            }
        }
    }
    affine(&ctx, model, &format!("{name}.o"))
}

fn add(a: &M, b: &M) -> M {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect()).collect()
}

/// Pre-norm encoder over `x`.
pub fn encode(model: &CaptionModel, x: &M) -> M {
    let cfg = &model.config;
    let mut h = x.clone();
    for l in 0..cfg.encoder_layers {
        let n = layer_norm(&h, model, &format!("enc.{l}.ln1"));
        h = add(&h, &self_attention(&n, model, &format!("enc.{l}.attn"), cfg.heads));
        let n = layer_norm(&h, model, &format!("enc.{l}.ln2"));
        let mut f = affine(&n, model, &format!("enc.{l}.ffn.fc1"));
        for row in &mut f {
            for v in row.iter_mut() {
                *v = gelu(*v);
            }
        }
        h = add(&h, &affine(&f, model, &format!("enc.{l}.ffn.fc2")));
    }
    if cfg.encoder_layers > 0 {
        h = layer_norm(&h, model, "enc.ln");
    }
    h
}

/// Bilinear resize with half-pixel centres, written as separable weight
/// matrices.
pub fn resize(img: &ImageF, oh: usize, ow: usize) -> ImageF {
    let weights = |inn: usize, out: usize| -> M {
        let mut w = vec![vec![0.0; inn]; out];
        for (o, row) in w.iter_mut().enumerate() {
            let mut s = (o as f64 + 0.5) * inn as f64 / out as f64 - 0.5;
            if s < 0.0 {
                s = 0.0;
            }
            let lo = (s.floor() as usize).min(inn - 1);
            let hi = if lo + 1 < inn { lo + 1 } else { inn - 1 };
            let f = s - lo as f64;
            row[lo] += 1.0 - f;
            row[hi] += f;
        }
        w
    };
    let wy = weights(img.height, oh);
    let wx = weights(img.width, ow);
    let mut data = vec![0.0; oh * ow * 3];
    for y in 0..oh {
        for x in 0..ow {
            for c in 0..3 {
                let mut s = 0.0;
                for sy in 0..img.height {
                    for sx in 0..img.width {
                        s += wy[y][sy] * wx[x][sx] * img.data[(sy * img.width + sx) * 3 + c];
                    }
                }
                data[(y * ow + x) * 3 + c] = s;
            }
        }
    }
    ImageF::new(oh, ow, data)
}

/// Patch vectors of an image, patches in row-major order.
pub fn patches(img: &ImageF, ps: usize) -> M {
    let mut out = Vec::new();
    for py in 0..img.height / ps {
        for px in 0..img.width / ps {
            let mut v = Vec::new();
            for y in 0..ps {
                for x in 0..ps {
                    let base = ((py * ps + y) * img.width + px * ps + x) * 3;
                    v.extend_from_slice(&img.data[base..base + 3]);
                }
            }
            out.push(v);
        }
    }
    out
}

pub fn hard_prompt(model: &CaptionModel, crop: &ImageF) -> M {
    let side = model.config.subject_grid * model.config.patch_size;
    affine(&patches(&resize(crop, side, side), model.config.patch_size), model, "patch")
}

/// Resize to `R × R`, 4×4 cell means per channel, affine map.
pub fn subject_token(model: &CaptionModel, crop: &ImageF) -> Vec<f64> {
    let r = model.config.frame_side;
    let img = resize(crop, r, r);
    let mut pooled = Vec::new();
    for gy in 0..4 {
        for gx in 0..4 {
            let (y0, y1) = (gy * r / 4, (gy + 1) * r / 4);
            let (x0, x1) = (gx * r / 4, (gx + 1) * r / 4);
            for c in 0..3 {
                let mut s = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        s += img.data[(y * r + x) * 3 + c];
                    }
                }
                pooled.push(s / ((y1 - y0) * (x1 - x0)) as f64);
            }
        }
    }
    affine(&vec![pooled], model, "subject").remove(0)
}
