//! Reverse-mode automatic differentiation over [`Mat`] values.

use super::tensor::{gemm, Mat};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    Gelu(Var),
    Softmax(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather(Var, Vec<usize>),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Mat,
    },
}

struct Node {
    value: Mat,
    op: Op,
}

/// Records a computation for one backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, index: usize, value: &Mat) -> Var {
        self.push(value.clone(), Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Mat::zeros(av.rows, bv.cols);
        gemm(1.0, av, false, bv, false, 0.0, &mut out);
        self.push(out, Op::MatMul(a, b))
    }

    /// `a * b^T`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Mat::zeros(av.rows, bv.rows);
        gemm(1.0, av, false, bv, true, 0.0, &mut out);
        self.push(out, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let mut out = self.value(a).clone();
        let r = self.value(row);
        assert_eq!((r.rows, r.cols), (1, out.cols), "add_row shape");
        for i in 0..out.rows {
            for (o, b) in out.row_mut(i).iter_mut().zip(&r.data) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        self.push(out, Op::Scale(a, s))
    }

    /// Row-wise layer normalization with learned gain and bias (`1 x cols`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let n = xv.cols as f64;
        let mut xhat = Mat::zeros(xv.rows, xv.cols);
        let mut out = Mat::zeros(xv.rows, xv.cols);
        let mut inv_std = Vec::with_capacity(xv.rows);
        for i in 0..xv.rows {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for c in 0..xv.cols {
                let h = (row[c] - mean) * is;
                *xhat.at_mut(i, c) = h;
                *out.at_mut(i, c) = h * g.data[c] + b.data[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for v in &mut out.data {
            let u = *v;
            *v = 0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh());
        }
        self.push(out, Op::Gelu(x))
    }

    /// Row-wise softmax. Entries equal to `-inf` receive probability zero.
    pub fn softmax(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for i in 0..out.rows {
            softmax_in_place(out.row_mut(i));
        }
        self.push(out, Op::Softmax(x))
    }

    /// Sets entries above the diagonal to `-inf`. Not differentiable through
    /// the masked entries; only valid directly before [`Tape::softmax`].
    pub fn causal_softmax(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for i in 0..out.rows {
            let row = out.row_mut(i);
            for v in row.iter_mut().skip(i + 1) {
                *v = f64::NEG_INFINITY;
            }
            softmax_in_place(row);
        }
        self.push(out, Op::Softmax(x))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xv = self.value(x);
        assert!(start + len <= xv.cols, "slice_cols out of range");
        let out = Mat::from_fn(xv.rows, len, |r, c| xv.at(r, start + c));
        self.push(out, Op::SliceCols(x, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let pv = self.value(*p);
            assert_eq!(pv.rows, rows, "concat_cols row mismatch");
            for r in 0..rows {
                out.row_mut(r)[off..off + pv.cols].copy_from_slice(pv.row(r));
            }
            off += pv.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let pv = self.value(*p);
            assert_eq!(pv.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&pv.data);
            rows += pv.rows;
        }
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    /// Rows `ids` of `table`, in order.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * t.cols);
        for &i in ids {
            data.extend_from_slice(t.row(i));
        }
        let out = Mat::from_vec(ids.len(), t.cols, data);
        self.push(out, Op::Gather(table, ids.to_vec()))
    }

    /// Summed negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, as a `1 x 1` value.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.rows, targets.len(), "cross_entropy target count");
        let mut probs = lv.clone();
        let mut loss = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = probs.row_mut(i);
            softmax_in_place(row);
            loss -= row[t].max(f64::MIN_POSITIVE).ln();
        }
        self.push(
            Mat::from_vec(1, 1, vec![loss]),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Back-propagates from the scalar `root` (seed gradient 1) and returns
    /// accumulated gradients for parameter indices `0..num_params`.
    pub fn backward(&self, root: Var, num_params: usize) -> Vec<Option<Mat>> {
        let mut grads: Vec<Option<Mat>> = Vec::with_capacity(root.0 + 1);
        grads.resize_with(root.0 + 1, || None);
        let rv = self.value(root);
        grads[root.0] = Some(Mat::from_vec(rv.rows, rv.cols, vec![1.0; rv.len()]));
        let mut param_grads: Vec<Option<Mat>> = Vec::with_capacity(num_params);
        param_grads.resize_with(num_params, || None);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => accumulate(&mut param_grads[*p], g),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(av.rows, av.cols);
                    gemm(1.0, &g, false, bv, true, 0.0, &mut ga);
                    let mut gb = Mat::zeros(bv.rows, bv.cols);
                    gemm(1.0, av, true, &g, false, 0.0, &mut gb);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::MatMulT(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(av.rows, av.cols);
                    gemm(1.0, &g, false, bv, false, 0.0, &mut ga);
                    let mut gb = Mat::zeros(bv.rows, bv.cols);
                    gemm(1.0, &g, true, av, false, 0.0, &mut gb);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[b.0], g.clone());
                    accumulate(&mut grads[a.0], g);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, v) in gr.data.iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads[row.0], gr);
                    accumulate(&mut grads[a.0], g);
                }
                Op::Scale(a, s) => {
                    let mut g = g;
                    g.data.iter_mut().for_each(|v| *v *= s);
                    accumulate(&mut grads[a.0], g);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gain);
                    let n = g.cols as f64;
                    let mut gx = Mat::zeros(g.rows, g.cols);
                    let mut gg = Mat::zeros(1, g.cols);
                    let mut gb = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        let (go, h) = (g.row(r), xhat.row(r));
                        let mut sum_d = 0.0;
                        let mut sum_dh = 0.0;
                        for c in 0..g.cols {
                            gg.data[c] += go[c] * h[c];
                            gb.data[c] += go[c];
                            let d = go[c] * gv.data[c];
                            sum_d += d;
                            sum_dh += d * h[c];
                        }
                        let out = gx.row_mut(r);
                        for c in 0..g.cols {
                            let d = go[c] * gv.data[c];
                            out[c] = inv_std[r] * (d - sum_d / n - h[c] * sum_dh / n);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                    accumulate(&mut grads[gain.0], gg);
                    accumulate(&mut grads[bias.0], gb);
                }
                Op::Gelu(x) => {
                    let xv = self.value(*x);
                    let mut gx = g;
                    for (gv, &u) in gx.data.iter_mut().zip(&xv.data) {
                        let inner = GELU_C * (u + 0.044715 * u * u * u);
                        let t = inner.tanh();
                        let dinner = GELU_C * (1.0 + 3.0 * 0.044715 * u * u);
                        *gv *= 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * dinner;
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let mut gx = Mat::zeros(g.rows, g.cols);
                    for r in 0..g.rows {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (o, (yv, gv)) in gx.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = yv * (gv - dot);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::SliceCols(x, start) => {
                    let xv = self.value(*x);
                    let mut gx = Mat::zeros(xv.rows, xv.cols);
                    for r in 0..g.rows {
                        gx.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let cols = self.value(*p).cols;
                        let gp = Mat::from_fn(g.rows, cols, |r, c| g.at(r, off + c));
                        off += cols;
                        accumulate(&mut grads[p.0], gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let rows = self.value(*p).rows;
                        let gp = Mat::from_vec(
                            rows,
                            g.cols,
                            g.data[off * g.cols..(off + rows) * g.cols].to_vec(),
                        );
                        off += rows;
                        accumulate(&mut grads[p.0], gp);
                    }
                }
                Op::Gather(table, ids) => {
                    let tv = self.value(*table);
                    let mut gt = Mat::zeros(tv.rows, tv.cols);
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, v) in gt.row_mut(id).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads[table.0], gt);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let s = g.data[0];
                    let mut gl = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        *gl.at_mut(r, t) -= 1.0;
                    }
                    gl.data.iter_mut().for_each(|v| *v *= s);
                    accumulate(&mut grads[logits.0], gl);
                }
            }
        }
        param_grads
    }
}

fn accumulate(slot: &mut Option<Mat>, g: Mat) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric(f: &dyn Fn(&Mat) -> f64, x: &Mat) -> Mat {
        let h = 1e-6;
        let mut g = Mat::zeros(x.rows, x.cols);
        for i in 0..x.len() {
            let mut p = x.clone();
            p.data[i] += h;
            let mut m = x.clone();
            m.data[i] -= h;
            g.data[i] = (f(&p) - f(&m)) / (2.0 * h);
        }
        g
    }

    fn fixture(rows: usize, cols: usize, k: f64) -> Mat {
        Mat::from_fn(rows, cols, |r, c| ((r * cols + c) as f64 * k).sin())
    }

    /// Builds a graph exercising every op and returns (loss var, param count).
    fn graph(t: &mut Tape, x: &Mat, w: &Mat) -> Var {
        let xv = t.param(0, x);
        let wv = t.param(1, w);
        let g = t.input(Mat::from_vec(1, 4, vec![1.0, 0.5, -0.3, 2.0]));
        let b = t.input(Mat::from_vec(1, 4, vec![0.1, 0.0, 0.2, -0.1]));
        let h = t.matmul(xv, wv);
        let h = t.add_row(h, b);
        let h = t.layer_norm(h, g, b);
        let h = t.gelu(h);
        let s = t.matmul_t(h, xv);
        let s = t.scale(s, 0.7);
        let a = t.causal_softmax(s);
        let ctx = t.matmul(a, xv);
        let l = t.slice_cols(ctx, 1, 2);
        let r = t.slice_cols(h, 0, 2);
        let cat = t.concat_cols(&[l, r]);
        let cat2 = t.concat_rows(&[cat, h]);
        let sum = t.add(cat2, cat2);
        let p = t.softmax(sum);
        let e = t.gather(p, &[0, 2, 2, 5]);
        t.cross_entropy(e, &[1, 0, 3, 2])
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let x = fixture(3, 4, 0.37);
        let w = fixture(4, 4, 0.61);
        let mut t = Tape::new();
        let loss = graph(&mut t, &x, &w);
        let grads = t.backward(loss, 2);
        let fx = |m: &Mat| {
            let mut t = Tape::new();
            let l = graph(&mut t, m, &w);
            t.value(l).data[0]
        };
        let fw = |m: &Mat| {
            let mut t = Tape::new();
            let l = graph(&mut t, &x, m);
            t.value(l).data[0]
        };
        let gx = grads[0].as_ref().unwrap();
        let gw = grads[1].as_ref().unwrap();
        assert!(gx.max_abs_diff(&numeric(&fx, &x)) < 1e-7);
        assert!(gw.max_abs_diff(&numeric(&fw, &w)) < 1e-7);
    }

    #[test]
    fn unused_gather_rows_get_exact_zero() {
        let table = fixture(5, 3, 0.2);
        let mut t = Tape::new();
        let tv = t.param(0, &table);
        let e = t.gather(tv, &[1, 3]);
        let l = t.cross_entropy(e, &[0, 2]);
        let g = t.backward(l, 1).remove(0).unwrap();
        for r in [0, 2, 4] {
            assert!(g.row(r).iter().all(|v| *v == 0.0));
        }
    }
}
