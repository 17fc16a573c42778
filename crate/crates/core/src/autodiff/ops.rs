//! Op kernels: shape inference, forward evaluation and vector-Jacobian products.

use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

/// Denominator floor for cosine similarity.
pub const COSINE_EPS: f64 = 1e-12;
/// Lower clamp applied to the argument of `log`.
pub const LOG_EPS: f64 = 1e-12;

/// How the two operands of an elementwise binary op line up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Broadcast {
    Same,
    ScalarLeft,
    ScalarRight,
    /// Left is a row vector `[n]` repeated over the rows of a `[m, n]` right operand.
    RowLeft,
    RowRight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Sigmoid,
    Tanh,
    Relu,
    Exp,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Max,
    Mean,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Binary(Binary, Broadcast),
    Scale(f64),
    Unary(Unary),
    MatMul,
    Transpose,
    Concat { axis: usize },
    Reshape { shape: Vec<usize> },
    Slice { axis: usize, start: usize, len: usize },
    /// Row lookup `table[idx]`; rows indexed by `padding` never receive gradient.
    Gather { padding: Option<usize> },
    Softmax { axis: usize },
    /// Softmax of a vector restricted to positions where the mask is non-zero.
    MaskedSoftmax,
    Reduce { kind: Reduce, axis: usize },
    SumAll,
    /// `[C, H, W] * [F, C, kh, kw] + [F]`, valid padding, stride 1.
    Conv2d,
    /// Non-overlapping max pooling over the last two axes.
    MaxPool2d { rows: usize, cols: usize },
    /// Max pooling of the last two axes onto a fixed `rows x cols` grid.
    GridPool { rows: usize, cols: usize },
    CosineMatrix,
    /// Exact-match matrix of two id vectors; padding ids never match.
    IndicatorMatrix { padding: usize },
    NonPadMask { padding: usize },
    /// Per-row histogram of cosine similarities against non-padding rows.
    Histogram { bins: usize, log: bool, padding: usize },
}

impl Op {
    /// Ops whose output is treated as a constant with respect to their inputs.
    pub fn is_differentiable(&self) -> bool {
        !matches!(
            self,
            Op::IndicatorMatrix { .. } | Op::NonPadMask { .. } | Op::Histogram { .. }
        )
    }

    pub fn arity(&self) -> Option<usize> {
        Some(match self {
            Op::Binary(..) | Op::MatMul | Op::MaskedSoftmax | Op::CosineMatrix => 2,
            Op::Gather { .. } | Op::IndicatorMatrix { .. } => 2,
            Op::Conv2d | Op::Histogram { .. } => 3,
            Op::Concat { .. } => return None,
            _ => 1,
        })
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = numel(&shape[..axis]);
    let inner = numel(&shape[axis + 1..]);
    (outer, shape[axis], inner)
}

fn is_scalar(shape: &[usize]) -> bool {
    shape.len() <= 1 && numel(shape) == 1
}

pub fn broadcast_for(a: &[usize], b: &[usize]) -> Option<Broadcast> {
    if a == b {
        Some(Broadcast::Same)
    } else if is_scalar(b) {
        Some(Broadcast::ScalarRight)
    } else if is_scalar(a) {
        Some(Broadcast::ScalarLeft)
    } else if a.len() == 2 && b.len() == 1 && b[0] == a[1] {
        Some(Broadcast::RowRight)
    } else if b.len() == 2 && a.len() == 1 && a[0] == b[1] {
        Some(Broadcast::RowLeft)
    } else {
        None
    }
}

fn without_axis(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut out: Vec<usize> = shape.to_vec();
    out.remove(axis);
    if out.is_empty() {
        out.push(1);
    }
    out
}

/// Computes the output shape of `op`, or a message describing the mismatch.
pub fn infer_shape(op: &Op, shapes: &[&[usize]]) -> std::result::Result<Vec<usize>, (String, String)> {
    let fail = |expected: String, actual: String| Err((expected, actual));
    if let Some(n) = op.arity() {
        if shapes.len() != n {
            return fail(format!("{n} operands"), format!("{} operands", shapes.len()));
        }
    } else if shapes.is_empty() {
        return fail("at least one operand".into(), "none".into());
    }
    let rank = |s: &[usize], r: usize| -> std::result::Result<(), (String, String)> {
        if s.len() == r {
            Ok(())
        } else {
            Err((format!("rank-{r} operand"), format!("{s:?}")))
        }
    };
    match op {
        Op::Binary(_, bc) => {
            let (a, b) = (shapes[0], shapes[1]);
            match broadcast_for(a, b) {
                Some(found) if found == *bc => Ok(match bc {
                    Broadcast::Same | Broadcast::ScalarRight | Broadcast::RowRight => a.to_vec(),
                    Broadcast::ScalarLeft | Broadcast::RowLeft => b.to_vec(),
                }),
                _ => fail(
                    "equal shapes, a scalar, or a row vector matching a matrix".into(),
                    format!("{a:?} and {b:?}"),
                ),
            }
        }
        Op::Scale(_) | Op::Unary(_) => Ok(shapes[0].to_vec()),
        Op::MatMul => {
            let (a, b) = (shapes[0], shapes[1]);
            rank(a, 2)?;
            rank(b, 2)?;
            if a[1] != b[0] {
                return fail(format!("[{}, n]", a[1]), format!("{b:?}"));
            }
            Ok(vec![a[0], b[1]])
        }
        Op::Transpose => {
            rank(shapes[0], 2)?;
            Ok(vec![shapes[0][1], shapes[0][0]])
        }
        Op::Concat { axis } => {
            let first = shapes[0];
            if *axis >= first.len() {
                return fail(format!("rank > {axis}"), format!("{first:?}"));
            }
            let mut out = first.to_vec();
            out[*axis] = 0;
            for s in shapes {
                let compatible = s.len() == first.len()
                    && s.iter().zip(first).enumerate().all(|(i, (x, y))| i == *axis || x == y);
                if !compatible {
                    return fail(format!("shapes matching {first:?} off axis {axis}"), format!("{s:?}"));
                }
                out[*axis] += s[*axis];
            }
            Ok(out)
        }
        Op::Reshape { shape } => {
            if numel(shape) != numel(shapes[0]) || shape.contains(&0) {
                return fail(format!("{} elements", numel(shapes[0])), format!("{shape:?}"));
            }
            Ok(shape.clone())
        }
        Op::Slice { axis, start, len } => {
            let s = shapes[0];
            if *axis >= s.len() || *len == 0 || start + len > s[*axis] {
                return fail(
                    format!("axis {axis} covering [{start}, {})", start + len),
                    format!("{s:?}"),
                );
            }
            let mut out = s.to_vec();
            out[*axis] = *len;
            Ok(out)
        }
        Op::Gather { .. } => {
            rank(shapes[0], 2)?;
            rank(shapes[1], 1)?;
            Ok(vec![shapes[1][0], shapes[0][1]])
        }
        Op::Softmax { axis } | Op::Reduce { axis, .. } => {
            if *axis >= shapes[0].len() {
                return fail(format!("rank > {axis}"), format!("{:?}", shapes[0]));
            }
            if matches!(op, Op::Softmax { .. }) {
                Ok(shapes[0].to_vec())
            } else {
                Ok(without_axis(shapes[0], *axis))
            }
        }
        Op::MaskedSoftmax => {
            rank(shapes[0], 1)?;
            if shapes[0] != shapes[1] {
                return fail(format!("mask {:?}", shapes[0]), format!("{:?}", shapes[1]));
            }
            Ok(shapes[0].to_vec())
        }
        Op::SumAll => Ok(vec![1]),
        Op::Conv2d => {
            let (x, k, b) = (shapes[0], shapes[1], shapes[2]);
            rank(x, 3)?;
            rank(k, 4)?;
            if k[1] != x[0] || b != [k[0]] || k[2] > x[1] || k[3] > x[2] {
                return fail(
                    format!("kernel [F, {}, <= {}, <= {}] and bias [F]", x[0], x[1], x[2]),
                    format!("kernel {k:?}, bias {b:?}"),
                );
            }
            Ok(vec![k[0], x[1] - k[2] + 1, x[2] - k[3] + 1])
        }
        Op::MaxPool2d { rows, cols } | Op::GridPool { rows, cols } => {
            let s = shapes[0];
            if s.len() < 2 {
                return fail("rank >= 2".into(), format!("{s:?}"));
            }
            let (n1, n2) = (s[s.len() - 2], s[s.len() - 1]);
            if *rows == 0 || *cols == 0 || *rows > n1 || *cols > n2 {
                return fail(format!("trailing dims >= [{rows}, {cols}]"), format!("{s:?}"));
            }
            let mut out = s.to_vec();
            let k = out.len();
            if matches!(op, Op::MaxPool2d { .. }) {
                out[k - 2] = n1 / rows;
                out[k - 1] = n2 / cols;
            } else {
                out[k - 2] = *rows;
                out[k - 1] = *cols;
            }
            Ok(out)
        }
        Op::CosineMatrix => {
            let (a, b) = (shapes[0], shapes[1]);
            rank(a, 2)?;
            rank(b, 2)?;
            if a[1] != b[1] {
                return fail(format!("[n, {}]", a[1]), format!("{b:?}"));
            }
            Ok(vec![a[0], b[0]])
        }
        Op::IndicatorMatrix { .. } => {
            rank(shapes[0], 1)?;
            rank(shapes[1], 1)?;
            Ok(vec![shapes[0][0], shapes[1][0]])
        }
        Op::NonPadMask { .. } => {
            rank(shapes[0], 1)?;
            Ok(shapes[0].to_vec())
        }
        Op::Histogram { bins, .. } => {
            let (a, b, ids) = (shapes[0], shapes[1], shapes[2]);
            rank(a, 2)?;
            rank(b, 2)?;
            if *bins < 2 {
                return fail("at least 2 bins".into(), format!("{bins}"));
            }
            if a[1] != b[1] || ids != [b[0]] {
                return fail(
                    format!("doc embeddings [n, {}] with ids [n]", a[1]),
                    format!("{b:?} with ids {ids:?}"),
                );
            }
            Ok(vec![a[0], *bins])
        }
    }
}

fn bcast_index(bc: Broadcast, k: usize, row: usize) -> (usize, usize) {
    match bc {
        Broadcast::Same => (k, k),
        Broadcast::ScalarLeft => (0, k),
        Broadcast::ScalarRight => (k, 0),
        Broadcast::RowLeft => (k % row, k),
        Broadcast::RowRight => (k, k % row),
    }
}

fn row_len(bc: Broadcast, a: &Tensor, b: &Tensor) -> usize {
    match bc {
        Broadcast::RowLeft => a.numel(),
        Broadcast::RowRight => b.numel(),
        _ => 1,
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps a wid-valued tensor entry to an index, checking it is a valid row.
pub fn as_index(value: f64, size: usize, what: &str) -> Result<usize> {
    if value.is_finite() && value >= 0.0 && value.fract() == 0.0 && (value as usize) < size {
        Ok(value as usize)
    } else {
        Err(Error::IndexOutOfRange {
            what: what.to_string(),
            index: if value.is_finite() && value >= 0.0 { value as usize } else { usize::MAX },
            size,
        })
    }
}

/// Half-open window boundaries `[floor(a*n/p), floor((a+1)*n/p))`.
pub fn grid_bounds(n: usize, p: usize) -> Vec<(usize, usize)> {
    (0..p).map(|a| (a * n / p, (a + 1) * n / p)).collect()
}

/// Half-open `(start, end)` windows along one axis.
type Windows = Vec<(usize, usize)>;

fn pool_bounds(op: &Op, n1: usize, n2: usize) -> (Windows, Windows) {
    match *op {
        Op::MaxPool2d { rows, cols } => (
            (0..n1 / rows).map(|a| (a * rows, a * rows + rows)).collect(),
            (0..n2 / cols).map(|b| (b * cols, b * cols + cols)).collect(),
        ),
        Op::GridPool { rows, cols } => (grid_bounds(n1, rows), grid_bounds(n2, cols)),
        _ => unreachable!("not a pooling op"),
    }
}

/// Flat argmax index (first occurrence, row-major) of every pooling window.
fn pool_argmax(op: &Op, x: &Tensor) -> Vec<usize> {
    let s = x.shape();
    let (n1, n2) = (s[s.len() - 2], s[s.len() - 1]);
    let planes = numel(&s[..s.len() - 2]);
    let (rb, cb) = pool_bounds(op, n1, n2);
    let data = x.data();
    let mut out = Vec::with_capacity(planes * rb.len() * cb.len());
    for p in 0..planes {
        let base = p * n1 * n2;
        for &(r0, r1) in &rb {
            for &(c0, c1) in &cb {
                let mut best = base + r0 * n2 + c0;
                for r in r0..r1 {
                    for c in c0..c1 {
                        let idx = base + r * n2 + c;
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                }
                out.push(best);
            }
        }
    }
    out
}

fn norms(x: &Tensor) -> Vec<f64> {
    let d = x.shape()[1];
    x.data().chunks(d).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity matrix of the rows of `a` and `b`.
pub fn cosine_matrix(a: &Tensor, b: &Tensor) -> Tensor {
    let d = a.shape()[1];
    let (na, nb) = (norms(a), norms(b));
    let mut out = Vec::with_capacity(na.len() * nb.len());
    for (i, ra) in a.data().chunks(d).enumerate() {
        for (j, rb) in b.data().chunks(d).enumerate() {
            out.push(dot(ra, rb) / (na[i] * nb[j]).max(COSINE_EPS));
        }
    }
    Tensor::from_parts(vec![na.len(), nb.len()], out)
}

/// Bin of a similarity in `[-1, 1]` split into `bins` equal-width buckets; the last bin is closed.
pub fn histogram_bin(similarity: f64, bins: usize) -> usize {
    let width = 2.0 / bins as f64;
    let raw = ((similarity + 1.0) / width).floor();
    if raw.is_nan() || raw < 0.0 {
        0
    } else {
        (raw as usize).min(bins - 1)
    }
}

pub fn forward(op: &Op, xs: &[&Tensor], out_shape: &[usize]) -> Result<Tensor> {
    let out = |data: Vec<f64>| Tensor::from_parts(out_shape.to_vec(), data);
    Ok(match op {
        Op::Binary(kind, bc) => {
            let (a, b) = (xs[0], xs[1]);
            let row = row_len(*bc, a, b);
            let (ad, bd) = (a.data(), b.data());
            let data = (0..numel(out_shape))
                .map(|k| {
                    let (i, j) = bcast_index(*bc, k, row);
                    match kind {
                        Binary::Add => ad[i] + bd[j],
                        Binary::Sub => ad[i] - bd[j],
                        Binary::Mul => ad[i] * bd[j],
                    }
                })
                .collect();
            out(data)
        }
        Op::Scale(c) => out(xs[0].data().iter().map(|v| c * v).collect()),
        Op::Unary(u) => out(xs[0]
            .data()
            .iter()
            .map(|&v| match u {
                Unary::Sigmoid => sigmoid(v),
                Unary::Tanh => v.tanh(),
                Unary::Relu => v.max(0.0),
                Unary::Exp => v.exp(),
                Unary::Log => v.max(LOG_EPS).ln(),
            })
            .collect()),
        Op::MatMul => {
            let (a, b) = (xs[0], xs[1]);
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let mut data = vec![0.0; m * n];
            let (ad, bd) = (a.data(), b.data());
            for i in 0..m {
                for p in 0..k {
                    let av = ad[i * k + p];
                    if av == 0.0 {
                        continue;
                    }
                    let brow = &bd[p * n..(p + 1) * n];
                    for (o, bv) in data[i * n..(i + 1) * n].iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
            out(data)
        }
        Op::Transpose => out(transpose(xs[0]).into_data()),
        Op::Concat { axis } => {
            let (outer, _, inner) = split_axis(out_shape, *axis);
            let mut data = Vec::with_capacity(numel(out_shape));
            for o in 0..outer {
                for x in xs {
                    let chunk = x.shape()[*axis] * inner;
                    data.extend_from_slice(&x.data()[o * chunk..(o + 1) * chunk]);
                }
            }
            out(data)
        }
        Op::Reshape { .. } => out(xs[0].data().to_vec()),
        Op::Slice { axis, start, len } => {
            let (outer, n, inner) = split_axis(xs[0].shape(), *axis);
            let mut data = Vec::with_capacity(numel(out_shape));
            for o in 0..outer {
                let base = o * n * inner;
                data.extend_from_slice(&xs[0].data()[base + start * inner..base + (start + len) * inner]);
            }
            out(data)
        }
        Op::Gather { padding } => {
            let (table, idx) = (xs[0], xs[1]);
            let (v, d) = (table.shape()[0], table.shape()[1]);
            let mut data = Vec::with_capacity(numel(out_shape));
            for &w in idx.data() {
                let w = as_index(w, v, "embedding table")?;
                if Some(w) == *padding {
                    data.extend(std::iter::repeat_n(0.0, d));
                } else {
                    data.extend_from_slice(&table.data()[w * d..(w + 1) * d]);
                }
            }
            out(data)
        }
        Op::Softmax { axis } => {
            let (outer, n, inner) = split_axis(xs[0].shape(), *axis);
            let x = xs[0].data();
            let mut data = vec![0.0; x.len()];
            for o in 0..outer {
                for r in 0..inner {
                    let at = |i: usize| o * n * inner + i * inner + r;
                    let m = (0..n).map(|i| x[at(i)]).fold(f64::NEG_INFINITY, f64::max);
                    let mut z = 0.0;
                    for i in 0..n {
                        let e = (x[at(i)] - m).exp();
                        data[at(i)] = e;
                        z += e;
                    }
                    for i in 0..n {
                        data[at(i)] /= z;
                    }
                }
            }
            out(data)
        }
        Op::MaskedSoftmax => {
            let (x, mask) = (xs[0].data(), xs[1].data());
            let active: Vec<usize> = (0..x.len()).filter(|&i| mask[i] != 0.0).collect();
            if active.is_empty() {
                return Err(Error::Data("masked softmax over an all-padding input".into()));
            }
            let m = active.iter().map(|&i| x[i]).fold(f64::NEG_INFINITY, f64::max);
            let mut data = vec![0.0; x.len()];
            let mut z = 0.0;
            for &i in &active {
                data[i] = (x[i] - m).exp();
                z += data[i];
            }
            for &i in &active {
                data[i] /= z;
            }
            out(data)
        }
        Op::Reduce { kind, axis } => {
            let (outer, n, inner) = split_axis(xs[0].shape(), *axis);
            let x = xs[0].data();
            let mut data = Vec::with_capacity(outer * inner);
            for o in 0..outer {
                for r in 0..inner {
                    let vals = (0..n).map(|i| x[o * n * inner + i * inner + r]);
                    data.push(match kind {
                        Reduce::Sum => vals.sum(),
                        Reduce::Mean => vals.sum::<f64>() / n as f64,
                        Reduce::Max => vals.fold(f64::NEG_INFINITY, f64::max),
                    });
                }
            }
            out(data)
        }
        Op::SumAll => out(vec![xs[0].data().iter().sum()]),
        Op::Conv2d => {
            let (x, k, b) = (xs[0], xs[1], xs[2]);
            let (c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
            let (f, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
            let (oh, ow) = (out_shape[1], out_shape[2]);
            let (xd, kd) = (x.data(), k.data());
            let mut data = vec![0.0; f * oh * ow];
            for fi in 0..f {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = b.data()[fi];
                        for c in 0..c_in {
                            for u in 0..kh {
                                let xrow = &xd[(c * h + i + u) * w + j..][..kw];
                                let krow = &kd[((fi * c_in + c) * kh + u) * kw..][..kw];
                                acc += dot(xrow, krow);
                            }
                        }
                        data[(fi * oh + i) * ow + j] = acc;
                    }
                }
            }
            out(data)
        }
        Op::MaxPool2d { .. } | Op::GridPool { .. } => {
            let x = xs[0].data();
            out(pool_argmax(op, xs[0]).into_iter().map(|i| x[i]).collect())
        }
        Op::CosineMatrix => cosine_matrix(xs[0], xs[1]),
        Op::IndicatorMatrix { padding } => {
            let (a, b) = (xs[0].data(), xs[1].data());
            let mut data = Vec::with_capacity(a.len() * b.len());
            for &x in a {
                for &y in b {
                    let hit = x == y && x != *padding as f64;
                    data.push(if hit { 1.0 } else { 0.0 });
                }
            }
            out(data)
        }
        Op::NonPadMask { padding } => out(xs[0]
            .data()
            .iter()
            .map(|&v| if v == *padding as f64 { 0.0 } else { 1.0 })
            .collect()),
        Op::Histogram { bins, log, padding } => {
            let (a, b, ids) = (xs[0], xs[1], xs[2]);
            let sims = cosine_matrix(a, b);
            let l2 = b.shape()[0];
            let mut data: Vec<f64> = vec![0.0; a.shape()[0] * bins];
            for (i, row) in sims.data().chunks(l2).enumerate() {
                for (j, &s) in row.iter().enumerate() {
                    if ids.data()[j] != *padding as f64 {
                        data[i * bins + histogram_bin(s, *bins)] += 1.0;
                    }
                }
            }
            if *log {
                for v in &mut data {
                    *v = v.ln_1p();
                }
            }
            out(data)
        }
    })
}

fn transpose(x: &Tensor) -> Tensor {
    let (m, n) = (x.shape()[0], x.shape()[1]);
    let d = x.data();
    let mut data = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            data.push(d[i * n + j]);
        }
    }
    Tensor::from_parts(vec![n, m], data)
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += av * b[p * n + j];
            }
        }
    }
    out
}

/// Vector-Jacobian product: gradients for each operand given the upstream gradient `g`.
/// `None` marks operands that receive no gradient.
pub fn backward(op: &Op, xs: &[&Tensor], y: &Tensor, g: &Tensor) -> Vec<Option<Tensor>> {
    let like = |t: &Tensor, data: Vec<f64>| Some(Tensor::from_parts(t.shape().to_vec(), data));
    let gd = g.data();
    match op {
        Op::Binary(kind, bc) => {
            let (a, b) = (xs[0], xs[1]);
            let row = row_len(*bc, a, b);
            let (mut ga, mut gb) = (vec![0.0; a.numel()], vec![0.0; b.numel()]);
            for (k, &gk) in gd.iter().enumerate() {
                let (i, j) = bcast_index(*bc, k, row);
                let (da, db) = match kind {
                    Binary::Add => (1.0, 1.0),
                    Binary::Sub => (1.0, -1.0),
                    Binary::Mul => (b.data()[j], a.data()[i]),
                };
                ga[i] += gk * da;
                gb[j] += gk * db;
            }
            vec![like(a, ga), like(b, gb)]
        }
        Op::Scale(c) => vec![like(xs[0], gd.iter().map(|v| c * v).collect())],
        Op::Unary(u) => {
            let (x, yd) = (xs[0].data(), y.data());
            let data = (0..x.len())
                .map(|i| {
                    gd[i]
                        * match u {
                            Unary::Sigmoid => yd[i] * (1.0 - yd[i]),
                            Unary::Tanh => 1.0 - yd[i] * yd[i],
                            Unary::Relu => {
                                if x[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Unary::Exp => yd[i],
                            Unary::Log => {
                                if x[i] > LOG_EPS {
                                    1.0 / x[i]
                                } else {
                                    0.0
                                }
                            }
                        }
                })
                .collect();
            vec![like(xs[0], data)]
        }
        Op::MatMul => {
            let (a, b) = (xs[0], xs[1]);
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let bt = transpose(b);
            let at = transpose(a);
            vec![
                like(a, matmul_raw(gd, bt.data(), m, n, k)),
                like(b, matmul_raw(at.data(), gd, k, m, n)),
            ]
        }
        Op::Transpose => vec![Some(transpose(g))],
        Op::Concat { axis } => {
            let (outer, _, inner) = split_axis(y.shape(), *axis);
            let total = y.shape()[*axis] * inner;
            let mut offset = 0;
            xs.iter()
                .map(|x| {
                    let chunk = x.shape()[*axis] * inner;
                    let mut data = Vec::with_capacity(x.numel());
                    for o in 0..outer {
                        data.extend_from_slice(&gd[o * total + offset..o * total + offset + chunk]);
                    }
                    offset += chunk;
                    like(x, data)
                })
                .collect()
        }
        Op::Reshape { .. } => vec![like(xs[0], gd.to_vec())],
        Op::Slice { axis, start, len } => {
            let (outer, n, inner) = split_axis(xs[0].shape(), *axis);
            let mut data = vec![0.0; xs[0].numel()];
            for o in 0..outer {
                let dst = o * n * inner + start * inner;
                data[dst..dst + len * inner].copy_from_slice(&gd[o * len * inner..(o + 1) * len * inner]);
            }
            vec![like(xs[0], data)]
        }
        Op::Gather { padding } => {
            let (table, idx) = (xs[0], xs[1]);
            let d = table.shape()[1];
            let mut data = vec![0.0; table.numel()];
            for (pos, &w) in idx.data().iter().enumerate() {
                let w = w as usize;
                if Some(w) == *padding {
                    continue;
                }
                for (t, gv) in data[w * d..(w + 1) * d].iter_mut().zip(&gd[pos * d..(pos + 1) * d]) {
                    *t += gv;
                }
            }
            vec![like(table, data), None]
        }
        Op::Softmax { axis } => {
            let (outer, n, inner) = split_axis(y.shape(), *axis);
            let yd = y.data();
            let mut data = vec![0.0; yd.len()];
            for o in 0..outer {
                for r in 0..inner {
                    let at = |i: usize| o * n * inner + i * inner + r;
                    let s: f64 = (0..n).map(|i| gd[at(i)] * yd[at(i)]).sum();
                    for i in 0..n {
                        data[at(i)] = yd[at(i)] * (gd[at(i)] - s);
                    }
                }
            }
            vec![like(xs[0], data)]
        }
        Op::MaskedSoftmax => {
            let yd = y.data();
            let s: f64 = gd.iter().zip(yd).map(|(a, b)| a * b).sum();
            let data = yd.iter().zip(gd).map(|(&yi, &gi)| yi * (gi - s)).collect();
            vec![like(xs[0], data), None]
        }
        Op::Reduce { kind, axis } => {
            let (outer, n, inner) = split_axis(xs[0].shape(), *axis);
            let x = xs[0].data();
            let mut data = vec![0.0; x.len()];
            for o in 0..outer {
                for r in 0..inner {
                    let gv = gd[o * inner + r];
                    let at = |i: usize| o * n * inner + i * inner + r;
                    match kind {
                        Reduce::Sum => (0..n).for_each(|i| data[at(i)] = gv),
                        Reduce::Mean => (0..n).for_each(|i| data[at(i)] = gv / n as f64),
                        Reduce::Max => {
                            let best = (0..n).fold(0, |b, i| if x[at(i)] > x[at(b)] { i } else { b });
                            data[at(best)] = gv;
                        }
                    }
                }
            }
            vec![like(xs[0], data)]
        }
        Op::SumAll => vec![like(xs[0], vec![gd[0]; xs[0].numel()])],
        Op::Conv2d => {
            let (x, k, b) = (xs[0], xs[1], xs[2]);
            let (c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
            let (f, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
            let (oh, ow) = (y.shape()[1], y.shape()[2]);
            let (xd, kd) = (x.data(), k.data());
            let (mut gx, mut gk, mut gb) = (vec![0.0; x.numel()], vec![0.0; k.numel()], vec![0.0; f]);
            for fi in 0..f {
                for i in 0..oh {
                    for j in 0..ow {
                        let gv = gd[(fi * oh + i) * ow + j];
                        if gv == 0.0 {
                            continue;
                        }
                        gb[fi] += gv;
                        for c in 0..c_in {
                            for u in 0..kh {
                                let xo = (c * h + i + u) * w + j;
                                let ko = ((fi * c_in + c) * kh + u) * kw;
                                for v in 0..kw {
                                    gx[xo + v] += gv * kd[ko + v];
                                    gk[ko + v] += gv * xd[xo + v];
                                }
                            }
                        }
                    }
                }
            }
            vec![like(x, gx), like(k, gk), like(b, gb)]
        }
        Op::MaxPool2d { .. } | Op::GridPool { .. } => {
            let mut data = vec![0.0; xs[0].numel()];
            for (o, src) in pool_argmax(op, xs[0]).into_iter().enumerate() {
                data[src] += gd[o];
            }
            vec![like(xs[0], data)]
        }
        Op::CosineMatrix => {
            let (a, b) = (xs[0], xs[1]);
            let d = a.shape()[1];
            let (l1, l2) = (a.shape()[0], b.shape()[0]);
            let (na, nb) = (norms(a), norms(b));
            let (ad, bd, yd) = (a.data(), b.data(), y.data());
            let (mut ga, mut gb) = (vec![0.0; a.numel()], vec![0.0; b.numel()]);
            for i in 0..l1 {
                for j in 0..l2 {
                    let gv = gd[i * l2 + j];
                    if gv == 0.0 {
                        continue;
                    }
                    let denom = na[i] * nb[j];
                    let (ra, rb) = (&ad[i * d..(i + 1) * d], &bd[j * d..(j + 1) * d]);
                    if denom > COSINE_EPS {
                        let m = yd[i * l2 + j];
                        let (sa, sb) = (m / (na[i] * na[i]), m / (nb[j] * nb[j]));
                        for t in 0..d {
                            ga[i * d + t] += gv * (rb[t] / denom - sa * ra[t]);
                            gb[j * d + t] += gv * (ra[t] / denom - sb * rb[t]);
                        }
                    } else {
                        for t in 0..d {
                            ga[i * d + t] += gv * rb[t] / COSINE_EPS;
                            gb[j * d + t] += gv * ra[t] / COSINE_EPS;
                        }
                    }
                }
            }
            vec![like(a, ga), like(b, gb)]
        }
        Op::IndicatorMatrix { .. } | Op::NonPadMask { .. } | Op::Histogram { .. } => {
            vec![None; xs.len()]
        }
    }
}
