//! Shared oracles and random-instance builders for the integration tests.
//!
//! Everything here is written against the public API only and recomputes
//! reference values with plain loops.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use textmatch::autodiff::{grad_check, Bindings, Graph, NodeId, NodeKind, Op, Reduce, Unary};
use textmatch::layers::{self, Gru2dParams, MatchingMode};
use textmatch::models::{Model, ModelConfig, ModelKind};
use textmatch::training::{listwise_softmax_ce, pairwise_hinge, pointwise_logistic, pointwise_mse};
use textmatch::Tensor;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Minimum distance of any sampled input from a relu kink, a pooling tie or a histogram bin edge.
pub const KINK: f64 = 1e-3;
/// Magnitude of the random loss projection. One rounding step of the loss
/// then moves a numeric derivative by less than `TOLERANCE` times the 1e-8
/// relative-error floor.
pub const PROJECTION: f64 = 0.01;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Pairwise distinct values with gaps far above [`KINK`], in random order.
pub fn well_separated(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let gap = 3.0 / n as f64;
    let mut data: Vec<f64> = (0..n).map(|i| -1.5 + gap * i as f64 + rng.gen_range(0.0..gap * 0.5)).collect();
    data.shuffle(rng);
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn dim(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    rng.gen_range(lo..=hi)
}

/// A scalar loss over a randomly built graph fragment.
pub struct Case {
    pub graph: Graph,
    pub loss: NodeId,
    pub bindings: Bindings,
}

pub type Builder = fn(&mut ChaCha8Rng) -> Case;

/// `sum(x * C)` for a random constant `C` in `[-PROJECTION, PROJECTION)`, so every output entry carries a distinct weight.
fn project(g: &mut Graph, rng: &mut ChaCha8Rng, x: NodeId) -> NodeId {
    let shape = g.shape(x).to_vec();
    let c = g.constant(uniform(rng, &shape, -PROJECTION, PROJECTION));
    let y = g.mul(x, c).unwrap();
    g.sum_all(y).unwrap()
}

fn case(mut g: Graph, rng: &mut ChaCha8Rng, out: NodeId, bindings: Bindings) -> Case {
    let loss = project(&mut g, rng, out);
    Case { graph: g, loss, bindings }
}

fn param(g: &mut Graph, name: &str, t: Tensor) -> NodeId {
    g.parameter(name, t).unwrap()
}

/// Replaces every parameter value with uniform noise in `[-scale, scale)`.
pub fn randomize_params(g: &mut Graph, rng: &mut ChaCha8Rng, scale: f64) {
    for p in g.params_mut() {
        let shape = p.value.shape().to_vec();
        p.value = uniform(rng, &shape, -scale, scale);
    }
}

fn binary(rng: &mut ChaCha8Rng, f: fn(&mut Graph, NodeId, NodeId) -> textmatch::Result<NodeId>) -> Case {
    let (r, c) = (dim(rng, 1, 4), dim(rng, 1, 4));
    let mut g = Graph::new();
    let a = param(&mut g, "a", uniform(rng, &[r, c], -2.0, 2.0));
    let b_shape = match rng.gen_range(0..3) {
        0 => vec![r, c],
        1 => vec![1],
        _ => vec![c],
    };
    let b = param(&mut g, "b", uniform(rng, &b_shape, -2.0, 2.0));
    let out = if rng.gen_bool(0.5) { f(&mut g, a, b) } else { f(&mut g, b, a) }.unwrap();
    case(g, rng, out, Bindings::new())
}

fn unary(rng: &mut ChaCha8Rng, lo: f64, hi: f64, f: fn(&mut Graph, NodeId) -> textmatch::Result<NodeId>) -> Case {
    let shape = [dim(rng, 1, 4), dim(rng, 1, 4)];
    let mut g = Graph::new();
    let x = param(&mut g, "x", uniform(rng, &shape, lo, hi));
    let out = f(&mut g, x).unwrap();
    case(g, rng, out, Bindings::new())
}

fn op_add(rng: &mut ChaCha8Rng) -> Case {
    binary(rng, Graph::add)
}
fn op_sub(rng: &mut ChaCha8Rng) -> Case {
    binary(rng, Graph::sub)
}
fn op_mul(rng: &mut ChaCha8Rng) -> Case {
    binary(rng, Graph::mul)
}
fn op_scale(rng: &mut ChaCha8Rng) -> Case {
    let factor = rng.gen_range(-3.0..3.0);
    let shape = [dim(rng, 1, 4), dim(rng, 1, 4)];
    let mut g = Graph::new();
    let x = param(&mut g, "x", uniform(rng, &shape, -2.0, 2.0));
    let out = g.scale(x, factor).unwrap();
    case(g, rng, out, Bindings::new())
}
fn op_sigmoid(rng: &mut ChaCha8Rng) -> Case {
    unary(rng, -3.0, 3.0, Graph::sigmoid)
}
fn op_tanh(rng: &mut ChaCha8Rng) -> Case {
    unary(rng, -3.0, 3.0, Graph::tanh)
}
fn op_relu(rng: &mut ChaCha8Rng) -> Case {
    unary(rng, -2.0, 2.0, Graph::relu)
}
fn op_exp(rng: &mut ChaCha8Rng) -> Case {
    unary(rng, -2.0, 2.0, Graph::exp)
}
fn op_log(rng: &mut ChaCha8Rng) -> Case {
    unary(rng, 0.1, 3.0, Graph::log)
}
fn op_matmul(rng: &mut ChaCha8Rng) -> Case {
    let (n, k, m) = (dim(rng, 1, 4), dim(rng, 1, 4), dim(rng, 1, 4));
    let mut g = Graph::new();
    let a = param(&mut g, "a", uniform(rng, &[n, k], -1.0, 1.0));
    let b = param(&mut g, "b", uniform(rng, &[k, m], -1.0, 1.0));
    let out = g.matmul(a, b).unwrap();
    case(g, rng, out, Bindings::new())
}
fn op_transpose(rng: &mut ChaCha8Rng) -> Case {
    unary(rng, -1.0, 1.0, Graph::transpose)
}
fn op_concat(rng: &mut ChaCha8Rng) -> Case {
    let axis = rng.gen_range(0..2);
    let other = dim(rng, 1, 3);
    let parts = dim(rng, 1, 3);
    let mut g = Graph::new();
    let nodes: Vec<NodeId> = (0..parts)
        .map(|i| {
            let along = dim(rng, 1, 3);
            let shape = if axis == 0 { [along, other] } else { [other, along] };
            param(&mut g, &format!("p{i}"), uniform(rng, &shape, -1.0, 1.0))
        })
        .collect();
    let out = g.concat(&nodes, axis).unwrap();
    case(g, rng, out, Bindings::new())
}
fn op_reshape(rng: &mut ChaCha8Rng) -> Case {
    let (a, b, c) = (dim(rng, 1, 3), dim(rng, 1, 3), dim(rng, 1, 3));
    let mut g = Graph::new();
    let x = param(&mut g, "x", uniform(rng, &[a, b * c], -1.0, 1.0));
    let out = g.reshape(x, &[a * b, c]).unwrap();
    case(g, rng, out, Bindings::new())
}
fn op_slice(rng: &mut ChaCha8Rng) -> Case {
    let shape = [dim(rng, 1, 4), dim(rng, 1, 4), dim(rng, 1, 3)];
    let axis = rng.gen_range(0..3);
    let start = rng.gen_range(0..shape[axis]);
    let len = rng.gen_range(1..=shape[axis] - start);
    let mut g = Graph::new();
    let x = param(&mut g, "x", uniform(rng, &shape, -1.0, 1.0));
    let out = g.slice(x, axis, start, len).unwrap();
    case(g, rng, out, Bindings::new())
}
fn op_gather(rng: &mut ChaCha8Rng) -> Case {
    let (v, d, n) = (dim(rng, 2, 6), dim(rng, 1, 4), dim(rng, 1, 6));
    let mut g = Graph::new();
    let table = param(&mut g, "table", uniform(rng, &[v, d], -1.0, 1.0));
    let ids = g.input("ids", &[n]).unwrap();
    let padding = if rng.gen_bool(0.5) { Some(0) } else { None };
    let out = g.gather(table, ids, padding).unwrap();
    let id_values = Tensor::vector((0..n).map(|_| rng.gen_range(0..v) as f64).collect());
    case(g, rng, out, Bindings::from([("ids".to_string(), id_values)]))
}
fn op_softmax(rng: &mut ChaCha8Rng) -> Case {
    let shape = [dim(rng, 1, 4), dim(rng, 1, 4)];
    let axis = rng.gen_range(0..2);
    let mut g = Graph::new();
    let x = param(&mut g, "x", uniform(rng, &shape, -3.0, 3.0));
    let out = g.softmax(x, axis).unwrap();
    case(g, rng, out, Bindings::new())
}
fn op_masked_softmax(rng: &mut ChaCha8Rng) -> Case {
    let n = dim(rng, 1, 6);
    let mut mask: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.7)))).collect();
    mask[rng.gen_range(0..n)] = 1.0;
    let mut g = Graph::new();
    let x = param(&mut g, "x", uniform(rng, &[n], -3.0, 3.0));
    let m = g.constant(Tensor::vector(mask));
    let out = g.masked_softmax(x, m).unwrap();
    case(g, rng, out, Bindings::new())
}
fn reduce(rng: &mut ChaCha8Rng, f: fn(&mut Graph, NodeId, usize) -> textmatch::Result<NodeId>) -> Case {
    let rank = dim(rng, 1, 3);
    let shape: Vec<usize> = (0..rank).map(|_| dim(rng, 1, 4)).collect();
    let axis = rng.gen_range(0..rank);
    let mut g = Graph::new();
    let x = param(&mut g, "x", well_separated(rng, &shape));
    let out = f(&mut g, x, axis).unwrap();
    case(g, rng, out, Bindings::new())
}
fn op_sum(rng: &mut ChaCha8Rng) -> Case {
    reduce(rng, Graph::sum)
}
fn op_max(rng: &mut ChaCha8Rng) -> Case {
    reduce(rng, Graph::max)
}
fn op_mean(rng: &mut ChaCha8Rng) -> Case {
    reduce(rng, Graph::mean)
}
fn op_sum_all(rng: &mut ChaCha8Rng) -> Case {
    let shape = [dim(rng, 1, 4), dim(rng, 1, 4)];
    let mut g = Graph::new();
    let x = param(&mut g, "x", uniform(rng, &shape, -1.0, 1.0));
    let c = g.constant(uniform(rng, &shape, -1.0, 1.0));
    let y = g.mul(x, c).unwrap();
    let loss = g.sum_all(y).unwrap();
    Case { graph: g, loss, bindings: Bindings::new() }
}
fn op_conv2d(rng: &mut ChaCha8Rng) -> Case {
    let (c, h, w) = (dim(rng, 1, 3), dim(rng, 1, 5), dim(rng, 1, 5));
    let (f, kh, kw) = (dim(rng, 1, 3), dim(rng, 1, h), dim(rng, 1, w));
    let mut g = Graph::new();
    let x = param(&mut g, "x", uniform(rng, &[c, h, w], -1.0, 1.0));
    let k = param(&mut g, "kernel", uniform(rng, &[f, c, kh, kw], -1.0, 1.0));
    let b = param(&mut g, "bias", uniform(rng, &[f], -1.0, 1.0));
    let out = g.conv2d(x, k, b).unwrap();
    case(g, rng, out, Bindings::new())
}
fn op_maxpool2d(rng: &mut ChaCha8Rng) -> Case {
    let (c, h, w) = (dim(rng, 1, 2), dim(rng, 1, 6), dim(rng, 1, 6));
    let (pr, pc) = (dim(rng, 1, h), dim(rng, 1, w));
    let mut g = Graph::new();
    let x = param(&mut g, "x", well_separated(rng, &[c, h, w]));
    let out = g.maxpool2d(x, pr, pc).unwrap();
    case(g, rng, out, Bindings::new())
}
fn op_grid_pool(rng: &mut ChaCha8Rng) -> Case {
    let (c, h, w) = (dim(rng, 1, 2), dim(rng, 1, 7), dim(rng, 1, 7));
    let (p1, p2) = (dim(rng, 1, h), dim(rng, 1, w));
    let mut g = Graph::new();
    let x = param(&mut g, "x", well_separated(rng, &[c, h, w]));
    let out = layers::grid_pool(&mut g, x, p1, p2).unwrap();
    case(g, rng, out, Bindings::new())
}
fn matching(rng: &mut ChaCha8Rng, mode: MatchingMode) -> Case {
    let (l1, l2, d) = (dim(rng, 1, 5), dim(rng, 1, 5), dim(rng, 1, 4));
    let mut g = Graph::new();
    let a = param(&mut g, "left", uniform(rng, &[l1, d], -1.0, 1.0));
    let b = param(&mut g, "right", uniform(rng, &[l2, d], -1.0, 1.0));
    let out = layers::matching_matrix(&mut g, a, b, mode).unwrap();
    case(g, rng, out, Bindings::new())
}
fn layer_matching_dot(rng: &mut ChaCha8Rng) -> Case {
    matching(rng, MatchingMode::Dot)
}
fn layer_matching_cosine(rng: &mut ChaCha8Rng) -> Case {
    matching(rng, MatchingMode::Cosine)
}
fn layer_term_gating(rng: &mut ChaCha8Rng) -> Case {
    let (l1, d) = (dim(rng, 1, 6), dim(rng, 1, 4));
    let real = dim(rng, 1, l1);
    let mut g = Graph::new();
    let q = param(&mut g, "query", uniform(rng, &[l1, d], -1.5, 1.5));
    let w = param(&mut g, "gate", uniform(rng, &[d], -1.5, 1.5));
    let ids = g.input("ids", &[l1]).unwrap();
    let out = layers::term_gating(&mut g, q, ids, w).unwrap();
    let id_values = Tensor::vector((0..l1).map(|i| if i < real { rng.gen_range(1..50) as f64 } else { 0.0 }).collect());
    case(g, rng, out, Bindings::from([("ids".to_string(), id_values)]))
}
fn layer_dense(rng: &mut ChaCha8Rng) -> Case {
    let (n, o) = (dim(rng, 1, 5), dim(rng, 1, 5));
    let mut g = Graph::new();
    let x = param(&mut g, "x", uniform(rng, &[1, n], -1.0, 1.0));
    let dense = layers::Dense::register(&mut g, "dense", n, o, rng).unwrap();
    randomize_params(&mut g, rng, 1.0);
    let out = dense.apply(&mut g, x).unwrap();
    case(g, rng, out, Bindings::new())
}
fn layer_gru2d(rng: &mut ChaCha8Rng) -> Case {
    let (l1, l2, m, h) = (dim(rng, 1, 3), dim(rng, 1, 3), dim(rng, 1, 3), dim(rng, 1, 3));
    let mut g = Graph::new();
    let s = param(&mut g, "s", uniform(rng, &[l1, l2, m], -1.0, 1.0));
    let p = Gru2dParams::register(&mut g, "gru", m, h, rng).unwrap();
    randomize_params(&mut g, rng, 1.0);
    let out = layers::gru2d(&mut g, s, &p).unwrap();
    let stacked = out.stacked(&mut g).unwrap();
    case(g, rng, stacked, Bindings::new())
}
fn loss_mse(rng: &mut ChaCha8Rng) -> Case {
    let n = dim(rng, 1, 6);
    let mut g = Graph::new();
    let s = param(&mut g, "s", uniform(rng, &[n], -2.0, 2.0));
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..3) as f64).collect();
    let loss = pointwise_mse(&mut g, s, &y).unwrap();
    Case { graph: g, loss, bindings: Bindings::new() }
}
fn loss_logistic(rng: &mut ChaCha8Rng) -> Case {
    let n = dim(rng, 1, 6);
    let mut g = Graph::new();
    let s = param(&mut g, "s", uniform(rng, &[n], -4.0, 4.0));
    let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
    let loss = pointwise_logistic(&mut g, s, &y).unwrap();
    Case { graph: g, loss, bindings: Bindings::new() }
}
fn loss_hinge(rng: &mut ChaCha8Rng) -> Case {
    let n = dim(rng, 1, 6);
    let margin = rng.gen_range(0.5..1.5);
    let mut g = Graph::new();
    let pos = param(&mut g, "pos", uniform(rng, &[n], -2.0, 2.0));
    let neg = param(&mut g, "neg", uniform(rng, &[n], -2.0, 2.0));
    let loss = pairwise_hinge(&mut g, pos, neg, margin).unwrap();
    Case { graph: g, loss, bindings: Bindings::new() }
}
fn loss_listwise(rng: &mut ChaCha8Rng) -> Case {
    let groups = dim(rng, 1, 3);
    let mut ranges = Vec::new();
    let mut n = 0;
    for _ in 0..groups {
        let len = dim(rng, 1, 5);
        ranges.push(n..n + len);
        n += len;
    }
    let grades: Vec<u32> = (0..n).map(|_| rng.gen_range(0..4)).collect();
    let mut g = Graph::new();
    let s = param(&mut g, "s", uniform(rng, &[n], -3.0, 3.0));
    let loss = listwise_softmax_ce(&mut g, s, &ranges, &grades).unwrap();
    Case { graph: g, loss, bindings: Bindings::new() }
}

/// Every differentiable op, layer and loss with its random-instance builder.
pub fn gradient_suite() -> Vec<(&'static str, Builder)> {
    vec![
        ("add", op_add),
        ("sub", op_sub),
        ("mul", op_mul),
        ("scale", op_scale),
        ("sigmoid", op_sigmoid),
        ("tanh", op_tanh),
        ("relu", op_relu),
        ("exp", op_exp),
        ("log", op_log),
        ("matmul", op_matmul),
        ("transpose", op_transpose),
        ("concat", op_concat),
        ("reshape", op_reshape),
        ("slice", op_slice),
        ("gather", op_gather),
        ("softmax", op_softmax),
        ("masked_softmax", op_masked_softmax),
        ("reduce_sum", op_sum),
        ("reduce_max", op_max),
        ("reduce_mean", op_mean),
        ("sum_all", op_sum_all),
        ("conv2d", op_conv2d),
        ("maxpool2d", op_maxpool2d),
        ("grid_pool", op_grid_pool),
        ("matching_matrix_dot", layer_matching_dot),
        ("matching_matrix_cosine", layer_matching_cosine),
        ("term_gating", layer_term_gating),
        ("dense", layer_dense),
        ("gru2d", layer_gru2d),
        ("loss_pointwise_mse", loss_mse),
        ("loss_pointwise_logistic", loss_logistic),
        ("loss_pairwise_hinge", loss_hinge),
        ("loss_listwise_softmax_ce", loss_listwise),
    ]
}

fn grid_bounds(n: usize, p: usize) -> Vec<(usize, usize)> {
    (0..p).map(|a| (a * n / p, (a + 1) * n / p)).collect()
}

/// Whether a max over `values` is within [`KINK`] of a tie that matters.
/// Ties between exact zeros come from inactive relus and carry no gradient.
fn tied(values: impl Iterator<Item = f64>) -> bool {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v.len() > 1 && v[0] - v[1] < KINK && !(v[0] == 0.0 && v[1] == 0.0)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb).max(1e-12)
}

/// Whether any relu input, pooling window or histogram similarity lies within
/// [`KINK`] of a point where the loss is not differentiable.
pub fn near_kink(case: &Case) -> bool {
    let values = case.graph.forward(&case.bindings).unwrap();
    for node in case.graph.nodes() {
        let NodeKind::Op { op, args } = &node.kind else { continue };
        let x = values.get(args[0]);
        let shape = x.shape();
        let data = x.data();
        match op {
            Op::Unary(Unary::Relu) => {
                if data.iter().any(|v| v.abs() < KINK) {
                    return true;
                }
            }
            Op::Reduce { kind: Reduce::Max, axis } => {
                let outer: usize = shape[..*axis].iter().product();
                let n = shape[*axis];
                let inner: usize = shape[axis + 1..].iter().product();
                for o in 0..outer {
                    for i in 0..inner {
                        if tied((0..n).map(|k| data[(o * n + k) * inner + i])) {
                            return true;
                        }
                    }
                }
            }
            Op::MaxPool2d { rows, cols } | Op::GridPool { rows, cols } => {
                let r = shape.len();
                let (n1, n2) = (shape[r - 2], shape[r - 1]);
                let (rb, cb) = if matches!(op, Op::MaxPool2d { .. }) {
                    (
                        (0..n1 / rows).map(|a| (a * rows, (a + 1) * rows)).collect::<Vec<_>>(),
                        (0..n2 / cols).map(|b| (b * cols, (b + 1) * cols)).collect::<Vec<_>>(),
                    )
                } else {
                    (grid_bounds(n1, *rows), grid_bounds(n2, *cols))
                };
                let planes: usize = shape[..r - 2].iter().product();
                for p in 0..planes {
                    for &(r0, r1) in &rb {
                        for &(c0, c1) in &cb {
                            let cells = (r0..r1).flat_map(|i| (c0..c1).map(move |j| (i, j)));
                            if tied(cells.map(|(i, j)| data[p * n1 * n2 + i * n2 + j])) {
                                return true;
                            }
                        }
                    }
                }
            }
            Op::Histogram { bins, padding, .. } => {
                let (q, d, ids) = (values.get(args[0]), values.get(args[1]), values.get(args[2]));
                let dim = q.shape()[1];
                for qi in q.data().chunks(dim) {
                    for (dj, &id) in d.data().chunks(dim).zip(ids.data()) {
                        if id as usize == *padding {
                            continue;
                        }
                        let c = cosine(qi, dj);
                        let pos = (c + 1.0) / 2.0 * *bins as f64;
                        let edge = (pos - pos.round()).abs() * 2.0 / *bins as f64;
                        if edge < KINK && pos.round() > 0.0 && pos.round() < *bins as f64 {
                            return true;
                        }
                    }
                }
            }
            _ => {}
        }
    }
    false
}

/// Worst relative error over `instances` kink-free instances, and the number of resamples.
pub fn check_builder(build: Builder, instances: usize, seed: u64) -> (f64, usize) {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    let mut resampled = 0;
    let mut done = 0;
    while done < instances {
        let mut case = build(&mut rng);
        if near_kink(&case) {
            resampled += 1;
            assert!(resampled < 20 * instances, "too many kink resamples");
            continue;
        }
        let report = grad_check(&mut case.graph, case.loss, &case.bindings, STEP, TOLERANCE).unwrap();
        worst = worst.max(report.max_rel_error());
        done += 1;
    }
    (worst, resampled)
}

/// Small configuration of each model kind with every length and width at most 8.
pub fn small_model_config(kind: ModelKind, seed: u64) -> ModelConfig {
    let mut c = ModelConfig::new(kind, 12, 4, 4, 6);
    c.mlp = vec![4];
    c.seed = seed;
    c.arci.filters = 3;
    c.arci.kernel_width = 2;
    c.matchpyramid.filters = 2;
    c.matchpyramid.kernel = [2, 2];
    c.matchpyramid.pool = [2, 2];
    c.drmm.bins = 6;
    c.matchsrnn.hidden = 3;
    c
}

fn random_wids(rng: &mut ChaCha8Rng, len: usize, vocab: usize) -> Vec<usize> {
    let real = rng.gen_range(1..=len);
    (0..len).map(|i| if i < real { rng.gen_range(1..vocab) } else { 0 }).collect()
}

/// Score of a randomly initialised small model on a random padded pair, as a gradient-check case.
pub fn model_case(kind: ModelKind, rng: &mut ChaCha8Rng) -> Case {
    let config = small_model_config(kind, rng.gen());
    let model = Model::build(&config).unwrap();
    let left = random_wids(rng, config.left_length, config.vocab_size);
    let right = random_wids(rng, config.right_length, config.vocab_size);
    let bindings = model.bindings(&left, &right).unwrap();
    let loss = model.score_node();
    let mut graph = model.graph().clone();
    randomize_params(&mut graph, rng, 0.8);
    Case { graph, loss, bindings }
}

/// Plain-loop 2-D GRU over `s [l1, l2, m]` with row-vector weights `[in, out]`.
#[allow(clippy::too_many_arguments)]
pub fn naive_gru2d(
    s: &[f64],
    l1: usize,
    l2: usize,
    m: usize,
    h: usize,
    params: &HashMap<String, Vec<f64>>,
) -> Vec<f64> {
    let wr = &params["gru.reset.weight"];
    let br = &params["gru.reset.bias"];
    let wc = &params["gru.candidate.weight"];
    let bc = &params["gru.candidate.bias"];
    let wz = &params["gru.mix.weight"];
    let bz = &params["gru.mix.bias"];
    let q_len = 3 * h + m;
    let affine = |x: &[f64], w: &[f64], b: &[f64], out: usize| -> Vec<f64> {
        (0..out)
            .map(|k| {
                let mut acc = b[k];
                for (i, xi) in x.iter().enumerate() {
                    acc += xi * w[i * out + k];
                }
                acc
            })
            .collect()
    };
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut hs = vec![vec![0.0; h]; l1 * l2];
    let zero = vec![0.0; h];
    for i in 0..l1 {
        for j in 0..l2 {
            let hl = if j > 0 { hs[i * l2 + j - 1].clone() } else { zero.clone() };
            let ht = if i > 0 { hs[(i - 1) * l2 + j].clone() } else { zero.clone() };
            let hd = if i > 0 && j > 0 { hs[(i - 1) * l2 + j - 1].clone() } else { zero.clone() };
            let sij = &s[(i * l2 + j) * m..(i * l2 + j + 1) * m];
            let mut q = Vec::with_capacity(q_len);
            q.extend(&hl);
            q.extend(&ht);
            q.extend(&hd);
            q.extend(sij);
            let r: Vec<f64> = affine(&q, wr, br, 3 * h).into_iter().map(sigmoid).collect();
            let mut c_in = sij.to_vec();
            for k in 0..h {
                c_in.push(r[k] * hl[k]);
            }
            for k in 0..h {
                c_in.push(r[h + k] * ht[k]);
            }
            for k in 0..h {
                c_in.push(r[2 * h + k] * hd[k]);
            }
            let cand: Vec<f64> = affine(&c_in, wc, bc, h).into_iter().map(f64::tanh).collect();
            let z = affine(&q, wz, bz, 4 * h);
            let mut out = vec![0.0; h];
            for k in 0..h {
                let logits = [z[k], z[h + k], z[2 * h + k], z[3 * h + k]];
                let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                let total: f64 = e.iter().sum();
                out[k] = (e[0] * hl[k] + e[1] * ht[k] + e[2] * hd[k] + e[3] * cand[k]) / total;
            }
            hs[i * l2 + j] = out;
        }
    }
    hs.concat()
}

/// Per query metrics from scratch: `(p@k, ap, ndcg@k, rr)` for the given `k`.
pub fn brute_force_metrics(
    scored: &[(String, f64)],
    judged: &BTreeMap<String, u32>,
    k: usize,
) -> (f64, f64, f64, f64) {
    let mut order: Vec<&(String, f64)> = scored.iter().collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let grade = |d: &str| judged.get(d).copied().unwrap_or(0);
    let grades: Vec<u32> = order.iter().map(|(d, _)| grade(d)).collect();

    let relevant_in_top = (0..k).filter(|&i| i < grades.len() && grades[i] > 0).count();
    let precision = relevant_in_top as f64 / k as f64;

    let total_relevant = judged.values().filter(|&&g| g > 0).count();
    let mut ap = 0.0;
    for (i, &g) in grades.iter().enumerate() {
        if g > 0 {
            let hits_so_far = grades[..=i].iter().filter(|&&x| x > 0).count();
            ap += hits_so_far as f64 / (i + 1) as f64;
        }
    }
    let ap = if total_relevant == 0 { 0.0 } else { ap / total_relevant as f64 };

    let gain = |g: u32| (1u64 << g) as f64 - 1.0;
    let mut dcg = 0.0;
    for (i, &g) in grades.iter().enumerate().take(k) {
        dcg += gain(g) / (2.0 + i as f64).ln() * std::f64::consts::LN_2;
    }
    let mut ideal: Vec<u32> = judged.values().copied().collect();
    ideal.sort_unstable();
    ideal.reverse();
    let mut idcg = 0.0;
    for (i, &g) in ideal.iter().enumerate().take(k) {
        idcg += gain(g) / (2.0 + i as f64).ln() * std::f64::consts::LN_2;
    }
    let ndcg = if idcg > 0.0 { dcg / idcg } else { 0.0 };

    let mut rr = 0.0;
    for (i, &g) in grades.iter().enumerate() {
        if g > 0 {
            rr = 1.0 / (i + 1) as f64;
            break;
        }
    }
    (precision, ap, ndcg, rr)
}

/// A random run (query id -> scored docs) with random judgements, some docs unjudged.
pub type RandomRun = BTreeMap<String, (Vec<(String, f64)>, BTreeMap<String, u32>)>;

pub fn random_run(rng: &mut ChaCha8Rng) -> RandomRun {
    let mut run = BTreeMap::new();
    for q in 0..rng.gen_range(1..=4) {
        let n = rng.gen_range(1..=50);
        let mut docs = Vec::new();
        let mut judged = BTreeMap::new();
        for d in 0..n {
            let id = format!("d{d}");
            // Coarse scores produce ties, which exercise the doc-id tie-break.
            docs.push((id.clone(), f64::from(rng.gen_range(0..20u32)) / 4.0));
            if rng.gen_bool(0.8) {
                judged.insert(id, rng.gen_range(0..4));
            }
        }
        for extra in 0..rng.gen_range(0..3) {
            judged.insert(format!("unretrieved{extra}"), rng.gen_range(0..4));
        }
        run.insert(format!("q{q}"), (docs, judged));
    }
    run
}
