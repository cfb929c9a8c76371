//! Graph convolution and single-head graph attention, forward and backward.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::batch::GraphBatch;
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const LEAKY_SLOPE: f64 = 0.2;

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|x| x.max(0.0))
}

fn relu_mask(pre: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let mut out = grad.clone();
    out.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// `sum_{u -> v} norm(u, v) h_u` for every node `v`.
fn propagate(b: &GraphBatch, h: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(h.raw_dim());
    for a in &b.arcs {
        out.row_mut(a.dst).scaled_add(a.norm, &h.row(a.src));
    }
    out
}

pub struct ConvCache {
    ax: Array2<f64>,
    pre: Array2<f64>,
}

/// `relu(A_hat h w + bias)`.
pub fn conv_fwd(b: &GraphBatch, h: &Array2<f64>, w: &Array2<f64>, bias: &Array1<f64>) -> (Array2<f64>, ConvCache) {
    let ax = propagate(b, &h.view());
    let pre = ax.dot(w) + bias;
    (relu(&pre), ConvCache { ax, pre })
}

/// Gradients of the weight and bias. The input is never trained, so its
/// gradient is not formed.
pub fn conv_bwd(cache: &ConvCache, dout: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let dpre = relu_mask(&cache.pre, dout);
    (cache.ax.t().dot(&dpre), dpre.sum_axis(Axis(0)))
}

/// Symmetric-normalized weighted convolution without bias on a single graph.
pub fn conv_forward(g: &Graph, h: &Array2<f64>, w: &Array2<f64>) -> Result<Array2<f64>> {
    if h.nrows() != g.n() || h.ncols() != w.nrows() {
        return Err(Error::Shape(format!(
            "conv: h is {}x{}, w is {}x{}, graph has {} nodes",
            h.nrows(),
            h.ncols(),
            w.nrows(),
            w.ncols(),
            g.n()
        )));
    }
    let b = GraphBatch::from_graph(g);
    Ok(relu(&propagate(&b, &h.view()).dot(w)))
}

/// Single attention head. `edge` holds one entry `theta`; the edge weight
/// enters each logit scaled by `exp(theta) > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Attention {
    pub w: Array2<f64>,
    pub a_src: Array1<f64>,
    pub a_dst: Array1<f64>,
    pub edge: Array1<f64>,
    pub bias: Array1<f64>,
}

impl Attention {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Attention {
            w: Array2::zeros((d_in, d_out)),
            a_src: Array1::zeros(d_out),
            a_dst: Array1::zeros(d_out),
            edge: Array1::zeros(1),
            bias: Array1::zeros(d_out),
        }
    }

    fn edge_scale(&self) -> f64 {
        self.edge[0].exp()
    }
}

pub struct AttentionCache {
    input: Array2<f64>,
    z: Array2<f64>,
    logit: Vec<f64>,
    alpha: Vec<f64>,
    pre: Array2<f64>,
}

fn softmax_coefficients(b: &GraphBatch, att: &Attention, z: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let s = z.dot(&att.a_src);
    let d = z.dot(&att.a_dst);
    let c = att.edge_scale();
    let logit: Vec<f64> = b.arcs.iter().map(|a| s[a.src] + d[a.dst] + c * a.w).collect();
    let mut alpha = vec![0.0; logit.len()];
    for r in &b.incoming {
        let act = |x: f64| if x > 0.0 { x } else { LEAKY_SLOPE * x };
        let m = logit[r.clone()]
            .iter()
            .map(|&x| act(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for i in r.clone() {
            alpha[i] = (act(logit[i]) - m).exp();
            total += alpha[i];
        }
        for i in r.clone() {
            alpha[i] /= total;
        }
    }
    (logit, alpha)
}

pub fn attention_fwd(b: &GraphBatch, h: &Array2<f64>, att: &Attention) -> (Array2<f64>, AttentionCache) {
    let z = h.dot(&att.w);
    let (logit, alpha) = softmax_coefficients(b, att, &z);
    let mut pre = Array2::zeros(z.raw_dim());
    for (a, &al) in b.arcs.iter().zip(&alpha) {
        pre.row_mut(a.dst).scaled_add(al, &z.row(a.src));
    }
    pre += &att.bias;
    let out = relu(&pre);
    (
        out,
        AttentionCache {
            input: h.clone(),
            z,
            logit,
            alpha,
            pre,
        },
    )
}

/// Returns the parameter gradients and the gradient with respect to the input.
pub fn attention_bwd(
    b: &GraphBatch,
    att: &Attention,
    cache: &AttentionCache,
    dout: &Array2<f64>,
) -> (Attention, Array2<f64>) {
    let dpre = relu_mask(&cache.pre, dout);
    let z = &cache.z;
    let mut dz = Array2::<f64>::zeros(z.raw_dim());
    let mut dalpha = vec![0.0; b.arcs.len()];
    for (i, a) in b.arcs.iter().enumerate() {
        dz.row_mut(a.src).scaled_add(cache.alpha[i], &dpre.row(a.dst));
        dalpha[i] = dpre.row(a.dst).dot(&z.row(a.src));
    }
    let n = z.nrows();
    let mut ds = Array1::<f64>::zeros(n);
    let mut dd = Array1::<f64>::zeros(n);
    let c = att.edge_scale();
    let mut dtheta = 0.0;
    for r in &b.incoming {
        let mean: f64 = r.clone().map(|i| cache.alpha[i] * dalpha[i]).sum();
        for i in r.clone() {
            let slope = if cache.logit[i] > 0.0 { 1.0 } else { LEAKY_SLOPE };
            let de = cache.alpha[i] * (dalpha[i] - mean) * slope;
            let a = &b.arcs[i];
            ds[a.src] += de;
            dd[a.dst] += de;
            dtheta += de * a.w * c;
        }
    }
    let d_out = z.ncols();
    let ds_col = ds.view().into_shape_with_order((n, 1)).expect("column");
    let dd_col = dd.view().into_shape_with_order((n, 1)).expect("column");
    let asrc_row = att.a_src.view().into_shape_with_order((1, d_out)).expect("row");
    let adst_row = att.a_dst.view().into_shape_with_order((1, d_out)).expect("row");
    dz = dz + ds_col.dot(&asrc_row) + dd_col.dot(&adst_row);
    let grads = Attention {
        w: cache.input.t().dot(&dz),
        a_src: z.t().dot(&ds),
        a_dst: z.t().dot(&dd),
        edge: Array1::from_elem(1, dtheta),
        bias: dpre.sum_axis(Axis(0)),
    };
    let dh = dz.dot(&att.w.t());
    (grads, dh)
}

/// Attention layer on a single graph. Returns the output and, for every node,
/// its `(source, coefficient)` pairs with the self-loop first.
pub fn attention_forward(g: &Graph, h: &Array2<f64>, att: &Attention) -> Result<(Array2<f64>, Vec<Vec<(usize, f64)>>)> {
    let d = att.w.ncols();
    if h.nrows() != g.n()
        || h.ncols() != att.w.nrows()
        || att.a_src.len() != d
        || att.a_dst.len() != d
        || att.bias.len() != d
        || att.edge.len() != 1
    {
        return Err(Error::Shape(format!(
            "attention: h is {}x{}, w is {}x{}, graph has {} nodes",
            h.nrows(),
            h.ncols(),
            att.w.nrows(),
            d,
            g.n()
        )));
    }
    let b = GraphBatch::from_graph(g);
    let (out, cache) = attention_fwd(&b, h, att);
    let coeffs = b
        .incoming
        .iter()
        .map(|r| r.clone().map(|i| (b.arcs[i].src, cache.alpha[i])).collect())
        .collect();
    Ok((out, coeffs))
}
