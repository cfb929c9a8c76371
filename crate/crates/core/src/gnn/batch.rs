//! Node features and the flattened multi-graph layout used by every layer.

use std::ops::Range;

use ndarray::{s, Array2};

use crate::graph::Graph;

pub const NUM_FEATURES: usize = 3;

/// `[1, deg/(n-1), wdeg/max_wdeg]` per node.
///
/// Degree counts every incident edge; weighted degree sums incident weights.
/// Both ratios are 0 when their denominator is 0.
pub fn node_features(g: &Graph) -> Array2<f64> {
    let n = g.n();
    let deg = g.degrees();
    let mut wdeg = vec![0.0; n];
    for &(u, v, w) in g.edges() {
        wdeg[u] += w;
        wdeg[v] += w;
    }
    let max_w = wdeg.iter().cloned().fold(0.0, f64::max);
    let mut x = Array2::zeros((n, NUM_FEATURES));
    for i in 0..n {
        x[[i, 0]] = 1.0;
        x[[i, 1]] = if n > 1 { deg[i] as f64 / (n - 1) as f64 } else { 0.0 };
        x[[i, 2]] = if max_w > 0.0 { wdeg[i] / max_w } else { 0.0 };
    }
    x
}

/// Directed message `src -> dst` with its edge weight. Self-loops carry 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub src: usize,
    pub dst: usize,
    pub w: f64,
    /// `w / sqrt(d_src d_dst)` with `d = 1 + weighted degree`.
    pub norm: f64,
}

/// Disjoint union of graphs with node features and grouped arcs.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub x: Array2<f64>,
    pub graph_nodes: Vec<Range<usize>>,
    /// Sorted by `dst`; `incoming[v]` indexes the arcs into `v`.
    pub arcs: Vec<Arc>,
    pub incoming: Vec<Range<usize>>,
}

impl GraphBatch {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.n();
        let adj = g.adjacency();
        let d: Vec<f64> = adj
            .iter()
            .map(|nb| 1.0 + nb.iter().map(|&(_, w)| w).sum::<f64>())
            .collect();
        let mut arcs = Vec::with_capacity(n + 2 * g.num_edges());
        let mut incoming = Vec::with_capacity(n);
        for v in 0..n {
            let start = arcs.len();
            arcs.push(Arc {
                src: v,
                dst: v,
                w: 1.0,
                norm: 1.0 / d[v],
            });
            for &(u, w) in &adj[v] {
                arcs.push(Arc {
                    src: u,
                    dst: v,
                    w,
                    norm: w / (d[u] * d[v]).sqrt(),
                });
            }
            incoming.push(start..arcs.len());
        }
        GraphBatch {
            x: node_features(g),
            graph_nodes: vec![0..n],
            arcs,
            incoming,
        }
    }

    pub fn concat(parts: &[&GraphBatch]) -> Self {
        let nodes: usize = parts.iter().map(|b| b.num_nodes()).sum();
        let mut x = Array2::zeros((nodes, NUM_FEATURES));
        let mut graph_nodes = Vec::new();
        let mut arcs = Vec::new();
        let mut incoming = Vec::with_capacity(nodes);
        let mut off = 0;
        for b in parts {
            let n = b.num_nodes();
            x.slice_mut(s![off..off + n, ..]).assign(&b.x);
            let arc_off = arcs.len();
            arcs.extend(b.arcs.iter().map(|a| Arc {
                src: a.src + off,
                dst: a.dst + off,
                ..*a
            }));
            incoming.extend(b.incoming.iter().map(|r| r.start + arc_off..r.end + arc_off));
            graph_nodes.extend(b.graph_nodes.iter().map(|r| r.start + off..r.end + off));
            off += n;
        }
        GraphBatch {
            x,
            graph_nodes,
            arcs,
            incoming,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_graphs(&self) -> usize {
        self.graph_nodes.len()
    }
}
