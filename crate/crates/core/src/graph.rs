//! Max-Cut problem instances.
//!
//! A [`Graph`] is an undirected, simple, weighted graph with canonical endpoint
//! order (`u < v`) and edges sorted by `(u, v)`. Besides the container this
//! module provides seeded generators, small-graph enumeration up to
//! isomorphism, exact Max-Cut by enumeration, and edge-weight statistics.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use itertools::Itertools;
use rand::Rng as _;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

/// Largest node count accepted by [`enumerate_connected_nonisomorphic`].
pub const MAX_ENUM_NODES: usize = 7;
/// Largest node count accepted by [`max_cut_bruteforce`].
pub const MAX_BRUTEFORCE_NODES: usize = 24;
/// Attempts allowed to a random generator before giving up.
pub const RETRY_BUDGET: usize = 1000;

/// Undirected weighted graph on nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    id: String,
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    #[serde(default)]
    id: Option<String>,
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;

    fn try_from(repr: GraphRepr) -> Result<Self> {
        let mut g = Graph::new(repr.n, repr.edges)?;
        if let Some(id) = repr.id {
            g.id = id;
        }
        Ok(g)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr {
            id: Some(g.id),
            n: g.n,
            edges: g.edges,
        }
    }
}

impl Graph {
    /// Builds a graph, swapping endpoints into `u < v` order and sorting.
    ///
    /// Rejects self-loops, duplicate pairs, out-of-range endpoints and
    /// non-finite weights. Connectivity is not required here.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("graph needs at least one node".into()));
        }
        let mut out = Vec::new();
        for (a, b, w) in edges {
            let (u, v) = if a <= b { (a, b) } else { (b, a) };
            if u == v {
                return Err(Error::Parameter(format!("self-loop on node {u}")));
            }
            if v >= n {
                return Err(Error::Parameter(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if !w.is_finite() {
                return Err(Error::Parameter(format!("edge ({u},{v}) has non-finite weight")));
            }
            out.push((u, v, w));
        }
        out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if let Some(w) = out.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Parameter(format!("duplicate edge ({},{})", w[0].0, w[0].1)));
        }
        let id = edge_list_id(n, &out);
        Ok(Graph { id, n, edges: out })
    }

    /// Unit-weight graph from endpoint pairs.
    pub fn unweighted(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(n, pairs.into_iter().map(|(u, v)| (u, v, 1.0)))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// True when every edge weight is exactly 1.
    pub fn is_unweighted(&self) -> bool {
        self.edges.iter().all(|&(_, _, w)| w == 1.0)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v, _) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Common degree if the graph is regular.
    pub fn regular_degree(&self) -> Option<usize> {
        let deg = self.degrees();
        deg.iter().all(|&d| d == deg[0]).then_some(deg[0])
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(u, _) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Neighbour lists with weights.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v, w) in &self.edges {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        adj
    }

    /// Same topology with new weights, in edge order.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} edges",
                weights.len(),
                self.edges.len()
            )));
        }
        Graph::new(self.n, self.edges.iter().zip(weights).map(|(&(u, v, _), &w)| (u, v, w)))
    }

    /// Copy with node `i` renamed to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n || perm.iter().collect::<HashSet<_>>().len() != self.n {
            return Err(Error::Parameter("relabeling must be a permutation".into()));
        }
        Graph::new(self.n, self.edges.iter().map(|&(u, v, w)| (perm[u], perm[v], w)))
    }

    /// Isomorphism-invariant code of the unweighted topology (weights ignored).
    ///
    /// Minimum adjacency bitstring over all labelings that list nodes by
    /// non-increasing degree. Supports `n <= 11` (the code must fit 64 bits).
    pub fn canonical_code(&self) -> Result<u64> {
        if self.n > 11 {
            return Err(Error::Bounds(format!(
                "canonical code supports n <= 11, got {}",
                self.n
            )));
        }
        let mut adj = vec![0u16; self.n];
        for &(u, v, _) in &self.edges {
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
        Ok(canonical_code(&adj))
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n={}, m={})", self.id, self.n, self.edges.len())
    }
}

fn edge_list_id(n: usize, edges: &[(usize, usize, f64)]) -> String {
    let mut h = Sha256::new();
    h.update(format!("n={n};"));
    for &(u, v, w) in edges {
        h.update(format!("{u},{v},{w:?};"));
    }
    format!("g{}", &hex::encode(h.finalize())[..16])
}

/// Sum of weights crossing a bipartition.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CutValue {
    pub value: f64,
}

impl CutValue {
    pub fn new(value: f64) -> Self {
        CutValue { value }
    }
}

// ---------------------------------------------------------------------------
// Canonical labeling and enumeration

fn canonical_code(adj: &[u16]) -> u64 {
    let n = adj.len();
    let deg: Vec<u32> = adj.iter().map(|a| a.count_ones()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    let classes: Vec<Vec<usize>> = order
        .iter()
        .copied()
        .chunk_by(|&v| deg[v])
        .into_iter()
        .map(|(_, c)| c.collect())
        .collect();

    let mut best = u64::MAX;
    let mut labeling = Vec::with_capacity(n);
    for choice in classes
        .iter()
        .map(|c| c.iter().copied().permutations(c.len()).collect::<Vec<_>>())
        .multi_cartesian_product()
    {
        labeling.clear();
        for part in &choice {
            labeling.extend_from_slice(part);
        }
        best = best.min(code_for_labeling(adj, &labeling));
    }
    if classes.is_empty() {
        best = 0;
    }
    best
}

/// Adjacency bits of pairs `(i, j)`, `i < j`, in new labels, most significant first.
fn code_for_labeling(adj: &[u16], labeling: &[usize]) -> u64 {
    let n = labeling.len();
    let mut code = 0u64;
    for i in 0..n {
        let row = adj[labeling[i]];
        for &lj in &labeling[i + 1..n] {
            code = (code << 1) | u64::from((row >> lj) & 1);
        }
    }
    code
}

fn decode(n: usize, code: u64) -> Vec<u16> {
    let pairs = n * n.saturating_sub(1) / 2;
    let mut adj = vec![0u16; n];
    let mut bit = pairs;
    for i in 0..n {
        for j in i + 1..n {
            bit -= 1;
            if (code >> bit) & 1 == 1 {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    adj
}

fn adjacency_connected(adj: &[u16]) -> bool {
    let n = adj.len();
    let mut seen: u16 = 1;
    let mut frontier: u16 = 1;
    while frontier != 0 {
        let mut next = 0;
        for v in 0..n {
            if frontier >> v & 1 == 1 {
                next |= adj[v];
            }
        }
        frontier = next & !seen;
        seen |= next;
    }
    seen.count_ones() as usize == n
}

/// One representative per isomorphism class of connected simple graphs on `n` nodes.
///
/// Classes are grown edge by edge from the empty graph and deduplicated by
/// [`Graph::canonical_code`]. Output is ordered by edge count, then code.
pub fn enumerate_connected_nonisomorphic(n: usize) -> Result<Vec<Graph>> {
    if !(1..=MAX_ENUM_NODES).contains(&n) {
        return Err(Error::Bounds(format!(
            "enumeration supports 1 <= n <= {MAX_ENUM_NODES}, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut level: BTreeSet<u64> = BTreeSet::from([0]);
    let max_edges = n * (n - 1) / 2;
    for _ in 0..=max_edges {
        let mut next = BTreeSet::new();
        for &code in &level {
            let adj = decode(n, code);
            if adjacency_connected(&adj) {
                let pairs = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| adj[i] >> j & 1 == 1);
                out.push(Graph::unweighted(n, pairs)?);
            }
            for i in 0..n {
                for j in i + 1..n {
                    if adj[i] >> j & 1 == 0 {
                        let mut grown = adj.clone();
                        grown[i] |= 1 << j;
                        grown[j] |= 1 << i;
                        next.insert(canonical_code(&grown));
                    }
                }
            }
        }
        level = next;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Random generators

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    ErdosRenyi { prob: f64 },
    Regular { degree: usize },
}

/// Edge-weight distribution for generated graphs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum WeightDist {
    #[default]
    None,
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
}

impl WeightDist {
    fn validate(&self) -> Result<()> {
        match *self {
            WeightDist::None => Ok(()),
            WeightDist::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
            WeightDist::Exponential { rate } if rate.is_finite() && rate > 0.0 => Ok(()),
            other => Err(Error::Parameter(format!("invalid weight distribution {other}"))),
        }
    }

    fn sample(&self, rng: &mut seed::Rng) -> f64 {
        match *self {
            WeightDist::None => 1.0,
            WeightDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            WeightDist::Exponential { rate } => Exp::new(rate).expect("validated rate").sample(rng),
        }
    }
}

impl fmt::Display for WeightDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightDist::None => write!(f, "none"),
            WeightDist::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            WeightDist::Exponential { rate } => write!(f, "exp:{rate}"),
        }
    }
}

impl FromStr for WeightDist {
    type Err = Error;

    /// Parses `none`, `uniform:LO,HI` or `exp:RATE`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("cannot parse weight distribution {s:?}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let dist = match s.split_once(':') {
            None if s == "none" => WeightDist::None,
            Some(("uniform", args)) => {
                let (lo, hi) = args.split_once(',').ok_or_else(bad)?;
                WeightDist::Uniform {
                    lo: num(lo)?,
                    hi: num(hi)?,
                }
            }
            Some(("exp", rate)) => WeightDist::Exponential { rate: num(rate)? },
            _ => return Err(bad()),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// Seeded random connected graph.
///
/// Topologies that come out disconnected (or, for the pairing model, that get
/// stuck on a self-loop or repeated pair) are redrawn, up to [`RETRY_BUDGET`]
/// attempts. Weights are drawn i.i.d. in edge order after the topology.
pub fn gen_random(kind: GraphKind, n: usize, weights: WeightDist, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    weights.validate()?;
    match kind {
        GraphKind::ErdosRenyi { prob } if !(prob > 0.0 && prob <= 1.0) => {
            return Err(Error::Parameter(format!("edge probability {prob} not in (0, 1]")));
        }
        GraphKind::Regular { degree } if degree >= n.max(2) || (n * degree) % 2 == 1 => {
            return Err(Error::Parameter(format!("no {degree}-regular graph on {n} nodes")));
        }
        _ => {}
    }
    let mut rng = seed::rng(seed);
    for _ in 0..RETRY_BUDGET {
        let pairs = match kind {
            GraphKind::ErdosRenyi { prob } => Some(erdos_renyi_pairs(n, prob, &mut rng)),
            GraphKind::Regular { degree } => regular_pairs(n, degree, &mut rng),
        };
        let Some(pairs) = pairs else { continue };
        let topo = Graph::unweighted(n, pairs)?;
        if !topo.is_connected() {
            continue;
        }
        let w: Vec<f64> = (0..topo.num_edges()).map(|_| weights.sample(&mut rng)).collect();
        return topo.with_weights(&w);
    }
    Err(Error::Generation(format!(
        "no connected {kind:?} graph on {n} nodes after {RETRY_BUDGET} attempts"
    )))
}

/// Same topology with i.i.d. weights from `weights`, drawn in edge order.
pub fn with_random_weights(g: &Graph, weights: WeightDist, seed: u64) -> Result<Graph> {
    weights.validate()?;
    let mut rng = seed::rng(seed);
    let w: Vec<f64> = (0..g.num_edges()).map(|_| weights.sample(&mut rng)).collect();
    g.with_weights(&w)
}

fn erdos_renyi_pairs(n: usize, prob: f64, rng: &mut seed::Rng) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < prob {
                pairs.push((u, v));
            }
        }
    }
    pairs
}

/// Pairing model: match random stubs, refusing self-loops and repeated pairs.
/// Returns `None` when the remaining stubs cannot be matched.
fn regular_pairs(n: usize, degree: usize, rng: &mut seed::Rng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(n * degree / 2);
    while !stubs.is_empty() {
        let mut matched = false;
        for _ in 0..100 {
            let i = rng.random_range(0..stubs.len());
            let j = rng.random_range(0..stubs.len());
            let (a, b) = (stubs[i], stubs[j]);
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                continue;
            }
            pairs.push(key);
            let (hi, lo) = (i.max(j), i.min(j));
            stubs.swap_remove(hi);
            stubs.swap_remove(lo);
            matched = true;
            break;
        }
        if !matched {
            return None;
        }
    }
    Some(pairs)
}

// ---------------------------------------------------------------------------
// Max-Cut and weight statistics

/// Exact Max-Cut over all `2^(n-1)` bipartitions (node `n-1` pinned to side 0).
///
/// Walks the bipartitions in Gray-code order so each step costs one node's
/// degree; the winning cut is re-summed from scratch.
pub fn max_cut_bruteforce(g: &Graph) -> Result<CutValue> {
    let n = g.n();
    if n > MAX_BRUTEFORCE_NODES {
        return Err(Error::Bounds(format!(
            "brute-force Max-Cut supports n <= {MAX_BRUTEFORCE_NODES}, got {n}"
        )));
    }
    if n == 1 {
        return Ok(CutValue::new(0.0));
    }
    let adj = g.adjacency();
    let mut side = 0u32;
    let mut cut = 0.0;
    let mut best = (0.0, 0u32);
    for k in 1u32..(1 << (n - 1)) {
        let v = k.trailing_zeros() as usize;
        let sv = side >> v & 1;
        for &(u, w) in &adj[v] {
            if side >> u & 1 == sv {
                cut += w;
            } else {
                cut -= w;
            }
        }
        side ^= 1 << v;
        if cut > best.0 {
            best = (cut, side);
        }
    }
    Ok(CutValue::new(cut_of(g, best.1)))
}

/// Weight crossing the bipartition encoded by bits of `mask` (bit i = side of node i).
pub fn cut_of(g: &Graph, mask: u32) -> f64 {
    g.edges()
        .iter()
        .filter(|&&(u, v, _)| (mask >> u ^ mask >> v) & 1 == 1)
        .map(|e| e.2)
        .sum()
}

/// Mean absolute edge weight.
pub fn mean_abs_weight(g: &Graph) -> Result<f64> {
    if g.num_edges() == 0 {
        return Err(Error::Domain("mean |w| of a graph without edges".into()));
    }
    Ok(g.edges().iter().map(|e| e.2.abs()).sum::<f64>() / g.num_edges() as f64)
}

/// Min-max rescaling of edge weights into `[0, 1]`.
///
/// When all weights are equal every weight becomes `1.0`, so uniform weights
/// behave like the unweighted problem.
pub fn normalize_edge_weights(g: &Graph) -> Result<Graph> {
    if g.num_edges() == 0 {
        return Err(Error::Domain(
            "cannot normalize weights of a graph without edges".into(),
        ));
    }
    let (lo, hi) = g
        .edges()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.2), hi.max(e.2))
        });
    let w: Vec<f64> = if hi == lo {
        vec![1.0; g.num_edges()]
    } else {
        g.edges().iter().map(|e| (e.2 - lo) / (hi - lo)).collect()
    };
    let mut out = g.with_weights(&w)?;
    out.id = g.id.clone();
    Ok(out)
}

// ---------------------------------------------------------------------------
// JSONL persistence

pub fn write_graphs(path: &Path, graphs: &[Graph]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for g in graphs {
        let line = serde_json::to_string(g).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_graphs(path: &Path) -> Result<Vec<Graph>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let g = serde_json::from_str(&line).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(g);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn triangle(w01: f64, w02: f64, w12: f64) -> Graph {
        Graph::new(3, [(0, 1, w01), (0, 2, w02), (1, 2, w12)]).unwrap()
    }

    #[test]
    fn new_canonicalizes_and_rejects_bad_edges() {
        let g = Graph::new(3, [(2, 1, 1.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 2.0), (1, 2, 1.0)]);
        assert!(Graph::new(3, [(1, 1, 1.0)]).is_err());
        assert!(Graph::new(3, [(0, 3, 1.0)]).is_err());
        assert!(Graph::new(3, [(0, 1, 1.0), (1, 0, 1.0)]).is_err());
        assert!(Graph::new(3, [(0, 1, f64::NAN)]).is_err());
        assert!(Graph::new(0, []).is_err());
    }

    #[test]
    fn json_shape_matches_line_format() {
        let g = triangle(1.0, 1.0, 1.0);
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.starts_with(&format!("{{\"id\":\"{}\",\"n\":3,\"edges\":[[0,1,1.0]", g.id())));
        let back: Graph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"id":"x","n":2,"edges":[[0,0,1.0]]}"#;
        assert!(serde_json::from_str::<Graph>(bad).is_err());
    }

    #[test]
    fn enumeration_small_cases() {
        assert_eq!(enumerate_connected_nonisomorphic(1).unwrap().len(), 1);
        assert_eq!(enumerate_connected_nonisomorphic(2).unwrap().len(), 1);
        let three = enumerate_connected_nonisomorphic(3).unwrap();
        assert_eq!(three.len(), 2);
        assert_eq!(three[0].num_edges(), 2);
        assert_eq!(three[1].num_edges(), 3);
        assert_eq!(enumerate_connected_nonisomorphic(4).unwrap().len(), 6);
        assert!(matches!(enumerate_connected_nonisomorphic(0), Err(Error::Bounds(_))));
        assert!(matches!(enumerate_connected_nonisomorphic(8), Err(Error::Bounds(_))));
    }

    #[test]
    fn generator_examples() {
        let tri = gen_random(GraphKind::Regular { degree: 2 }, 3, WeightDist::None, 7).unwrap();
        assert_eq!(tri.edges(), &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);

        let k4 = gen_random(GraphKind::ErdosRenyi { prob: 1.0 }, 4, WeightDist::None, 99).unwrap();
        assert_eq!(k4.num_edges(), 6);

        let w = WeightDist::Uniform { lo: 0.0, hi: 1.0 };
        let a = gen_random(GraphKind::ErdosRenyi { prob: 0.5 }, 10, w, 5).unwrap();
        let b = gen_random(GraphKind::ErdosRenyi { prob: 0.5 }, 10, w, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
        assert!(a.edges().iter().all(|e| (0.0..1.0).contains(&e.2)));
    }

    #[test]
    fn generator_errors() {
        let none = WeightDist::None;
        assert!(matches!(
            gen_random(GraphKind::Regular { degree: 3 }, 5, none, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            gen_random(GraphKind::Regular { degree: 4 }, 4, none, 0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            gen_random(GraphKind::ErdosRenyi { prob: 0.0 }, 4, none, 0),
            Err(Error::Parameter(_))
        ));
        // 0-regular on 3 nodes is never connected.
        assert!(matches!(
            gen_random(GraphKind::Regular { degree: 0 }, 4, none, 0),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn regular_generator_degrees() {
        for seed in 0..20 {
            let g = gen_random(GraphKind::Regular { degree: 3 }, 12, WeightDist::None, seed).unwrap();
            assert_eq!(g.regular_degree(), Some(3));
            assert!(g.is_connected());
        }
    }

    #[test]
    fn random_weights_keep_topology() {
        let base = Graph::unweighted(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let dist = WeightDist::Uniform { lo: 0.0, hi: 1.0 };
        let g = with_random_weights(&base, dist, 3).unwrap();
        assert_eq!(g, with_random_weights(&base, dist, 3).unwrap());
        assert_ne!(g.id(), base.id());
        for (a, b) in g.edges().iter().zip(base.edges()) {
            assert_eq!((a.0, a.1), (b.0, b.1));
            assert!((0.0..1.0).contains(&a.2));
        }
    }

    #[test]
    fn weight_dist_parsing() {
        assert_eq!("none".parse::<WeightDist>().unwrap(), WeightDist::None);
        assert_eq!(
            "uniform:0,1".parse::<WeightDist>().unwrap(),
            WeightDist::Uniform { lo: 0.0, hi: 1.0 }
        );
        assert_eq!(
            "exp:2".parse::<WeightDist>().unwrap(),
            WeightDist::Exponential { rate: 2.0 }
        );
        assert!("exp:-1".parse::<WeightDist>().is_err());
        assert!("gauss:1".parse::<WeightDist>().is_err());
        assert!("uniform:1".parse::<WeightDist>().is_err());
    }

    #[test]
    fn max_cut_examples() {
        let k4 = Graph::unweighted(4, (0..4).tuple_combinations()).unwrap();
        assert_eq!(max_cut_bruteforce(&k4).unwrap().value, 4.0);
        assert_eq!(max_cut_bruteforce(&triangle(3.0, 2.0, 1.0)).unwrap().value, 5.0);
        let path = Graph::unweighted(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(max_cut_bruteforce(&path).unwrap().value, 2.0);
        assert_eq!(max_cut_bruteforce(&Graph::new(1, []).unwrap()).unwrap().value, 0.0);
        let big = Graph::new(25, []).unwrap();
        assert!(matches!(max_cut_bruteforce(&big), Err(Error::Bounds(_))));
    }

    #[test]
    fn max_cut_ignores_negative_only_gains() {
        // A negative edge should be left uncut.
        let g = Graph::new(3, [(0, 1, -1.0), (1, 2, 2.0)]).unwrap();
        assert_eq!(max_cut_bruteforce(&g).unwrap().value, 2.0);
    }

    #[test]
    fn weight_statistics() {
        assert_eq!(mean_abs_weight(&triangle(1.0, 1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(mean_abs_weight(&triangle(3.0, 1.0, 2.0)).unwrap(), 2.0);
        let g = Graph::new(3, [(0, 1, -2.0), (1, 2, 2.0)]).unwrap();
        assert_eq!(mean_abs_weight(&g).unwrap(), 2.0);
        assert!(matches!(
            mean_abs_weight(&Graph::new(2, []).unwrap()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn edge_weight_normalization() {
        let g = triangle(-2.0, 0.0, 2.0);
        let w: Vec<f64> = normalize_edge_weights(&g)
            .unwrap()
            .edges()
            .iter()
            .map(|e| e.2)
            .collect();
        assert_eq!(w, vec![0.0, 0.5, 1.0]);

        let flat = triangle(5.0, 5.0, 5.0);
        let w: Vec<f64> = normalize_edge_weights(&flat)
            .unwrap()
            .edges()
            .iter()
            .map(|e| e.2)
            .collect();
        assert_eq!(w, vec![1.0; 3]);

        let two = Graph::new(3, [(0, 1, 1.0), (1, 2, 3.0)]).unwrap();
        let w: Vec<f64> = normalize_edge_weights(&two)
            .unwrap()
            .edges()
            .iter()
            .map(|e| e.2)
            .collect();
        assert_eq!(w, vec![0.0, 1.0]);
        assert_relative_eq!(normalize_edge_weights(&two).unwrap().total_weight(), 1.0);
    }

    #[test]
    fn canonical_code_is_label_independent() {
        let path = Graph::unweighted(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let relabeled = path.relabel(&[2, 0, 3, 1]).unwrap();
        assert_eq!(path.canonical_code().unwrap(), relabeled.canonical_code().unwrap());
        let star = Graph::unweighted(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_ne!(path.canonical_code().unwrap(), star.canonical_code().unwrap());
    }

    #[test]
    fn graph_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.jsonl");
        let gs = vec![triangle(1.0, 2.0, 3.0), Graph::new(1, []).unwrap()];
        write_graphs(&path, &gs).unwrap();
        assert_eq!(read_graphs(&path).unwrap(), gs);
    }
}
