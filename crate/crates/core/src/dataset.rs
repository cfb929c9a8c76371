//! Labelled optimal-angle datasets.
//!
//! One [`DatasetRecord`] per `(graph, depth)`, stored as JSON lines. Records
//! keep the raw optimizer output next to the (possibly canonicalized) angles
//! so that baselines which want unnormalized labels can still read them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{max_cut_bruteforce, Graph};
use crate::normalize::{canonicalize, RangeReport};
use crate::qaoa::{interp_init, multistart_optimize, AdamSettings, Instance, OptimizationResult, ParamVector};
use crate::seed;

pub const SCHEMA_VERSION: u32 = 1;
/// Deepest circuit the model head can address.
pub const P_MAX: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
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

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Parameter(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub schema_version: u32,
    pub graph_id: String,
    pub graph: Graph,
    pub depth: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub cost: f64,
    pub cmax: f64,
    pub ar: f64,
    pub normalized: bool,
    pub split: Option<Split>,
    /// Angles as returned by the optimizer, before canonicalization.
    pub raw_gamma: Vec<f64>,
    pub raw_beta: Vec<f64>,
}

impl DatasetRecord {
    pub fn params(&self) -> ParamVector {
        ParamVector {
            gamma: self.gamma.clone(),
            beta: self.beta.clone(),
        }
    }

    pub fn raw_params(&self) -> ParamVector {
        ParamVector {
            gamma: self.raw_gamma.clone(),
            beta: self.raw_beta.clone(),
        }
    }
}

/// Seed used to label `(graph, depth)`.
pub fn record_seed(seed: u64, graph_id: &str, depth: usize) -> u64 {
    seed::derive_str(seed, &format!("{graph_id}/p{depth}"))
}

/// Labels every graph at every depth with [`multistart_optimize`].
///
/// Graphs without edges have no cut to approximate and are skipped. Output
/// order is graph order, then depth order.
pub fn build(
    graphs: &[Graph],
    depths: &[usize],
    starts_per_depth: &BTreeMap<usize, usize>,
    seed: u64,
    settings: AdamSettings,
) -> Result<Vec<DatasetRecord>> {
    build_with_warm_start(graphs, depths, starts_per_depth, seed, settings, None)
}

/// [`build`], plus one extra start per depth `p > 1` interpolated from the
/// same graph's canonical depth-`(p-1)` label.
///
/// The warm run wins whenever its `F` is within `tol * cmax` of the best
/// random start. Optima reached this way continue the shallower schedule, so
/// labels of one graph across depths sit on the same branch and the learned
/// map stays smooth; the price is at most `tol` in approximation ratio.
pub fn build_with_warm_start(
    graphs: &[Graph],
    depths: &[usize],
    starts_per_depth: &BTreeMap<usize, usize>,
    seed: u64,
    settings: AdamSettings,
    tol: Option<f64>,
) -> Result<Vec<DatasetRecord>> {
    for &p in depths {
        if p == 0 || p > P_MAX {
            return Err(Error::Parameter(format!("depth {p} outside 1..={P_MAX}")));
        }
        if !starts_per_depth.contains_key(&p) {
            return Err(Error::Parameter(format!("no start count for depth {p}")));
        }
    }
    if let Some(t) = tol {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Parameter(format!(
                "warm-start tolerance {t} must be finite and >= 0"
            )));
        }
    }
    let mut ascending: Vec<usize> = depths.to_vec();
    ascending.sort_unstable();
    ascending.dedup();
    let per_graph: Vec<Vec<DatasetRecord>> = graphs
        .par_iter()
        .filter(|g| g.num_edges() > 0)
        .map(|g| {
            let cmax = max_cut_bruteforce(g)?.value;
            if cmax <= 0.0 {
                return Err(Error::Domain(format!("graph {} has no positive cut", g.id())));
            }
            let mut labels: BTreeMap<usize, OptimizationResult> = BTreeMap::new();
            for &p in &ascending {
                let s = record_seed(seed, g.id(), p);
                let mut r = multistart_optimize(g, p, starts_per_depth[&p], s, settings)?;
                if let (Some(t), Some(prev)) = (tol, labels.get(&(p - 1))) {
                    let c = canonicalize(g, &prev.params)?;
                    let from = if c.verified { c.params } else { prev.params.clone() };
                    let warm = Instance::new(g)?.adam(&interp_init(&from), settings);
                    if warm.cost >= r.cost - t * cmax {
                        r = warm;
                    }
                }
                labels.insert(p, r);
            }
            Ok(depths.iter().map(|p| record(g, *p, &labels[p], cmax)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_graph.into_iter().flatten().collect())
}

fn record(g: &Graph, p: usize, r: &OptimizationResult, cmax: f64) -> DatasetRecord {
    DatasetRecord {
        schema_version: SCHEMA_VERSION,
        graph_id: g.id().to_string(),
        graph: g.clone(),
        depth: p,
        gamma: r.params.gamma.clone(),
        beta: r.params.beta.clone(),
        cost: r.cost,
        cmax,
        ar: r.cost / cmax,
        normalized: false,
        split: None,
        raw_gamma: r.params.gamma.clone(),
        raw_beta: r.params.beta.clone(),
    }
}

/// Replaces each record's angles by their canonical representative.
///
/// Canonicalization always starts from the raw angles, so applying this twice
/// is the same as applying it once. Records whose representative could not be
/// verified keep their raw angles and `normalized = false`.
pub fn normalize_all(records: &[DatasetRecord]) -> Result<(Vec<DatasetRecord>, RangeReport)> {
    let out: Vec<DatasetRecord> = records
        .par_iter()
        .map(|r| {
            let c = canonicalize(&r.graph, &r.raw_params())?;
            let mut r = r.clone();
            let chosen = if c.verified { c.params } else { r.raw_params() };
            r.gamma = chosen.gamma;
            r.beta = chosen.beta;
            r.normalized = c.verified;
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let report = range_report(&out);
    Ok((out, report))
}

/// Range compliance of the stored angles.
pub fn range_report(records: &[DatasetRecord]) -> RangeReport {
    let params: Vec<(ParamVector, bool)> = records.iter().map(|r| (r.params(), r.normalized)).collect();
    RangeReport::from_params(params.iter().map(|(p, ok)| (p, *ok)))
}

/// Train/validation/test fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratios: [f64; 3], seed: u64) -> Result<Self> {
        if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "split ratios {ratios:?} must be >= 0 and sum to 1"
            )));
        }
        Ok(SplitSpec { ratios, seed })
    }

    /// Graph counts per split by largest remainder.
    pub fn counts(&self, graphs: usize) -> [usize; 3] {
        let exact: Vec<f64> = self.ratios.iter().map(|r| r * graphs as f64).collect();
        let mut counts = [0usize; 3];
        for i in 0..3 {
            counts[i] = exact[i].floor() as usize;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut left = graphs - counts.iter().sum::<usize>();
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}

/// Assigns splits per graph, so all depths of a graph land together.
pub fn split(records: &[DatasetRecord], spec: &SplitSpec) -> Result<Vec<DatasetRecord>> {
    let spec = SplitSpec::new(spec.ratios, spec.seed)?;
    let mut ids: Vec<&str> = records
        .iter()
        .map(|r| r.graph_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    ids.shuffle(&mut seed::rng(spec.seed));
    let [train, val, _] = spec.counts(ids.len());
    let assign: BTreeMap<&str, Split> = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let s = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            (id, s)
        })
        .collect();
    Ok(records
        .iter()
        .map(|r| DatasetRecord {
            split: Some(assign[r.graph_id.as_str()]),
            ..r.clone()
        })
        .collect())
}

pub fn write_records(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: serde_json::Error| Error::Format(format!("{}:{}: {e}", path.display(), i + 1));
        let value: serde_json::Value = serde_json::from_str(&line).map_err(at)?;
        let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != SCHEMA_VERSION {
            return Err(Error::Version {
                found,
                supported: SCHEMA_VERSION,
            });
        }
        out.push(serde_json::from_value(value).map_err(at)?);
    }
    Ok(out)
}

pub fn with_split(records: &[DatasetRecord], which: Split) -> Vec<DatasetRecord> {
    records.iter().filter(|r| r.split == Some(which)).cloned().collect()
}
