//! Initialization schemes and the evaluation protocol.
//!
//! A [`Scheme`] turns a graph and a depth into starting angles. The protocol
//! measures the approximation ratio of those angles as-is, and how quickly a
//! fixed Adam budget converges from them.

mod histogram;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::gnn::GnnModel;
use crate::graph::{max_cut_bruteforce, mean_abs_weight, Graph};
use crate::qaoa::{linear_ramp_init, AdamSettings, Instance, ParamVector};
use crate::seed;

pub use histogram::{emit_param_histograms, AngleHistogram};
pub use report::{
    aggregate, median_stability, write_aggregates_csv, write_convergence_csv, write_initial_ar_csv,
    write_stability_csv, Aggregate, StabilityRow,
};

/// Relative distance to the final AR at which a run counts as stable.
pub const STABILITY_TOL: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Random,
    Transfer,
    Labeled,
    PlainGnn,
    Qseer,
    LinearRamp,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Random => "random",
            SchemeKind::Transfer => "transfer",
            SchemeKind::Labeled => "labeled",
            SchemeKind::PlainGnn => "plain_gnn",
            SchemeKind::Qseer => "qseer",
            SchemeKind::LinearRamp => "linear_ramp",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random" => SchemeKind::Random,
            "transfer" => SchemeKind::Transfer,
            "labeled" => SchemeKind::Labeled,
            "gnn" | "plain_gnn" => SchemeKind::PlainGnn,
            "qseer" => SchemeKind::Qseer,
            "linear_ramp" | "ramp" => SchemeKind::LinearRamp,
            _ => return Err(Error::Parameter(format!("unknown scheme {s:?}"))),
        })
    }
}

/// How training records are grouped for the transfer medians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferKey {
    /// All records of the same depth.
    #[default]
    Depth,
    /// Regular graphs use the medians of regular training graphs of the same
    /// degree when available; everything else falls back to [`TransferKey::Depth`].
    Degree,
}

impl FromStr for TransferKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(TransferKey::Depth),
            "degree" => Ok(TransferKey::Degree),
            _ => Err(Error::Parameter(format!("unknown transfer key {s:?}"))),
        }
    }
}

/// Per-index medians of stored training angles.
///
/// Training `gamma` values are multiplied by the mean absolute edge weight of
/// their graph before taking medians, and divided by that of the target graph
/// on use, so angles transfer between weight scales.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferTable {
    pub key: TransferKey,
    pub by_depth: BTreeMap<usize, ParamVector>,
    pub by_degree: BTreeMap<(usize, usize), ParamVector>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

fn medians<'a>(items: impl Iterator<Item = (&'a DatasetRecord, f64)>, p: usize) -> Option<ParamVector> {
    let mut cols = vec![Vec::new(); 2 * p];
    for (r, scale) in items {
        for j in 0..p {
            cols[j].push(r.gamma[j] * scale);
            cols[p + j].push(r.beta[j]);
        }
    }
    let flat: Option<Vec<f64>> = cols.iter_mut().map(|c| median(c)).collect();
    Some(ParamVector::from_flat(&flat?).expect("even length"))
}

impl TransferTable {
    pub fn build(records: &[DatasetRecord], key: TransferKey) -> Result<Self> {
        let mut scaled = Vec::with_capacity(records.len());
        for r in records {
            scaled.push((r, mean_abs_weight(&r.graph)?));
        }
        let depths: BTreeSet<usize> = records.iter().map(|r| r.depth).collect();
        let mut by_depth = BTreeMap::new();
        let mut by_degree = BTreeMap::new();
        for p in depths {
            let at_p = || scaled.iter().filter(move |(r, _)| r.depth == p).map(|&(r, s)| (r, s));
            if let Some(m) = medians(at_p(), p) {
                by_depth.insert(p, m);
            }
            if key == TransferKey::Degree {
                let degrees: BTreeSet<usize> = at_p().filter_map(|(r, _)| r.graph.regular_degree()).collect();
                for d in degrees {
                    let group = at_p().filter(|(r, _)| r.graph.regular_degree() == Some(d));
                    if let Some(m) = medians(group, p) {
                        by_degree.insert((p, d), m);
                    }
                }
            }
        }
        Ok(TransferTable {
            key,
            by_depth,
            by_degree,
        })
    }

    pub fn params(&self, g: &Graph, p: usize) -> Result<ParamVector> {
        let keyed = match (self.key, g.regular_degree()) {
            (TransferKey::Degree, Some(d)) => self.by_degree.get(&(p, d)),
            _ => None,
        };
        let base = keyed
            .or_else(|| self.by_depth.get(&p))
            .ok_or_else(|| Error::Unavailable(format!("no transfer angles for depth {p}")))?;
        let scale = mean_abs_weight(g)?;
        Ok(ParamVector {
            gamma: base.gamma.iter().map(|x| x / scale).collect(),
            beta: base.beta.clone(),
        })
    }
}

/// A configured initialization scheme.
#[derive(Clone, Debug)]
pub enum Scheme {
    /// `gamma ~ U[-pi, pi)`, `beta ~ U[-pi/2, pi/2)`, seeded per graph and depth.
    Random {
        seed: u64,
    },
    Transfer(TransferTable),
    /// Raw optimizer output stored for `(graph_id, depth)`.
    Labeled(BTreeMap<(String, usize), ParamVector>),
    /// One raw-label model per depth.
    PlainGnn(BTreeMap<usize, GnnModel>),
    Qseer(GnnModel),
    LinearRamp {
        dt: f64,
    },
}

impl Scheme {
    pub fn labeled(records: &[DatasetRecord]) -> Self {
        Scheme::Labeled(
            records
                .iter()
                .map(|r| ((r.graph_id.clone(), r.depth), r.raw_params()))
                .collect(),
        )
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Scheme::Random { .. } => SchemeKind::Random,
            Scheme::Transfer(_) => SchemeKind::Transfer,
            Scheme::Labeled(_) => SchemeKind::Labeled,
            Scheme::PlainGnn(_) => SchemeKind::PlainGnn,
            Scheme::Qseer(_) => SchemeKind::Qseer,
            Scheme::LinearRamp { .. } => SchemeKind::LinearRamp,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }
}

pub fn init_params(scheme: &Scheme, g: &Graph, p: usize) -> Result<ParamVector> {
    if p == 0 {
        return Err(Error::Parameter("depth must be at least 1".into()));
    }
    match scheme {
        Scheme::Random { seed } => {
            let s = seed::derive_str(*seed, &format!("{}/p{p}", g.id()));
            Ok(ParamVector::random(p, &mut seed::rng(s)))
        }
        Scheme::Transfer(t) => t.params(g, p),
        Scheme::Labeled(table) => table
            .get(&(g.id().to_string(), p))
            .cloned()
            .ok_or_else(|| Error::Unavailable(format!("no stored angles for {} at depth {p}", g.id()))),
        Scheme::PlainGnn(models) => models
            .get(&p)
            .ok_or_else(|| Error::Unavailable(format!("no plain model for depth {p}")))?
            .predict(g, p),
        Scheme::Qseer(model) => model.predict(g, p),
        Scheme::LinearRamp { dt } => linear_ramp_init(p, *dt),
    }
}

/// Initial AR of one scheme on one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialAr {
    pub scheme: String,
    pub graph_id: String,
    pub p: usize,
    pub ar: f64,
}

fn sorted_by_key<T>(mut rows: Vec<T>, key: impl Fn(&T) -> (String, usize)) -> Vec<T> {
    rows.sort_by_key(|r| key(r));
    rows
}

/// AR of the scheme's angles without any optimization, sorted by
/// `(graph_id, p)`.
pub fn eval_initial_ar(scheme: &Scheme, records: &[DatasetRecord]) -> Result<Vec<InitialAr>> {
    let rows = records
        .par_iter()
        .map(|r| {
            let x = init_params(scheme, &r.graph, r.depth)?;
            let f = Instance::new(&r.graph)?.expectation(&x);
            Ok(InitialAr {
                scheme: scheme.name().into(),
                graph_id: r.graph_id.clone(),
                p: r.depth,
                ar: f / r.cmax,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sorted_by_key(rows, |r| (r.graph_id.clone(), r.p)))
}

/// First iteration whose AR is within `STABILITY_TOL` (relative) of the last.
pub fn iterations_to_stability(ar_trace: &[f64]) -> usize {
    let Some(&last) = ar_trace.last() else {
        return 0;
    };
    ar_trace
        .iter()
        .position(|&a| (a - last).abs() <= STABILITY_TOL * last.abs())
        .unwrap_or(ar_trace.len() - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub scheme: String,
    pub graph_id: String,
    pub p: usize,
    /// `F` at iterations `0..=iters`.
    pub cost: Vec<f64>,
    pub ar: Vec<f64>,
    pub stable_at: usize,
}

/// Adam from the scheme's angles, sorted by `(graph_id, p)`.
pub fn eval_convergence(
    scheme: &Scheme,
    records: &[DatasetRecord],
    settings: AdamSettings,
) -> Result<Vec<ConvergenceRun>> {
    let rows = records
        .par_iter()
        .map(|r| {
            let x = init_params(scheme, &r.graph, r.depth)?;
            let res = Instance::new(&r.graph)?.adam(&x, settings);
            let cost: Vec<f64> = res.trace.iter().map(|&(_, f)| f).collect();
            let ar: Vec<f64> = cost.iter().map(|f| f / r.cmax).collect();
            Ok(ConvergenceRun {
                scheme: scheme.name().into(),
                graph_id: r.graph_id.clone(),
                p: r.depth,
                stable_at: iterations_to_stability(&ar),
                cost,
                ar,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sorted_by_key(rows, |r| (r.graph_id.clone(), r.p)))
}

/// Initial-AR aggregates per scheme and depth on graphs without labels.
pub fn depth_sweep(schemes: &[Scheme], graphs: &[Graph], depths: &[usize]) -> Result<Vec<Aggregate>> {
    if graphs.is_empty() {
        return Err(Error::Parameter("depth sweep needs at least one graph".into()));
    }
    let cmax: Vec<f64> = graphs
        .par_iter()
        .map(|g| max_cut_bruteforce(g).map(|c| c.value))
        .collect::<Result<_>>()?;
    if let Some(i) = cmax.iter().position(|&c| c <= 0.0) {
        return Err(Error::Domain(format!("graph {} has no positive cut", graphs[i].id())));
    }
    let mut rows = Vec::new();
    for scheme in schemes {
        for &p in depths {
            let ars = graphs
                .par_iter()
                .zip(&cmax)
                .map(|(g, &c)| {
                    let x = init_params(scheme, g, p)?;
                    Ok(InitialAr {
                        scheme: scheme.name().into(),
                        graph_id: g.id().into(),
                        p,
                        ar: Instance::new(g)?.expectation(&x) / c,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.extend(ars);
        }
    }
    Ok(aggregate(&rows))
}
