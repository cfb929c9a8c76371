use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConvergenceRun, InitialAr};
use crate::error::{Error, Result};

/// Min/mean/max initial AR of one scheme at one depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scheme: String,
    pub p: usize,
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// Groups by `(scheme, p)` in sorted order.
pub fn aggregate(rows: &[InitialAr]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.scheme, r.p)).or_default().push(r.ar);
    }
    groups
        .into_iter()
        .map(|((scheme, p), ars)| Aggregate {
            scheme: scheme.into(),
            p,
            count: ars.len(),
            min: ars.iter().cloned().fold(f64::INFINITY, f64::min),
            mean: ars.iter().sum::<f64>() / ars.len() as f64,
            max: ars.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub scheme: String,
    pub p: usize,
    pub runs: usize,
    pub median_iterations: f64,
}

/// Median iterations-to-stability per `(scheme, p)`.
pub fn median_stability(runs: &[ConvergenceRun]) -> Vec<StabilityRow> {
    let mut groups: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for r in runs {
        groups.entry((&r.scheme, r.p)).or_default().push(r.stable_at as f64);
    }
    groups
        .into_iter()
        .map(|((scheme, p), mut its)| StabilityRow {
            scheme: scheme.into(),
            p,
            runs: its.len(),
            median_iterations: super::median(&mut its).expect("non-empty group"),
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked io kind"),
        }
    } else {
        Error::Format(format!("{}: {e}", path.display()))
    }
}

/// `scheme,graph_id,p,ar`
pub fn write_initial_ar_csv(path: &Path, rows: &[InitialAr]) -> Result<()> {
    write_rows(path, rows)
}

#[derive(Serialize)]
struct ConvergenceLine<'a> {
    scheme: &'a str,
    graph_id: &'a str,
    p: usize,
    iter: usize,
    f: f64,
    ar: f64,
}

/// `scheme,graph_id,p,iter,f,ar`, one line per iteration.
pub fn write_convergence_csv(path: &Path, runs: &[ConvergenceRun]) -> Result<()> {
    write_rows(
        path,
        runs.iter().flat_map(|r| {
            r.cost
                .iter()
                .zip(&r.ar)
                .enumerate()
                .map(move |(iter, (&f, &ar))| ConvergenceLine {
                    scheme: &r.scheme,
                    graph_id: &r.graph_id,
                    p: r.p,
                    iter,
                    f,
                    ar,
                })
        }),
    )
}

pub fn write_aggregates_csv(path: &Path, rows: &[Aggregate]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_stability_csv(path: &Path, rows: &[StabilityRow]) -> Result<()> {
    write_rows(path, rows)
}
