//! 2-D histograms of `(gamma_j, beta_j)` pairs before and after canonicalization.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};

const GAMMA_SPAN: (f64, f64) = (-PI, PI);
const BETA_SPAN: (f64, f64) = (-FRAC_PI_2, FRAC_PI_2);

#[derive(Clone, Debug, PartialEq)]
pub struct AngleHistogram {
    pub p: usize,
    /// `"pre"` (raw optimizer output) or `"post"` (stored angles).
    pub stage: &'static str,
    pub bins: usize,
    /// `counts[i][k]`: gamma bin `i`, beta bin `k`. Values beyond the axes are
    /// counted in the edge bins.
    pub counts: Vec<Vec<usize>>,
    /// Number of `(gamma_j, beta_j)` pairs, i.e. `p` per record.
    pub pairs: usize,
    /// Pairs inside `[-pi/2, pi/2) x [-pi/4, pi/4)`.
    pub in_box: usize,
}

fn bin(x: f64, (lo, hi): (f64, f64), bins: usize) -> usize {
    let t = ((x - lo) / (hi - lo) * bins as f64).floor();
    t.clamp(0.0, (bins - 1) as f64) as usize
}

fn edge(i: usize, (lo, hi): (f64, f64), bins: usize) -> f64 {
    lo + (hi - lo) * i as f64 / bins as f64
}

impl AngleHistogram {
    fn build<'a>(
        p: usize,
        stage: &'static str,
        bins: usize,
        pairs: impl Iterator<Item = (&'a [f64], &'a [f64])>,
    ) -> Self {
        let mut h = AngleHistogram {
            p,
            stage,
            bins,
            counts: vec![vec![0; bins]; bins],
            pairs: 0,
            in_box: 0,
        };
        for (gamma, beta) in pairs {
            for (&g, &b) in gamma.iter().zip(beta) {
                h.counts[bin(g, GAMMA_SPAN, bins)][bin(b, BETA_SPAN, bins)] += 1;
                h.pairs += 1;
                if (-FRAC_PI_2..FRAC_PI_2).contains(&g) && (-FRAC_PI_4..FRAC_PI_4).contains(&b) {
                    h.in_box += 1;
                }
            }
        }
        h
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn to_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line {
            gamma_lo: f64,
            gamma_hi: f64,
            beta_lo: f64,
            beta_hi: f64,
            count: usize,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for i in 0..self.bins {
            for k in 0..self.bins {
                w.serialize(Line {
                    gamma_lo: edge(i, GAMMA_SPAN, self.bins),
                    gamma_hi: edge(i + 1, GAMMA_SPAN, self.bins),
                    beta_lo: edge(k, BETA_SPAN, self.bins),
                    beta_hi: edge(k + 1, BETA_SPAN, self.bins),
                    count: self.counts[i][k],
                })
                .map_err(|e| Error::Format(e.to_string()))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    /// Heat map with gamma on x, beta on y, and the target box outlined.
    pub fn to_svg(&self) -> String {
        let (size, pad) = (400.0, 40.0);
        let cell = size / self.bins as f64;
        let max = self.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
        let mut s = String::new();
        let total = size + 2.0 * pad;
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
        );
        let _ = writeln!(
            s,
            r#"<rect x="{pad}" y="{pad}" width="{size}" height="{size}" fill="white" stroke="black"/>"#
        );
        for i in 0..self.bins {
            for k in 0..self.bins {
                let c = self.counts[i][k];
                if c == 0 {
                    continue;
                }
                let x = pad + i as f64 * cell;
                let y = pad + size - (k + 1) as f64 * cell;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="navy" fill-opacity="{:.4}"/>"#,
                    c as f64 / max
                );
            }
        }
        // Target box: gamma in [-pi/2, pi/2) is the middle half of the x axis,
        // beta in [-pi/4, pi/4) the middle half of the y axis.
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="crimson" stroke-dasharray="4 3"/>"#,
            pad + size / 4.0,
            pad + size / 4.0,
            size / 2.0,
            size / 2.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">gamma in [-pi, pi)  (p={}, {})</text>"#,
            pad + size / 2.0,
            total - 12.0,
            self.p,
            self.stage
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">beta in [-pi/2, pi/2)</text>"#,
            pad + size / 2.0,
            pad + size / 2.0
        );
        s.push_str("</svg>\n");
        s
    }
}

/// Writes `hist_p{p}_{pre,post}.{csv,svg}` into `dir` for every depth present.
pub fn emit_param_histograms(records: &[DatasetRecord], bins: usize, dir: &Path) -> Result<Vec<AngleHistogram>> {
    if bins == 0 {
        return Err(Error::Parameter("histogram needs at least one bin".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let depths: BTreeSet<usize> = records.iter().map(|r| r.depth).collect();
    let mut out = Vec::new();
    for p in depths {
        let at_p: Vec<&DatasetRecord> = records.iter().filter(|r| r.depth == p).collect();
        let pre = AngleHistogram::build(p, "pre", bins, at_p.iter().map(|r| (&r.raw_gamma[..], &r.raw_beta[..])));
        let post = AngleHistogram::build(p, "post", bins, at_p.iter().map(|r| (&r.gamma[..], &r.beta[..])));
        for h in [pre, post] {
            let stem = dir.join(format!("hist_p{}_{}", h.p, h.stage));
            let csv_path = stem.with_extension("csv");
            std::fs::write(&csv_path, h.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
            let svg_path = stem.with_extension("svg");
            std::fs::write(&svg_path, h.to_svg()).map_err(|e| Error::io(&svg_path, e))?;
            out.push(h);
        }
    }
    Ok(out)
}
