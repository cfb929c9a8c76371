//! Canonical representatives of optimal QAOA angles.
//!
//! Several angle vectors produce the same expectation value:
//!
//! * `beta` has period `pi/2` on any graph (`exp(-i pi/2 H_x)` is `X^n` up to
//!   phase and commutes with everything);
//! * `(gamma, beta) -> (-gamma, -beta)` (time reversal) on any graph;
//! * on unit-weight graphs `gamma` has period `2pi`;
//! * when every degree is even, `exp(-i pi H_z) = 1`, so `gamma_j` has period `pi`;
//! * when every degree is odd, `exp(-i pi H_z) = Z^n`, so shifting `gamma_j`
//!   by `pi` is undone by flipping the sign of `beta_k` for all `k >= j`.
//!
//! [`canonicalize`] enumerates the images reachable by these rules, keeps
//! only those the simulator confirms are loss-equivalent, and picks the one
//! inside the target box `[-pi/2, pi/2)^p x [-pi/4, pi/4)^p` whose angles
//! follow the annealing trend most closely (gamma rising, beta falling).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::qaoa::{Instance, ParamVector};
use crate::seed;

/// Absolute tolerance on `F` for a transform to count as loss-preserving.
pub const VERIFY_TOL: f64 = 1e-9;
/// Upper bound on `pi`-shift patterns examined per vector.
pub const CANDIDATE_CAP: usize = 4096;
const DEFAULT_SEED: u64 = 0x5eed;
const PENALTY_TOL: f64 = 1e-12;

/// Which rules produced the selected representative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldFlags {
    pub beta_folded: bool,
    pub gamma_wrapped: bool,
    pub gamma_pi_shifted: bool,
    pub time_reversed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    pub params: ParamVector,
    pub folded: FoldFlags,
    /// The selected vector reproduces the original `F` within [`VERIFY_TOL`].
    pub verified: bool,
    pub residual: f64,
    /// `params` lies in `[-pi/2, pi/2)^p x [-pi/4, pi/4)^p`.
    pub in_range: bool,
}

/// Wraps `x` into `[-period/2, period/2)`.
pub fn wrap(x: f64, period: f64) -> f64 {
    let half = period / 2.0;
    let mut r = x - period * ((x + half) / period).floor();
    if r >= half {
        r -= period;
    }
    if r < -half {
        r += period;
    }
    r
}

pub fn fold_beta(params: &ParamVector) -> ParamVector {
    ParamVector {
        gamma: params.gamma.clone(),
        beta: params.beta.iter().map(|&b| wrap(b, FRAC_PI_2)).collect(),
    }
}

pub fn time_reversal(params: &ParamVector) -> ParamVector {
    ParamVector {
        gamma: params.gamma.iter().map(|g| -g).collect(),
        beta: params.beta.iter().map(|b| -b).collect(),
    }
}

/// Total violation of the annealing trend:
/// `sum_j max(0, gamma_j - gamma_{j+1}) + sum_j max(0, beta_{j+1} - beta_j)`.
pub fn nonmonotonicity(params: &ParamVector) -> f64 {
    let rises: f64 = params.gamma.windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum();
    let falls: f64 = params.beta.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum();
    rises + falls
}

pub fn in_target_range(params: &ParamVector) -> bool {
    params.gamma.iter().all(|g| (-FRAC_PI_2..FRAC_PI_2).contains(g))
        && params.beta.iter().all(|b| (-FRAC_PI_4..FRAC_PI_4).contains(b))
}

/// Effect of `exp(-i pi H_z)` on a unit-weight graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PiShift {
    /// Mixed degree parities: no exact rule.
    None,
    /// All degrees even: identity.
    Identity,
    /// All degrees odd: `Z^n`.
    ParityFlip,
}

fn pi_shift_rule(g: &Graph) -> PiShift {
    let deg = g.degrees();
    if deg.iter().all(|d| d % 2 == 0) {
        PiShift::Identity
    } else if deg.iter().all(|d| d % 2 == 1) {
        PiShift::ParityFlip
    } else {
        PiShift::None
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    params: ParamVector,
    flags: FoldFlags,
}

/// Images under `2pi` wrapping and the `pi`-shift rule (no verification).
fn gamma_images(g: &Graph, params: &ParamVector, seed: u64) -> Vec<Candidate> {
    let p = params.p();
    let wrapped: Vec<f64> = params.gamma.iter().map(|&x| wrap(x, TAU)).collect();
    let gamma_wrapped = wrapped != params.gamma;
    let rule = pi_shift_rule(g);
    let masks: Vec<u64> = match rule {
        PiShift::None => vec![0],
        _ if p < 63 && (1u64 << p) as usize <= CANDIDATE_CAP => (0..1u64 << p).collect(),
        _ => {
            // Too many patterns: keep the identity plus a seeded sample.
            let mut rng = seed::rng(seed);
            let span = if p < 63 { 1usize << p } else { usize::MAX };
            let mut m: Vec<u64> = sample(&mut rng, span, CANDIDATE_CAP - 1)
                .into_iter()
                .map(|i| i as u64)
                .filter(|&i| i != 0)
                .collect();
            m.insert(0, 0);
            m
        }
    };
    masks
        .into_iter()
        .map(|mask| {
            let mut gamma = wrapped.clone();
            let mut beta = params.beta.clone();
            let mut flips = false;
            for j in 0..p {
                if mask >> j & 1 == 1 {
                    gamma[j] = wrap(gamma[j] + PI, TAU);
                    if rule == PiShift::ParityFlip {
                        flips = !flips;
                    }
                }
                if flips {
                    beta[j] = -beta[j];
                }
            }
            Candidate {
                params: ParamVector { gamma, beta },
                flags: FoldFlags {
                    gamma_wrapped,
                    gamma_pi_shifted: mask != 0,
                    ..FoldFlags::default()
                },
            }
        })
        .collect()
}

fn dedup(cands: &mut Vec<Candidate>) {
    let mut seen = std::collections::HashSet::new();
    cands.retain(|c| seen.insert(c.params.to_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>()));
}

/// Loss-equivalent `gamma` images on a unit-weight graph.
///
/// Always includes the `2pi`-wrapped input. When all degrees share a parity,
/// adds every pattern of `pi` shifts (with the matching `beta` sign flips in
/// the odd case). Candidates whose `F` differs from the input's by more than
/// [`VERIFY_TOL`] are dropped.
pub fn fold_gamma_unweighted(g: &Graph, params: &ParamVector) -> Result<Vec<ParamVector>> {
    if !g.is_unweighted() {
        return Err(Error::Precondition("gamma folding requires unit edge weights".into()));
    }
    let inst = Instance::new(g)?;
    let f0 = inst.expectation(params);
    let mut cands = gamma_images(g, params, DEFAULT_SEED);
    dedup(&mut cands);
    Ok(cands
        .into_iter()
        .filter(|c| (inst.expectation(&c.params) - f0).abs() <= VERIFY_TOL)
        .map(|c| c.params)
        .collect())
}

fn selection_order(a: &Candidate, b: &Candidate) -> Ordering {
    let (pa, pb) = (nonmonotonicity(&a.params), nonmonotonicity(&b.params));
    if (pa - pb).abs() > PENALTY_TOL {
        return pa.total_cmp(&pb);
    }
    let nonneg = |c: &Candidate| c.params.gamma.iter().sum::<f64>() >= 0.0;
    nonneg(b).cmp(&nonneg(a)).then_with(|| {
        let fa = a.params.to_flat();
        let fb = b.params.to_flat();
        fa.iter()
            .zip(&fb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Canonical representative of `params` on `g`.
///
/// Candidates are the `gamma` images (unit-weight graphs only), each with
/// `beta` folded into `[-pi/4, pi/4)`, plus their time reversals. Only
/// simulator-verified candidates are eligible. Among them, those inside the
/// target box are preferred; the winner minimizes [`nonmonotonicity`], then
/// prefers `sum(gamma) >= 0`, then the lexicographically smallest vector.
/// If nothing verifies, the input is returned with `verified = false`.
pub fn canonicalize(g: &Graph, params: &ParamVector) -> Result<NormalizedParams> {
    canonicalize_seeded(g, params, DEFAULT_SEED)
}

pub fn canonicalize_seeded(g: &Graph, params: &ParamVector, seed: u64) -> Result<NormalizedParams> {
    let inst = Instance::new(g)?;
    canonicalize_with(&inst, g, params, seed)
}

pub(crate) fn canonicalize_with(
    inst: &Instance,
    g: &Graph,
    params: &ParamVector,
    seed: u64,
) -> Result<NormalizedParams> {
    let unweighted = g.is_unweighted();
    let f0 = inst.expectation(params);
    let base = if unweighted {
        gamma_images(g, params, seed)
    } else {
        vec![Candidate {
            params: params.clone(),
            flags: FoldFlags::default(),
        }]
    };

    let mut cands = Vec::with_capacity(base.len() * 2);
    for c in base {
        let folded = fold_beta(&c.params);
        let flags = FoldFlags {
            beta_folded: folded.beta != c.params.beta,
            ..c.flags
        };
        let mut rev = fold_beta(&time_reversal(&folded));
        if unweighted {
            rev.gamma.iter_mut().for_each(|x| *x = wrap(*x, TAU));
        }
        cands.push(Candidate { params: folded, flags });
        cands.push(Candidate {
            params: rev,
            flags: FoldFlags {
                time_reversed: true,
                ..flags
            },
        });
    }
    dedup(&mut cands);

    let mut verified: Vec<(Candidate, f64)> = Vec::new();
    let mut best_residual = f64::INFINITY;
    for c in cands {
        let r = (inst.expectation(&c.params) - f0).abs();
        best_residual = best_residual.min(r);
        if r <= VERIFY_TOL {
            verified.push((c, r));
        }
    }
    if verified.is_empty() {
        return Ok(NormalizedParams {
            in_range: in_target_range(params),
            params: params.clone(),
            folded: FoldFlags::default(),
            verified: false,
            residual: best_residual,
        });
    }
    let any_in_range = verified.iter().any(|(c, _)| in_target_range(&c.params));
    let (chosen, residual) = verified
        .into_iter()
        .filter(|(c, _)| !any_in_range || in_target_range(&c.params))
        .min_by(|(a, _), (b, _)| selection_order(a, b))
        .expect("non-empty");
    Ok(NormalizedParams {
        in_range: in_target_range(&chosen.params),
        params: chosen.params,
        folded: chosen.flags,
        verified: true,
        residual,
    })
}

// ---------------------------------------------------------------------------
// Corpus-level compliance report

/// Width of the `|angle|` histogram bins.
pub const REPORT_BIN_WIDTH: f64 = PI / 8.0;
/// `|gamma|` bins cover `[0, pi)` plus one overflow bin.
pub const GAMMA_BINS: usize = 9;
/// `|beta|` bins cover `[0, pi/2)` plus one overflow bin.
pub const BETA_BINS: usize = 5;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DepthCompliance {
    pub records: usize,
    pub verified: usize,
    pub unverified: usize,
    /// Records whose stored angles lie in the target box.
    pub in_range: usize,
    /// Histogram of `|gamma_j|` over all layers, bins of width `pi/8`.
    pub gamma_abs_hist: Vec<usize>,
    pub beta_abs_hist: Vec<usize>,
}

/// Range compliance per depth.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub total: usize,
    pub verified: usize,
    pub unverified: usize,
    pub in_range: usize,
    pub by_depth: BTreeMap<usize, DepthCompliance>,
}

impl RangeReport {
    /// Tallies `(params, verified)` pairs.
    pub fn from_params<'a>(items: impl IntoIterator<Item = (&'a ParamVector, bool)>) -> Self {
        let bin = |x: f64, bins: usize| ((x.abs() / REPORT_BIN_WIDTH) as usize).min(bins - 1);
        let mut rep = RangeReport::default();
        for (params, ok) in items {
            let d = rep.by_depth.entry(params.p()).or_insert_with(|| DepthCompliance {
                gamma_abs_hist: vec![0; GAMMA_BINS],
                beta_abs_hist: vec![0; BETA_BINS],
                ..DepthCompliance::default()
            });
            d.records += 1;
            if ok {
                d.verified += 1;
            } else {
                d.unverified += 1;
            }
            if in_target_range(params) {
                d.in_range += 1;
            }
            for &g in &params.gamma {
                d.gamma_abs_hist[bin(g, GAMMA_BINS)] += 1;
            }
            for &b in &params.beta {
                d.beta_abs_hist[bin(b, BETA_BINS)] += 1;
            }
        }
        for d in rep.by_depth.values() {
            rep.total += d.records;
            rep.verified += d.verified;
            rep.unverified += d.unverified;
            rep.in_range += d.in_range;
        }
        rep
    }

    pub fn in_range_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.in_range as f64 / self.total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qaoa::expectation;
    use approx::assert_abs_diff_eq;

    fn pv(g: &[f64], b: &[f64]) -> ParamVector {
        ParamVector::new(g.to_vec(), b.to_vec()).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        Graph::unweighted(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    fn weighted() -> Graph {
        Graph::new(4, [(0, 1, 0.3), (1, 2, 1.7), (2, 3, 0.9), (0, 2, 2.2)]).unwrap()
    }

    #[test]
    fn wrap_lands_in_half_open_interval() {
        assert_abs_diff_eq!(wrap(0.9, FRAC_PI_2), 0.9 - FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(wrap(0.1, FRAC_PI_2), 0.1);
        assert_eq!(wrap(FRAC_PI_4, FRAC_PI_2), -FRAC_PI_4);
        assert_eq!(wrap(-FRAC_PI_4, FRAC_PI_2), -FRAC_PI_4);
        assert_abs_diff_eq!(wrap(1.5 * PI, TAU), -FRAC_PI_2, epsilon = 1e-15);
        for k in -50..50 {
            let x = k as f64 * 0.37;
            let r = wrap(x, FRAC_PI_2);
            assert!((-FRAC_PI_4..FRAC_PI_4).contains(&r));
        }
    }

    #[test]
    fn fold_beta_examples() {
        let out = fold_beta(&pv(&[3.0], &[0.9]));
        assert_abs_diff_eq!(out.beta[0], -0.6708, epsilon = 1e-4);
        assert_eq!(out.gamma, vec![3.0]);
        assert_eq!(fold_beta(&pv(&[0.0], &[0.1])).beta, vec![0.1]);
        let g = weighted();
        let x = pv(&[0.4, -1.1], &[1.3, -0.95]);
        let f0 = expectation(&g, &x).unwrap();
        assert_abs_diff_eq!(expectation(&g, &fold_beta(&x)).unwrap(), f0, epsilon = 1e-9);
    }

    #[test]
    fn time_reversal_examples() {
        let x = pv(&[0.4], &[0.2]);
        assert_eq!(time_reversal(&x), pv(&[-0.4], &[-0.2]));
        assert_eq!(time_reversal(&time_reversal(&x)), x);
        let g = weighted();
        let y = pv(&[0.7, 0.1], &[-0.3, 0.5]);
        assert_abs_diff_eq!(
            expectation(&g, &time_reversal(&y)).unwrap(),
            expectation(&g, &y).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn fold_gamma_examples() {
        let path = Graph::unweighted(3, [(0, 1), (1, 2)]).unwrap();
        let c = fold_gamma_unweighted(&path, &pv(&[1.5 * PI], &[0.1])).unwrap();
        assert_eq!(c.len(), 1);
        assert_abs_diff_eq!(c[0].gamma[0], -FRAC_PI_2, epsilon = 1e-12);

        // 4-cycle: all degrees even, so gamma has period pi.
        let c4 = cycle(4);
        let x = pv(&[0.8 * PI], &[0.2]);
        let cands = fold_gamma_unweighted(&c4, &x).unwrap();
        let hit = cands
            .iter()
            .find(|c| (c.gamma[0] + 0.2 * PI).abs() < 1e-12)
            .expect("pi image");
        assert_abs_diff_eq!(
            expectation(&c4, hit).unwrap(),
            expectation(&c4, &x).unwrap(),
            epsilon = 1e-9
        );

        let tri = cycle(3);
        let x = pv(&[0.3], &[0.1]);
        let cands = fold_gamma_unweighted(&tri, &x).unwrap();
        assert!(cands.contains(&x));
        assert!(cands.iter().all(|c| c == &x || !in_target_range(c)));

        assert!(matches!(
            fold_gamma_unweighted(&weighted(), &x),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn odd_degree_shift_flips_later_betas() {
        // K4 is 3-regular.
        let k4 = Graph::unweighted(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let x = pv(&[0.3, 2.9, 0.1], &[0.2, -0.1, 0.05]);
        let cands = fold_gamma_unweighted(&k4, &x).unwrap();
        assert_eq!(cands.len(), 8);
        let shifted = cands
            .iter()
            .find(|c| {
                (c.gamma[1] - (2.9 - PI)).abs() < 1e-12
                    && (c.gamma[0] - 0.3).abs() < 1e-12
                    && (c.gamma[2] - 0.1).abs() < 1e-12
            })
            .unwrap();
        assert_eq!(shifted.beta, vec![0.2, 0.1, -0.05]);
    }

    #[test]
    fn canonicalize_examples() {
        let tri = cycle(3);
        let x = pv(&[0.4], &[0.2]);
        let out = canonicalize(&tri, &x).unwrap();
        assert!(out.verified && out.in_range);
        assert_eq!(out.params, x);

        for g in [tri, weighted()] {
            let out = canonicalize(&g, &pv(&[-0.4], &[-0.2])).unwrap();
            assert!(out.verified);
            assert_eq!(out.params, pv(&[0.4], &[0.2]));
            assert!(out.folded.time_reversed);
        }
    }

    #[test]
    fn canonicalize_prefers_annealing_trend() {
        // On the 4-cycle (gamma period pi), several images lie in range; the
        // rising-gamma one must win.
        let c4 = cycle(4);
        let x = pv(&[0.5, 0.9 - PI], &[0.3, 0.1]);
        let out = canonicalize(&c4, &x).unwrap();
        assert!(out.verified && out.in_range);
        assert_abs_diff_eq!(nonmonotonicity(&out.params), 0.0);
        assert_abs_diff_eq!(out.params.gamma[1], 0.9, epsilon = 1e-12);
    }

    #[test]
    fn weighted_graph_keeps_gamma_scale() {
        let g = weighted();
        let x = pv(&[2.5], &[0.1]);
        let out = canonicalize(&g, &x).unwrap();
        assert!(out.verified);
        assert!(!out.in_range);
        assert_eq!(out.params.gamma[0].abs(), 2.5);
    }

    #[test]
    fn report_tallies() {
        let a = pv(&[0.1], &[0.1]);
        let b = pv(&[2.0, 0.1], &[0.1, 0.1]);
        let rep = RangeReport::from_params([(&a, true), (&b, false)]);
        assert_eq!(rep.total, 2);
        assert_eq!((rep.verified, rep.unverified, rep.in_range), (1, 1, 1));
        assert_eq!(rep.by_depth[&2].gamma_abs_hist.iter().sum::<usize>(), 2);
        assert_eq!(rep.by_depth[&2].gamma_abs_hist[5], 1);
    }
}
