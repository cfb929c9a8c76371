//! Dense statevector simulation of depth-p QAOA for Max-Cut.
//!
//! The register starts in `|+>^n`; layer `j` applies the diagonal cost phase
//! `exp(-i gamma_j C)` followed by the mixer `exp(-i beta_j X)` on every qubit.
//! Bit `i` of a basis index is the side of node `i`.
//!
//! Gradients use the adjoint method: one forward pass, then a backward sweep
//! that un-applies each layer to both the state and the co-state, reading off
//! `dF/dtheta = 2 Im <lambda|G|psi>` for each generator `G`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CutValue, Graph};
use crate::seed;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 20;

/// Angles of a depth-p circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ParamVector {
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.len() != beta.len() || gamma.is_empty() {
            return Err(Error::Shape(format!(
                "gamma has {} entries, beta has {}; both must equal p >= 1",
                gamma.len(),
                beta.len()
            )));
        }
        if gamma.iter().chain(&beta).any(|x| !x.is_finite()) {
            return Err(Error::Parameter("angles must be finite".into()));
        }
        Ok(ParamVector { gamma, beta })
    }

    pub fn zeros(p: usize) -> Self {
        ParamVector {
            gamma: vec![0.0; p],
            beta: vec![0.0; p],
        }
    }

    pub fn p(&self) -> usize {
        self.gamma.len()
    }

    /// `[gamma_1..gamma_p, beta_1..beta_p]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.gamma.iter().chain(&self.beta).copied().collect()
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(Error::Shape(format!("odd flat parameter length {}", flat.len())));
        }
        let p = flat.len() / 2;
        Self::new(flat[..p].to_vec(), flat[p..].to_vec())
    }

    /// Uniform draw from the raw search box `[-pi, pi)^p x [-pi/2, pi/2)^p`.
    pub fn random(p: usize, rng: &mut seed::Rng) -> Self {
        let gamma = (0..p).map(|_| rng.random_range(-PI..PI)).collect();
        let beta = (0..p).map(|_| rng.random_range(-FRAC_PI_2..FRAC_PI_2)).collect();
        ParamVector { gamma, beta }
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    pub n: usize,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|+>^n`.
    pub fn uniform(n: usize) -> Self {
        let dim = 1usize << n;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        StateVector {
            n,
            amplitudes: vec![a; dim],
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn apply_phase(&mut self, costs: &[f64], gamma: f64) {
        for (a, &c) in self.amplitudes.iter_mut().zip(costs) {
            let (s, co) = (gamma * c).sin_cos();
            *a *= Complex64::new(co, -s);
        }
    }

    /// `exp(-i beta X)` on every qubit.
    fn apply_mixer(&mut self, beta: f64) {
        let (s, c) = beta.sin_cos();
        let amps = &mut self.amplitudes;
        for q in 0..self.n {
            let stride = 1usize << q;
            for block in amps.chunks_exact_mut(2 * stride) {
                let (lo, hi) = block.split_at_mut(stride);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a, *b);
                    // -i s y and -i s x
                    *a = Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re);
                    *b = Complex64::new(c * y.re + s * x.im, c * y.im - s * x.re);
                }
            }
        }
    }
}

/// A graph prepared for simulation: cost diagonal plus its maximum.
#[derive(Clone, Debug)]
pub struct Instance {
    n: usize,
    costs: Vec<f64>,
    cmax: f64,
}

impl Instance {
    pub fn new(g: &Graph) -> Result<Self> {
        let costs = cut_values(g)?;
        let cmax = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Instance { n: g.n(), costs, cmax })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Largest diagonal entry, i.e. the Max-Cut value.
    pub fn cmax(&self) -> f64 {
        self.cmax
    }

    /// `F / C_max`, or 1 when the graph has no positive cut.
    pub fn ratio(&self, cost: f64) -> f64 {
        if self.cmax > 0.0 {
            cost / self.cmax
        } else {
            1.0
        }
    }

    pub fn evolve(&self, params: &ParamVector) -> StateVector {
        let mut psi = StateVector::uniform(self.n);
        for (&g, &b) in params.gamma.iter().zip(&params.beta) {
            psi.apply_phase(&self.costs, g);
            psi.apply_mixer(b);
        }
        psi
    }

    fn energy(&self, psi: &StateVector) -> f64 {
        psi.amplitudes
            .iter()
            .zip(&self.costs)
            .map(|(a, &c)| a.norm_sqr() * c)
            .sum()
    }

    pub fn expectation(&self, params: &ParamVector) -> f64 {
        self.energy(&self.evolve(params))
    }

    /// `(F, dF/dgamma, dF/dbeta)` by one forward and one adjoint sweep.
    pub fn value_and_gradient(&self, params: &ParamVector) -> (f64, Vec<f64>, Vec<f64>) {
        let p = params.p();
        let mut psi = self.evolve(params);
        let value = self.energy(&psi);
        let mut lambda = StateVector {
            n: self.n,
            amplitudes: psi.amplitudes.iter().zip(&self.costs).map(|(a, &c)| a * c).collect(),
        };
        let mut dgamma = vec![0.0; p];
        let mut dbeta = vec![0.0; p];
        for j in (0..p).rev() {
            dbeta[j] = 2.0 * self.mixer_overlap(&lambda, &psi).im;
            psi.apply_mixer(-params.beta[j]);
            lambda.apply_mixer(-params.beta[j]);

            let overlap: Complex64 = lambda
                .amplitudes
                .iter()
                .zip(&psi.amplitudes)
                .zip(&self.costs)
                .map(|((l, a), &c)| l.conj() * a * c)
                .sum();
            dgamma[j] = 2.0 * overlap.im;
            psi.apply_phase(&self.costs, -params.gamma[j]);
            lambda.apply_phase(&self.costs, -params.gamma[j]);
        }
        (value, dgamma, dbeta)
    }

    /// `<lambda| sum_q X_q |psi>`.
    fn mixer_overlap(&self, lambda: &StateVector, psi: &StateVector) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for q in 0..self.n {
            let bit = 1usize << q;
            for (i, l) in lambda.amplitudes.iter().enumerate() {
                acc += l.conj() * psi.amplitudes[i ^ bit];
            }
        }
        acc
    }

    /// Adam ascent on `F` from `init`.
    pub fn adam(&self, init: &ParamVector, settings: AdamSettings) -> OptimizationResult {
        let mut theta = init.to_flat();
        let dim = theta.len();
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let mut m = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        let mut trace = Vec::with_capacity(settings.iters + 1);
        for t in 0..settings.iters {
            let params = ParamVector::from_flat(&theta).expect("even length");
            let (f, dg, db) = self.value_and_gradient(&params);
            trace.push((t, f));
            let step = (t + 1) as i32;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            for (i, g) in dg.into_iter().chain(db).enumerate() {
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                theta[i] += settings.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
        let params = ParamVector::from_flat(&theta).expect("even length");
        let cost = self.expectation(&params);
        trace.push((settings.iters, cost));
        OptimizationResult {
            ar: self.ratio(cost),
            params,
            cost,
            iterations: settings.iters,
            trace,
        }
    }
}

/// Learning rate and step count for [`adam_optimize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub lr: f64,
    pub iters: usize,
}

impl Default for AdamSettings {
    fn default() -> Self {
        AdamSettings { lr: 0.01, iters: 100 }
    }
}

/// Outcome of an angle optimization.
///
/// `trace` holds `(iteration, F)` for iterations `0..=iterations`; the last
/// entry is the reported `cost`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub params: ParamVector,
    pub cost: f64,
    pub ar: f64,
    pub iterations: usize,
    pub trace: Vec<(usize, f64)>,
}

fn check_size(g: &Graph) -> Result<()> {
    if g.n() > MAX_QUBITS {
        return Err(Error::Bounds(format!(
            "simulator supports n <= {MAX_QUBITS}, got {}",
            g.n()
        )));
    }
    Ok(())
}

/// Diagonal of the cost Hamiltonian: cut weight of every basis state.
pub fn cut_values(g: &Graph) -> Result<Vec<f64>> {
    check_size(g)?;
    let dim = 1usize << g.n();
    let mut costs = vec![0.0; dim];
    for (z, c) in costs.iter_mut().enumerate() {
        *c = g
            .edges()
            .iter()
            .filter(|&&(u, v, _)| (z >> u ^ z >> v) & 1 == 1)
            .map(|e| e.2)
            .sum();
    }
    Ok(costs)
}

pub fn evolve(g: &Graph, params: &ParamVector) -> Result<StateVector> {
    Ok(Instance::new(g)?.evolve(params))
}

/// `F_p = <psi|H_z|psi>`.
pub fn expectation(g: &Graph, params: &ParamVector) -> Result<f64> {
    Ok(Instance::new(g)?.expectation(params))
}

/// `(dF/dgamma, dF/dbeta)`.
pub fn gradient(g: &Graph, params: &ParamVector) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, dg, db) = Instance::new(g)?.value_and_gradient(params);
    Ok((dg, db))
}

pub fn approximation_ratio(g: &Graph, params: &ParamVector, cmax: CutValue) -> Result<f64> {
    if !(cmax.value > 0.0) {
        return Err(Error::Domain(format!("C_max must be positive, got {}", cmax.value)));
    }
    Ok(expectation(g, params)? / cmax.value)
}

pub fn adam_optimize(g: &Graph, init: &ParamVector, lr: f64, iters: usize) -> Result<OptimizationResult> {
    Ok(Instance::new(g)?.adam(init, AdamSettings { lr, iters }))
}

/// Best of `starts` Adam runs from uniform random angles.
///
/// Start `k` draws its angles from `seed::derive(seed, k)`. The winner is the
/// highest final `F`, ties going to the lowest start index, so the result does
/// not depend on how starts are scheduled across threads.
pub fn multistart_optimize(
    g: &Graph,
    p: usize,
    starts: usize,
    seed: u64,
    settings: AdamSettings,
) -> Result<OptimizationResult> {
    if starts == 0 || p == 0 {
        return Err(Error::Parameter("need p >= 1 and starts >= 1".into()));
    }
    let inst = Instance::new(g)?;
    let runs: Vec<OptimizationResult> = (0..starts)
        .into_par_iter()
        .map(|k| inst.adam(&multistart_init(p, seed, k), settings))
        .collect();
    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.cost > runs[best].cost {
            best = k;
        }
    }
    Ok(runs.into_iter().nth(best).expect("starts >= 1"))
}

/// Initial angles of start `k` in [`multistart_optimize`].
pub fn multistart_init(p: usize, seed: u64, k: usize) -> ParamVector {
    ParamVector::random(p, &mut seed::rng(seed::derive(seed, k as u64)))
}

/// Depth `p + 1` angles interpolated from depth-`p` angles `x`.
///
/// Entry `i` is `(i/p) x[i-1] + ((p-i)/p) x[i]`, reading `x` as zero outside
/// `0..p`, for both angle families.
pub fn interp_init(x: &ParamVector) -> ParamVector {
    let p = x.p();
    let step = |v: &[f64]| -> Vec<f64> {
        (0..=p)
            .map(|i| {
                let left = if i >= 1 { v[i - 1] } else { 0.0 };
                let right = if i < p { v[i] } else { 0.0 };
                (i as f64 * left + (p - i) as f64 * right) / p as f64
            })
            .collect()
    };
    ParamVector {
        gamma: step(&x.gamma),
        beta: step(&x.beta),
    }
}

/// Linear annealing ramp: `gamma_j = (j/p) dt`, `beta_j = (1 - j/p) dt`.
pub fn linear_ramp_init(p: usize, dt: f64) -> Result<ParamVector> {
    if p == 0 || !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!(
            "linear ramp needs p >= 1 and dt > 0 (p={p}, dt={dt})"
        )));
    }
    let frac = |j: usize| j as f64 / p as f64;
    Ok(ParamVector {
        gamma: (1..=p).map(|j| frac(j) * dt).collect(),
        beta: (1..=p).map(|j| (1.0 - frac(j)) * dt).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn edge() -> Graph {
        Graph::unweighted(2, [(0, 1)]).unwrap()
    }

    fn triangle() -> Graph {
        Graph::unweighted(3, [(0, 1), (0, 2), (1, 2)]).unwrap()
    }

    fn one(g: f64, b: f64) -> ParamVector {
        ParamVector::new(vec![g], vec![b]).unwrap()
    }

    #[test]
    fn param_vector_validation() {
        assert!(ParamVector::new(vec![0.1], vec![]).is_err());
        assert!(ParamVector::new(vec![], vec![]).is_err());
        assert!(ParamVector::new(vec![f64::NAN], vec![0.0]).is_err());
        let pv = ParamVector::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(ParamVector::from_flat(&pv.to_flat()).unwrap(), pv);
    }

    #[test]
    fn cut_value_examples() {
        assert_eq!(cut_values(&edge()).unwrap(), vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(cut_values(&triangle()).unwrap()[0b011], 2.0);
        let w = Graph::new(2, [(0, 1, 2.5)]).unwrap();
        assert_eq!(cut_values(&w).unwrap()[0b01], 2.5);
        let big = Graph::new(21, []).unwrap();
        assert!(matches!(cut_values(&big), Err(Error::Bounds(_))));
    }

    #[test]
    fn evolve_examples() {
        let psi = evolve(&triangle(), &one(0.0, 0.0)).unwrap();
        for a in &psi.amplitudes {
            assert_abs_diff_eq!(a.re, 1.0 / 8f64.sqrt(), epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);
        }

        let psi = evolve(&edge(), &one(PI, 0.0)).unwrap();
        let signs = [1.0, -1.0, -1.0, 1.0];
        for (a, s) in psi.amplitudes.iter().zip(signs) {
            assert_abs_diff_eq!(a.re, 0.5 * s, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);
        }

        // Single qubit: the mixer is the 2x2 rotation [[c, -is], [-is, c]].
        let lone = Graph::new(1, []).unwrap();
        let psi = evolve(&lone, &one(0.3, FRAC_PI_4)).unwrap();
        let (a, b) = (Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(FRAC_1_SQRT_2, 0.0));
        let (c, s) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
        let i = Complex64::i();
        let want = [c * a - i * s * b, -i * s * a + c * b];
        for (got, want) in psi.amplitudes.iter().zip(want) {
            assert_abs_diff_eq!((got - want).norm(), 0.0, epsilon = 1e-15);
        }
    }
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn expectation_at_origin_is_half_total_weight() {
        assert_abs_diff_eq!(expectation(&triangle(), &one(0.0, 0.0)).unwrap(), 1.5, epsilon = 1e-15);
        let w = Graph::new(3, [(0, 1, 0.7), (1, 2, 2.1)]).unwrap();
        let f = expectation(&w, &ParamVector::zeros(3)).unwrap();
        assert_abs_diff_eq!(f, 1.4, epsilon = 1e-14);
    }

    #[test]
    fn ratio_examples() {
        let cmax = CutValue::new(2.0);
        assert_abs_diff_eq!(approximation_ratio(&triangle(), &one(0.0, 0.0), cmax).unwrap(), 0.75);
        assert_abs_diff_eq!(
            approximation_ratio(&edge(), &one(0.0, 0.0), CutValue::new(1.0)).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        // gamma = pi/2, beta = pi/8 prepares a perfect cut of a single edge.
        let ar = approximation_ratio(&edge(), &one(FRAC_PI_2, PI / 8.0), CutValue::new(1.0)).unwrap();
        assert_abs_diff_eq!(ar, 1.0, epsilon = 1e-12);
        assert!(matches!(
            approximation_ratio(&edge(), &one(0.0, 0.0), CutValue::new(0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mixer_gradient_vanishes_at_origin() {
        let g = Graph::new(4, [(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (0, 3, 1.5)]).unwrap();
        let (_, db) = gradient(&g, &ParamVector::zeros(2)).unwrap();
        for d in db {
            assert_abs_diff_eq!(d, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn adam_fixed_point_at_zero_gradient() {
        let lone = Graph::new(1, []).unwrap();
        let init = one(0.4, -0.3);
        let r = adam_optimize(&lone, &init, 0.01, 10).unwrap();
        assert_eq!(r.params, init);
        assert!(r.trace.iter().all(|&(_, f)| f == 0.0));
        assert_eq!(r.trace.len(), 11);
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        let init = one(0.2, 0.3);
        let r = adam_optimize(&triangle(), &init, 0.01, 1).unwrap();
        let (dg, db) = gradient(&triangle(), &init).unwrap();
        assert_abs_diff_eq!(r.params.gamma[0] - 0.2, 0.01 * dg[0].signum(), epsilon = 1e-8);
        assert_abs_diff_eq!(r.params.beta[0] - 0.3, 0.01 * db[0].signum(), epsilon = 1e-8);
        assert_eq!(r.trace.last().unwrap().1, r.cost);
    }

    #[test]
    fn multistart_with_one_start_matches_single_run() {
        let s = AdamSettings::default();
        let multi = multistart_optimize(&triangle(), 2, 1, 42, s).unwrap();
        let single = adam_optimize(&triangle(), &multistart_init(2, 42, 0), s.lr, s.iters).unwrap();
        assert_eq!(multi, single);
        assert_eq!(
            multistart_optimize(&triangle(), 2, 5, 42, s).unwrap(),
            multistart_optimize(&triangle(), 2, 5, 42, s).unwrap()
        );
        assert!(multistart_optimize(&triangle(), 2, 0, 42, s).is_err());
    }

    #[test]
    fn random_init_respects_bounds() {
        let mut rng = seed::rng(3);
        for _ in 0..200 {
            let pv = ParamVector::random(3, &mut rng);
            assert!(pv.gamma.iter().all(|g| (-PI..PI).contains(g)));
            assert!(pv.beta.iter().all(|b| (-FRAC_PI_2..FRAC_PI_2).contains(b)));
        }
    }

    #[test]
    fn interp_examples() {
        let x = ParamVector::new(vec![0.4], vec![0.6]).unwrap();
        let y = interp_init(&x);
        assert_eq!((y.gamma, y.beta), (vec![0.4, 0.4], vec![0.6, 0.6]));
        let x = ParamVector::new(vec![0.2, 0.6], vec![0.5, 0.1]).unwrap();
        let y = interp_init(&x);
        assert_abs_diff_eq!(y.gamma.as_slice(), [0.2, 0.4, 0.6].as_slice(), epsilon = 1e-15);
        assert_abs_diff_eq!(y.beta.as_slice(), [0.5, 0.3, 0.1].as_slice(), epsilon = 1e-15);
    }

    #[test]
    fn linear_ramp_examples() {
        let r = linear_ramp_init(1, 0.5).unwrap();
        assert_eq!((r.gamma, r.beta), (vec![0.5], vec![0.0]));
        let r = linear_ramp_init(2, 0.6).unwrap();
        assert_abs_diff_eq!(r.gamma[0], 0.3);
        assert_abs_diff_eq!(r.gamma[1], 0.6);
        assert_abs_diff_eq!(r.beta[0], 0.3);
        assert_abs_diff_eq!(r.beta[1], 0.0);
        let r = linear_ramp_init(5, 0.75).unwrap();
        assert!(r.gamma.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.beta.windows(2).all(|w| w[0] >= w[1]));
        assert!(linear_ramp_init(0, 1.0).is_err());
        assert!(linear_ramp_init(2, 0.0).is_err());
    }
}
