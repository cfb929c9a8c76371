//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qseer_core::qaoa::{Instance, ParamVector};
use qseer_core::Graph;

type CMat = DMatrix<Complex64>;

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Single-qubit operator `op` on qubit `q` of an `n`-qubit register, with
/// qubit 0 as the least significant bit of the basis index.
fn embed(op: &CMat, q: usize, n: usize) -> CMat {
    let id = CMat::identity(2, 2);
    let mut out = CMat::identity(1, 1);
    for k in (0..n).rev() {
        out = kron(&out, if k == q { op } else { &id });
    }
    out
}

fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[1.0.into(), 0.0.into(), 0.0.into(), (-1.0).into()])
}

/// `exp(-i gamma H_z)` with `H_z = 1/2 sum w (I - Z_j Z_k)` assembled from Pauli
/// products, exponentiated entry-wise on its (diagonal) matrix.
fn cost_unitary(g: &Graph, gamma: f64) -> CMat {
    let n = g.n();
    let dim = 1 << n;
    let mut h = CMat::zeros(dim, dim);
    for &(u, v, w) in g.edges() {
        let zz = embed(&pauli_z(), u, n) * embed(&pauli_z(), v, n);
        h += (CMat::identity(dim, dim) - zz) * Complex64::new(0.5 * w, 0.0);
    }
    let mut u = CMat::zeros(dim, dim);
    for i in 0..dim {
        assert!(h[(i, i)].im.abs() < 1e-14);
        u[(i, i)] = Complex64::new(0.0, -gamma * h[(i, i)].re).exp();
    }
    u
}

fn mixer_unitary(n: usize, beta: f64) -> CMat {
    let (c, s) = (beta.cos(), beta.sin());
    let rx = CMat::from_row_slice(
        2,
        2,
        &[c.into(), Complex64::new(0.0, -s), Complex64::new(0.0, -s), c.into()],
    );
    (0..n).fold(CMat::identity(1 << n, 1 << n), |acc, q| embed(&rx, q, n) * acc)
}

pub fn dense_expectation(g: &Graph, params: &ParamVector) -> f64 {
    let n = g.n();
    let dim = 1 << n;
    let mut psi = DVector::from_element(dim, Complex64::new(1.0 / (dim as f64).sqrt(), 0.0));
    let mut circuit = CMat::identity(dim, dim);
    for (&gm, &bt) in params.gamma.iter().zip(&params.beta) {
        circuit = mixer_unitary(n, bt) * cost_unitary(g, gm) * circuit;
    }
    psi = &circuit * psi;
    let mut h = CMat::zeros(dim, dim);
    for &(u, v, w) in g.edges() {
        let zz = embed(&pauli_z(), u, n) * embed(&pauli_z(), v, n);
        h += (CMat::identity(dim, dim) - zz) * Complex64::new(0.5 * w, 0.0);
    }
    (psi.adjoint() * &h * &psi)[(0, 0)].re
}

/// Best `F` on a 200x200 grid over the raw box, refined by shrinking local
/// grid searches around the best cell.
pub fn grid_optimum_p1(g: &Graph) -> f64 {
    let inst = Instance::new(g).unwrap();
    let f = |gm: f64, bt: f64| inst.expectation(&ParamVector::new(vec![gm], vec![bt]).unwrap());
    let (n, mut best) = (200, (f64::NEG_INFINITY, 0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            let gm = -PI + TAU * i as f64 / n as f64;
            let bt = -FRAC_PI_2 + PI * j as f64 / n as f64;
            let v = f(gm, bt);
            if v > best.0 {
                best = (v, gm, bt);
            }
        }
    }
    let (mut hg, mut hb) = (TAU / n as f64, PI / n as f64);
    for _ in 0..40 {
        let (_, g0, b0) = best;
        for i in -5..=5 {
            for j in -5..=5 {
                let (gm, bt) = (g0 + hg * i as f64 / 5.0, b0 + hb * j as f64 / 5.0);
                let v = f(gm, bt);
                if v > best.0 {
                    best = (v, gm, bt);
                }
            }
        }
        hg *= 0.5;
        hb *= 0.5;
    }
    best.0
}
