//! Simulator checks against independent constructions: explicit dense
//! unitaries, central finite differences and a dense angle grid.

mod common;

use std::f64::consts::{FRAC_PI_2, TAU};

use common::{dense_expectation, grid_optimum_p1};
use proptest::prelude::*;
use qseer_core::graph::{enumerate_connected_nonisomorphic, gen_random, max_cut_bruteforce, GraphKind, WeightDist};
use qseer_core::qaoa::{self, AdamSettings, Instance, ParamVector};
use qseer_core::seed;
use qseer_core::Graph;
use rand::Rng;

fn random_params(p: usize, rng: &mut seed::Rng) -> ParamVector {
    ParamVector::random(p, rng)
}

#[test]
fn matches_dense_matrix_circuit_on_small_graphs() {
    let mut rng = seed::rng(11);
    for n in 1..=4 {
        for g in enumerate_connected_nonisomorphic(n).unwrap() {
            for p in 1..=2 {
                for _ in 0..3 {
                    let x = random_params(p, &mut rng);
                    let fast = qaoa::expectation(&g, &x).unwrap();
                    let slow = dense_expectation(&g, &x);
                    assert!((fast - slow).abs() < 1e-10, "{g} {x:?}: {fast} vs {slow}");
                }
            }
        }
    }
    let w = Graph::new(4, [(0, 1, 0.4), (1, 2, 1.9), (2, 3, 0.2), (0, 3, 1.1), (1, 3, 0.7)]).unwrap();
    let x = random_params(2, &mut rng);
    assert!((qaoa::expectation(&w, &x).unwrap() - dense_expectation(&w, &x)).abs() < 1e-10);
}

fn central_difference(inst: &Instance, x: &ParamVector, h: f64) -> Vec<f64> {
    let flat = x.to_flat();
    (0..flat.len())
        .map(|i| {
            let mut up = flat.clone();
            let mut dn = flat.clone();
            up[i] += h;
            dn[i] -= h;
            let f = |v: &[f64]| inst.expectation(&ParamVector::from_flat(v).unwrap());
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-8);
    num / den
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let mut rng = seed::rng(5);
    for k in 0..20usize {
        let weights = if k % 2 == 0 {
            WeightDist::None
        } else {
            WeightDist::Uniform { lo: 0.0, hi: 2.0 }
        };
        let g = gen_random(GraphKind::ErdosRenyi { prob: 0.6 }, 4 + k % 3, weights, k as u64).unwrap();
        let x = random_params(1 + k % 3, &mut rng);
        let inst = Instance::new(&g).unwrap();
        let (_, dg, db) = inst.value_and_gradient(&x);
        let exact: Vec<f64> = dg.into_iter().chain(db).collect();
        let fd = central_difference(&inst, &x, 1e-5);
        assert!(rel_err(&exact, &fd) <= 1e-5, "instance {k}: {exact:?} vs {fd:?}");
    }
}

#[test]
fn gradient_is_odd_under_time_reversal() {
    let g = Graph::new(4, [(0, 1, 1.0), (1, 2, 0.3), (2, 3, 1.7), (0, 2, 0.8)]).unwrap();
    let x = ParamVector::new(vec![0.37], vec![-0.21]).unwrap();
    let neg = ParamVector::new(vec![-0.37], vec![0.21]).unwrap();
    let (a, b) = qaoa::gradient(&g, &x).unwrap();
    let (c, d) = qaoa::gradient(&g, &neg).unwrap();
    assert!((a[0] + c[0]).abs() < 1e-12 && (b[0] + d[0]).abs() < 1e-12);
}

#[test]
fn multistart_recovers_grid_optimum() {
    let triangle = Graph::unweighted(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
    let square = Graph::unweighted(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
    for g in [triangle, square] {
        let cmax = max_cut_bruteforce(&g).unwrap().value;
        let target = grid_optimum_p1(&g) / cmax;
        let r = qaoa::multistart_optimize(&g, 1, 20, 3, AdamSettings::default()).unwrap();
        assert!((r.ar - target).abs() < 1e-3, "{g}: {} vs grid {target}", r.ar);
    }
}

#[test]
fn adam_from_near_grid_optimum_converges() {
    let triangle = Graph::unweighted(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
    let best = grid_optimum_p1(&triangle);
    let r = qaoa::adam_optimize(&triangle, &ParamVector::new(vec![0.6], vec![0.3]).unwrap(), 0.01, 100).unwrap();
    assert!((r.cost - best).abs() < 1e-3, "{} vs {best}", r.cost);
}

#[test]
fn cut_diagonal_maximum_equals_bruteforce_max_cut() {
    for seed in 0..10 {
        let g = gen_random(
            GraphKind::ErdosRenyi { prob: 0.5 },
            9,
            WeightDist::Exponential { rate: 1.0 },
            seed,
        )
        .unwrap();
        let inst = Instance::new(&g).unwrap();
        assert!((inst.cmax() - max_cut_bruteforce(&g).unwrap().value).abs() < 1e-12);
    }
}

fn arb_graph() -> impl Strategy<Value = Graph> {
    (2usize..=7, any::<u64>(), any::<bool>()).prop_map(|(n, s, weighted)| {
        let w = if weighted {
            WeightDist::Exponential { rate: 1.0 }
        } else {
            WeightDist::None
        };
        gen_random(GraphKind::ErdosRenyi { prob: 0.6 }, n, w, s).unwrap()
    })
}

fn arb_params() -> impl Strategy<Value = ParamVector> {
    (1usize..=3, any::<u64>()).prop_map(|(p, s)| ParamVector::random(p, &mut seed::rng(s)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn evolution_preserves_norm(g in arb_graph(), x in arb_params()) {
        let psi = qaoa::evolve(&g, &x).unwrap();
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn time_reversal_symmetry(g in arb_graph(), x in arb_params()) {
        let neg = ParamVector::new(x.gamma.iter().map(|v| -v).collect(), x.beta.iter().map(|v| -v).collect()).unwrap();
        prop_assert!((qaoa::expectation(&g, &x).unwrap() - qaoa::expectation(&g, &neg).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn beta_has_period_half_pi(g in arb_graph(), x in arb_params(), k in 0usize..3) {
        let mut y = x.clone();
        let j = k % y.p();
        y.beta[j] += FRAC_PI_2;
        prop_assert!((qaoa::expectation(&g, &x).unwrap() - qaoa::expectation(&g, &y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn gamma_has_period_two_pi_when_unweighted(n in 2usize..=7, s in any::<u64>(), x in arb_params(), k in 0usize..3) {
        let g = gen_random(GraphKind::ErdosRenyi { prob: 0.5 }, n, WeightDist::None, s).unwrap();
        let mut y = x.clone();
        let j = k % y.p();
        y.gamma[j] += TAU;
        prop_assert!((qaoa::expectation(&g, &x).unwrap() - qaoa::expectation(&g, &y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn origin_gives_half_total_weight(g in arb_graph(), p in 1usize..=3) {
        let f = qaoa::expectation(&g, &ParamVector::zeros(p)).unwrap();
        prop_assert!((f - 0.5 * g.total_weight()).abs() < 1e-12);
    }

    #[test]
    fn max_cut_invariant_under_relabeling(g in arb_graph(), s in any::<u64>()) {
        let mut perm: Vec<usize> = (0..g.n()).collect();
        let mut rng = seed::rng(s);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let h = g.relabel(&perm).unwrap();
        prop_assert!((max_cut_bruteforce(&g).unwrap().value - max_cut_bruteforce(&h).unwrap().value).abs() < 1e-12);
    }
}
