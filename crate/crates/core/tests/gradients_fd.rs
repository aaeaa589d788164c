mod common;

use common::{random_circuit, random_pauli, random_vec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vqg::circuits::{run, Circuit};
use vqg::gradients::{input_gradient, jacobian, param_gradient, param_gradient_shots};
use vqg::simulator::PauliString;

const H: f64 = 1e-5;

fn value(c: &Circuit, p: &PauliString, x: &[f64], theta: &[f64]) -> f64 {
    run(c, x, theta).unwrap().expectation(p).unwrap()
}

fn fd_params(c: &Circuit, p: &PauliString, x: &[f64], theta: &[f64]) -> Vec<f64> {
    (0..theta.len())
        .map(|j| {
            let mut a = theta.to_vec();
            let mut b = theta.to_vec();
            a[j] += H;
            b[j] -= H;
            (value(c, p, x, &a) - value(c, p, x, &b)) / (2.0 * H)
        })
        .collect()
}

#[test]
fn parameter_shift_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..60 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=12);
        let ops = rng.random_range(1..=15);
        let c = random_circuit(&mut rng, n, m, 0, ops);
        let theta = random_vec(&mut rng, m, -3.0, 3.0);
        let p = random_pauli(&mut rng, n);
        let g = param_gradient(&c, &p, &[], &theta).unwrap();
        let fd = fd_params(&c, &p, &[], &theta);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn input_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..40 {
        let n = rng.random_range(1..=3);
        let dim = rng.random_range(1..=2);
        let c = random_circuit(&mut rng, n, 3, dim, 10);
        let theta = random_vec(&mut rng, 3, -3.0, 3.0);
        let x = random_vec(&mut rng, dim, -0.9, 0.9);
        let p = random_pauli(&mut rng, n);
        let g = input_gradient(&c, &p, &x, &theta).unwrap();
        for k in 0..dim {
            let mut a = x.clone();
            let mut b = x.clone();
            a[k] += H;
            b[k] -= H;
            let fd = (value(&c, &p, &a, &theta) - value(&c, &p, &b, &theta)) / (2.0 * H);
            assert!((g[k] - fd).abs() < 1e-6, "{} vs {fd}", g[k]);
        }
    }
}

#[test]
fn jacobian_rows_are_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(79);
    let c = random_circuit(&mut rng, 3, 6, 0, 12);
    let theta = random_vec(&mut rng, 6, -3.0, 3.0);
    let paulis: Vec<PauliString> = (0..3).map(|_| random_pauli(&mut rng, 3)).collect();
    let j = jacobian(&c, &paulis, &[], &theta).unwrap();
    assert_eq!((j.rows(), j.cols()), (3, 6));
    for (i, p) in paulis.iter().enumerate() {
        let g = param_gradient(&c, p, &[], &theta).unwrap();
        assert_eq!(j.row(i), g.as_slice());
    }
}

#[test]
fn shot_gradients_are_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let c = random_circuit(&mut rng, 2, 4, 0, 8);
    let theta = random_vec(&mut rng, 4, -3.0, 3.0);
    let p = PauliString::z(0);
    let exact = param_gradient(&c, &p, &[], &theta).unwrap();
    let runs = 40;
    let mut mean = [0.0; 4];
    for seed in 0..runs {
        let g = param_gradient_shots(&c, &p, &[], &theta, 20_000, seed).unwrap();
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v / runs as f64;
        }
    }
    for (m, e) in mean.iter().zip(&exact) {
        assert!((m - e).abs() < 0.02, "{m} vs {e}");
    }
}
