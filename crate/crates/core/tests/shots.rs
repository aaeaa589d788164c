use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vqg::circuits::{generator_ansatz_2q, run};
use vqg::simulator::{sample_expectation, Mode, PauliString};

#[test]
fn shot_estimates_follow_binomial_statistics() {
    let state = run(&generator_ansatz_2q(), &[], &[0.7, -1.1, 0.4]).unwrap();
    for pauli in [PauliString::z(0), "X0*X1".parse().unwrap()] {
        let exact = state.expectation(&pauli).unwrap();
        let shots = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let est: Vec<f64> = (0..300)
            .map(|_| sample_expectation(&state, &pauli, shots, &mut rng).unwrap())
            .collect();
        let n = est.len() as f64;
        let mean = est.iter().sum::<f64>() / n;
        let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let predicted = (1.0 - exact * exact).sqrt() / (shots as f64).sqrt();
        assert!((sd / predicted - 1.0).abs() < 0.25, "{sd} vs {predicted}");
        assert!((mean - exact).abs() < 4.0 * predicted / n.sqrt());
        assert!(est.iter().all(|e| e.abs() <= 1.0));
    }
}

#[test]
fn shot_mode_is_seed_deterministic() {
    let state = run(&generator_ansatz_2q(), &[], &[0.2, 0.3, 0.4]).unwrap();
    let z = PauliString::z(0);
    let m = Mode::Shots {
        shots: 500,
        seed: 42,
    };
    assert_eq!(
        m.measure(&state, &z, 3).unwrap(),
        m.measure(&state, &z, 3).unwrap()
    );
    let other = Mode::Shots {
        shots: 500,
        seed: 43,
    };
    let a: Vec<f64> = (0..5).map(|s| m.measure(&state, &z, s).unwrap()).collect();
    let b: Vec<f64> = (0..5)
        .map(|s| other.measure(&state, &z, s).unwrap())
        .collect();
    assert_ne!(a, b);
}

#[test]
fn eigenstate_estimates_are_exact() {
    let state = run(&generator_ansatz_2q(), &[], &[0.0, 0.0, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = sample_expectation(&state, &PauliString::z(1), 100, &mut rng).unwrap();
    assert_eq!(e, 1.0);
}
