//! Dense-matrix reference simulator and random circuit generators shared by
//! the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use num_complex::Complex64 as C;
use rand::Rng;
use vqg::autodiff::{Bindings, NodeId, QuantumNodeSpec, Tape};
use vqg::circuits::{Circuit, DataMap, GateKind, ParamSlot};
use vqg::simulator::{Gate, Mode, Pauli, PauliString};

/// Row-major square matrix.
#[derive(Clone, Debug)]
pub struct Dense {
    pub dim: usize,
    pub m: Vec<C>,
}

impl Dense {
    pub fn identity(dim: usize) -> Self {
        let mut m = vec![C::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = C::new(1.0, 0.0);
        }
        Self { dim, m }
    }

    pub fn from_rows(rows: &[&[C]]) -> Self {
        let dim = rows.len();
        Self {
            dim,
            m: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        self.m[i * self.dim + j]
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        let d = self.dim;
        let mut m = vec![C::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.m[i * d + k];
                if a == C::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    m[i * d + j] += a * o.m[k * d + j];
                }
            }
        }
        Dense { dim: d, m }
    }

    pub fn add(&self, o: &Dense) -> Dense {
        Dense {
            dim: self.dim,
            m: self.m.iter().zip(&o.m).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, c: C) -> Dense {
        Dense {
            dim: self.dim,
            m: self.m.iter().map(|a| a * c).collect(),
        }
    }

    /// `self ⊗ o`, with `o` acting on the less significant bits.
    pub fn kron(&self, o: &Dense) -> Dense {
        let (a, b) = (self.dim, o.dim);
        let d = a * b;
        let mut m = vec![C::new(0.0, 0.0); d * d];
        for i1 in 0..a {
            for j1 in 0..a {
                let x = self.m[i1 * a + j1];
                for i2 in 0..b {
                    for j2 in 0..b {
                        m[(i1 * b + i2) * d + j1 * b + j2] = x * o.m[i2 * b + j2];
                    }
                }
            }
        }
        Dense { dim: d, m }
    }

    fn norm1(&self) -> f64 {
        self.m.iter().map(|c| c.norm()).sum()
    }

    /// Matrix exponential by scaling and squaring with a Taylor series.
    pub fn expm(&self) -> Dense {
        let mut s = 0;
        while self.norm1() / f64::powi(2.0, s) > 0.5 {
            s += 1;
        }
        let a = self.scale(C::new(f64::powi(2.0, -s), 0.0));
        let mut term = Dense::identity(self.dim);
        let mut sum = Dense::identity(self.dim);
        for k in 1..30 {
            term = term.mul(&a).scale(C::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
        }
        for _ in 0..s {
            sum = sum.mul(&sum);
        }
        sum
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.m[i * self.dim + j] * v[j]).sum())
            .collect()
    }
}

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn pauli_2x2(p: Pauli) -> Dense {
    match p {
        Pauli::X => Dense::from_rows(&[&[c(0., 0.), c(1., 0.)], &[c(1., 0.), c(0., 0.)]]),
        Pauli::Y => Dense::from_rows(&[&[c(0., 0.), c(0., -1.)], &[c(0., 1.), c(0., 0.)]]),
        Pauli::Z => Dense::from_rows(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(-1., 0.)]]),
    }
}

/// Embeds single-qubit operators into an `n`-qubit register; unlisted qubits
/// get the identity and qubit 0 is the least significant bit.
pub fn embed(n: usize, ops: &[(usize, Dense)]) -> Dense {
    let mut full = Dense::identity(1);
    for q in (0..n).rev() {
        let op = ops
            .iter()
            .find(|(k, _)| *k == q)
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| Dense::identity(2));
        full = full.kron(&op);
    }
    full
}

pub fn pauli_matrix(n: usize, p: &PauliString) -> Dense {
    let ops: Vec<(usize, Dense)> = p
        .factors()
        .iter()
        .map(|&(q, a)| (q, pauli_2x2(a)))
        .collect();
    embed(n, &ops)
}

/// `exp(-iθG/2)` for a Hermitian generator `G`.
pub fn rotation(g: &Dense, theta: f64) -> Dense {
    g.scale(c(0.0, -theta / 2.0)).expm()
}

fn projector(n: usize, q: usize, bit: usize) -> Dense {
    let p = if bit == 0 {
        Dense::from_rows(&[&[c(1., 0.), c(0., 0.)], &[c(0., 0.), c(0., 0.)]])
    } else {
        Dense::from_rows(&[&[c(0., 0.), c(0., 0.)], &[c(0., 0.), c(1., 0.)]])
    };
    embed(n, &[(q, p)])
}

fn r3(n: usize, q: usize, alpha: f64, beta: f64, gamma: f64) -> Dense {
    let z = embed(n, &[(q, pauli_2x2(Pauli::Z))]);
    let y = embed(n, &[(q, pauli_2x2(Pauli::Y))]);
    rotation(&z, gamma)
        .mul(&rotation(&y, beta))
        .mul(&rotation(&z, alpha))
}

pub fn gate_matrix(n: usize, gate: &Gate) -> Dense {
    let single = |q: usize, p: Pauli| embed(n, &[(q, pauli_2x2(p))]);
    match *gate {
        Gate::Rx { qubit, angle } => rotation(&single(qubit, Pauli::X), angle),
        Gate::Ry { qubit, angle } => rotation(&single(qubit, Pauli::Y), angle),
        Gate::Rz { qubit, angle } => rotation(&single(qubit, Pauli::Z), angle),
        Gate::H { qubit } => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let h = Dense::from_rows(&[&[c(s, 0.), c(s, 0.)], &[c(s, 0.), c(-s, 0.)]]);
            embed(n, &[(qubit, h)])
        }
        Gate::R3 {
            qubit,
            alpha,
            beta,
            gamma,
        } => r3(n, qubit, alpha, beta, gamma),
        Gate::CPhase { a, b, theta } => {
            let both = projector(n, a, 1).mul(&projector(n, b, 1));
            let phase = c(theta.cos(), theta.sin()) - c(1.0, 0.0);
            Dense::identity(1 << n).add(&both.scale(phase))
        }
        Gate::Cnot { control, target } => {
            projector(n, control, 0).add(&projector(n, control, 1).mul(&single(target, Pauli::X)))
        }
        Gate::CR3 {
            control,
            target,
            alpha,
            beta,
            gamma,
        } => projector(n, control, 0)
            .add(&projector(n, control, 1).mul(&r3(n, target, alpha, beta, gamma))),
        Gate::XXRot { a, b, theta } => {
            let xx = single(a, Pauli::X).mul(&single(b, Pauli::X));
            rotation(&xx, theta)
        }
    }
}

pub fn zero_vector(n: usize) -> Vec<C> {
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[0] = c(1.0, 0.0);
    v
}

pub fn run_gates(n: usize, gates: &[Gate]) -> Vec<C> {
    gates
        .iter()
        .fold(zero_vector(n), |v, g| gate_matrix(n, g).apply(&v))
}

pub fn expectation(n: usize, v: &[C], p: &PauliString) -> f64 {
    let pv = pauli_matrix(n, p).apply(v);
    v.iter().zip(&pv).map(|(a, b)| (a.conj() * b).re).sum()
}

fn distinct_pair<R: Rng>(rng: &mut R, n: usize) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

fn angle<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI)
}

pub fn random_gate<R: Rng>(rng: &mut R, n: usize) -> Gate {
    let kinds = if n == 1 { 5 } else { 9 };
    let q = rng.random_range(0..n);
    match rng.random_range(0..kinds) {
        0 => Gate::Rx {
            qubit: q,
            angle: angle(rng),
        },
        1 => Gate::Ry {
            qubit: q,
            angle: angle(rng),
        },
        2 => Gate::Rz {
            qubit: q,
            angle: angle(rng),
        },
        3 => Gate::H { qubit: q },
        4 => Gate::R3 {
            qubit: q,
            alpha: angle(rng),
            beta: angle(rng),
            gamma: angle(rng),
        },
        k => {
            let (a, b) = distinct_pair(rng, n);
            match k {
                5 => Gate::CPhase {
                    a,
                    b,
                    theta: angle(rng),
                },
                6 => Gate::Cnot {
                    control: a,
                    target: b,
                },
                7 => Gate::CR3 {
                    control: a,
                    target: b,
                    alpha: angle(rng),
                    beta: angle(rng),
                    gamma: angle(rng),
                },
                _ => Gate::XXRot {
                    a,
                    b,
                    theta: angle(rng),
                },
            }
        }
    }
}

pub const ALL_KINDS: [GateKind; 9] = [
    GateKind::Rx,
    GateKind::Ry,
    GateKind::Rz,
    GateKind::H,
    GateKind::R3,
    GateKind::CPhase,
    GateKind::Cnot,
    GateKind::CR3,
    GateKind::XXRot,
];

/// Random parameterized circuit. Angle slots are trainable (indices may
/// repeat), fixed, or, when `input_dim > 0`, bound to encoded inputs.
pub fn random_circuit<R: Rng>(
    rng: &mut R,
    n: usize,
    n_params: usize,
    input_dim: usize,
    n_ops: usize,
) -> Circuit {
    let mut circuit = Circuit::new(n, n_params, input_dim).unwrap();
    let kinds: Vec<GateKind> = ALL_KINDS
        .iter()
        .copied()
        .filter(|k| n > 1 || k.arity() == 1)
        .collect();
    for _ in 0..n_ops {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let qubits: Vec<usize> = if kind.arity() == 1 {
            vec![rng.random_range(0..n)]
        } else {
            let (a, b) = distinct_pair(rng, n);
            vec![a, b]
        };
        let slots: Vec<ParamSlot> = (0..kind.n_angles())
            .map(|_| {
                let roll = rng.random_range(0..10);
                if input_dim > 0 && roll < 3 {
                    let map = match rng.random_range(0..3) {
                        0 => DataMap::Identity,
                        1 => DataMap::Arcsin,
                        _ => DataMap::ArccosSquare,
                    };
                    ParamSlot::Data {
                        index: rng.random_range(0..input_dim),
                        map,
                    }
                } else if n_params > 0 && roll < 9 {
                    ParamSlot::Trainable(rng.random_range(0..n_params))
                } else {
                    ParamSlot::Fixed(angle(rng))
                }
            })
            .collect();
        circuit.push(kind, &qubits, &slots).unwrap();
    }
    circuit
}

pub fn random_pauli<R: Rng>(rng: &mut R, n: usize) -> PauliString {
    loop {
        let factors: Vec<(usize, Pauli)> = (0..n)
            .filter_map(|q| match rng.random_range(0..4) {
                0 => None,
                1 => Some((q, Pauli::X)),
                2 => Some((q, Pauli::Y)),
                _ => Some((q, Pauli::Z)),
            })
            .collect();
        if !factors.is_empty() {
            return PauliString::new(factors).unwrap();
        }
    }
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// A random quantum node between classical layers; rebuilt identically for
/// every evaluation.
pub struct Hybrid {
    pub circuit: Arc<Circuit>,
    pub paulis: Vec<PauliString>,
    pub dim: usize,
    pub pre_layer: bool,
    pub hidden: Option<usize>,
    pub inputs: Vec<Vec<f64>>,
}

impl Hybrid {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let n = rng.random_range(1..=3);
        let dim = rng.random_range(1..=2);
        let m = rng.random_range(1..=6);
        let ops = rng.random_range(3..=10);
        let circuit = Arc::new(random_circuit(rng, n, m, dim, ops));
        let k = rng.random_range(1..=3);
        let paulis: Vec<PauliString> = (0..k).map(|_| random_pauli(rng, n)).collect();
        let pre_layer = rng.random_bool(0.5);
        let hidden = rng.random_bool(0.5).then(|| rng.random_range(1..=4));
        let out_in = hidden.unwrap_or(k);
        let mut inputs = vec![
            random_vec(rng, dim, -0.8, 0.8),
            random_vec(rng, m, -3.0, 3.0),
        ];
        if pre_layer {
            inputs.push(random_vec(rng, dim * dim, -1.0, 1.0));
            inputs.push(random_vec(rng, dim, -0.5, 0.5));
        }
        if let Some(h) = hidden {
            inputs.push(random_vec(rng, h * k, -1.0, 1.0));
            inputs.push(random_vec(rng, h, -0.5, 0.5));
        }
        inputs.push(random_vec(rng, out_in, -1.0, 1.0));
        inputs.push(random_vec(rng, 1, -0.5, 0.5));
        Self {
            circuit,
            paulis,
            dim,
            pre_layer,
            hidden,
            inputs,
        }
    }

    pub fn build(&self, values: &[Vec<f64>]) -> (Tape, Vec<NodeId>, Bindings) {
        let mut tape = Tape::new();
        let mut b = Bindings::new();
        let ids: Vec<NodeId> = values
            .iter()
            .map(|v| {
                let id = tape.input(v.len());
                b.insert(id, v.clone());
                id
            })
            .collect();
        let mut next = 2;
        let mut x = ids[0];
        if self.pre_layer {
            let wx = tape.matvec(ids[next], x, self.dim, self.dim).unwrap();
            let a = tape.bias_add(wx, ids[next + 1]).unwrap();
            let t = tape.tanh(a).unwrap();
            x = tape.scale(t, 0.9).unwrap();
            next += 2;
        }
        let mut h = tape
            .quantum(QuantumNodeSpec {
                circuit: Arc::clone(&self.circuit),
                paulis: self.paulis.clone(),
                input: x,
                params: ids[1],
                mode: Mode::Exact,
            })
            .unwrap();
        let k = self.paulis.len();
        let mut width = k;
        if let Some(hdim) = self.hidden {
            let wx = tape.matvec(ids[next], h, hdim, k).unwrap();
            let a = tape.bias_add(wx, ids[next + 1]).unwrap();
            h = tape.tanh(a).unwrap();
            width = hdim;
            next += 2;
        }
        let wx = tape.matvec(ids[next], h, 1, width).unwrap();
        let a = tape.bias_add(wx, ids[next + 1]).unwrap();
        let p = tape.sigmoid(a).unwrap();
        let l = tape.log(p).unwrap();
        tape.negate(l).unwrap();
        (tape, ids, b)
    }

    pub fn value(&self, values: &[Vec<f64>]) -> f64 {
        let (mut tape, _, b) = self.build(values);
        tape.forward(&b).unwrap()[0]
    }
}
