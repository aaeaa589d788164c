//! Dense statevector simulation.
//!
//! Amplitudes are stored little-endian: qubit 0 is the least significant bit
//! of the basis index. All rotations follow `R_V(θ) = exp(-iθV/2)`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// `|0…0⟩` on `n_qubits` qubits.
pub fn zero_state(n_qubits: usize) -> Result<Statevector> {
    Statevector::zero(n_qubits)
}

/// Out-of-place gate application.
pub fn apply_gate(state: &Statevector, gate: &Gate) -> Result<Statevector> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

/// How expectation values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Exact,
    /// Binomial shot estimate; each call draws from stream `stream` of `seed`.
    Shots { shots: u64, seed: u64 },
}

impl Mode {
    pub fn measure(&self, state: &Statevector, pauli: &PauliString, stream: u64) -> Result<f64> {
        match *self {
            Mode::Exact => state.expectation(pauli),
            Mode::Shots { shots, seed } => {
                let mut rng = crate::seed::stream_rng(seed, stream);
                sample_expectation(state, pauli, shots, &mut rng)
            }
        }
    }
}

/// Exact `⟨ψ|P|ψ⟩`.
pub fn expectation(state: &Statevector, pauli: &PauliString) -> Result<f64> {
    state.expectation(pauli)
}

/// Finite-shot estimate of `⟨P⟩`: `(n₊ − n₋)/shots` with `n₊` binomial at the
/// Born probability `(1 + ⟨P⟩)/2`.
pub fn sample_expectation<R: Rng + ?Sized>(
    state: &Statevector,
    pauli: &PauliString,
    shots: u64,
    rng: &mut R,
) -> Result<f64> {
    let exact = state.expectation(pauli)?;
    estimate_from_expectation(exact, shots, rng)
}

/// Draws the shot estimator for an observable whose exact expectation is known.
pub fn estimate_from_expectation<R: Rng + ?Sized>(
    exact: f64,
    shots: u64,
    rng: &mut R,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::Argument("shot count must be at least 1".into()));
    }
    let p_plus = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
    let binomial = Binomial::new(shots, p_plus)
        .map_err(|e| Error::Argument(format!("binomial sampler: {e}")))?;
    let n_plus = binomial.sample(rng) as f64;
    let n = shots as f64;
    Ok((2.0 * n_plus - n) / n)
}

impl Statevector {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                requested: n_qubits,
                max: MAX_QUBITS,
            });
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes; the caller is responsible for normalization.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Shape(format!(
                "amplitude vector of length {len} is not 2^n with n >= 1"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                requested: n_qubits,
                max: MAX_QUBITS,
            });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            Err(Error::QubitIndex {
                index: q,
                n_qubits: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::Argument(format!(
                "two-qubit gate needs distinct qubits, got {a} twice"
            )));
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::Rx { qubit, angle } => self.apply_1q(qubit, &rotation(Pauli::X, angle)),
            Gate::Ry { qubit, angle } => self.apply_1q(qubit, &rotation(Pauli::Y, angle)),
            Gate::Rz { qubit, angle } => self.apply_1q(qubit, &rotation(Pauli::Z, angle)),
            Gate::H { qubit } => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let h = [[ONE * s, ONE * s], [ONE * s, -ONE * s]];
                self.apply_1q(qubit, &h)
            }
            Gate::R3 {
                qubit,
                alpha,
                beta,
                gamma,
            } => {
                self.check_qubit(qubit)?;
                self.apply_1q(qubit, &rotation(Pauli::Z, alpha))?;
                self.apply_1q(qubit, &rotation(Pauli::Y, beta))?;
                self.apply_1q(qubit, &rotation(Pauli::Z, gamma))
            }
            Gate::CPhase { a, b, theta } => {
                self.check_pair(a, b)?;
                let mask = (1 << a) | (1 << b);
                let phase = Complex64::from_polar(1.0, theta);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp *= phase;
                    }
                }
                Ok(())
            }
            Gate::Cnot { control, target } => {
                self.check_pair(control, target)?;
                let x = [[ZERO, ONE], [ONE, ZERO]];
                self.apply_controlled(control, target, &x);
                Ok(())
            }
            Gate::CR3 {
                control,
                target,
                alpha,
                beta,
                gamma,
            } => {
                self.apply_controlled_rotation(control, target, Pauli::Z, alpha)?;
                self.apply_controlled_rotation(control, target, Pauli::Y, beta)?;
                self.apply_controlled_rotation(control, target, Pauli::Z, gamma)
            }
            Gate::XXRot { a, b, theta } => {
                self.check_pair(a, b)?;
                let xx = PauliString::new(vec![(a, Pauli::X), (b, Pauli::X)])?;
                self.apply_pauli_rotation(&xx, theta)
            }
        }
    }

    /// Applies `|0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ R_axis(angle)`.
    pub fn apply_controlled_rotation(
        &mut self,
        control: usize,
        target: usize,
        axis: Pauli,
        angle: f64,
    ) -> Result<()> {
        self.check_pair(control, target)?;
        self.apply_controlled(control, target, &rotation(axis, angle));
        Ok(())
    }

    /// Applies `exp(-i·angle·P/2) = cos(angle/2)·I − i·sin(angle/2)·P`.
    pub fn apply_pauli_rotation(&mut self, pauli: &PauliString, angle: f64) -> Result<()> {
        let masks = pauli.masks(self.n_qubits)?;
        let (s, c) = (angle / 2.0).sin_cos();
        let minus_i_s = Complex64::new(0.0, -s);
        let old = self.amps.clone();
        for (i, amp) in self.amps.iter_mut().enumerate() {
            // (P ψ)[j] = phase(i)·ψ[i] with j = i ^ flip, so (Pψ)[i] = phase(i^flip)·ψ[i^flip].
            let src = i ^ masks.flip;
            let p_psi = masks.phase(src) * old[src];
            *amp = old[i] * c + minus_i_s * p_psi;
        }
        Ok(())
    }

    pub fn expectation(&self, pauli: &PauliString) -> Result<f64> {
        let masks = pauli.masks(self.n_qubits)?;
        let mut acc = ZERO;
        for (i, amp) in self.amps.iter().enumerate() {
            acc += self.amps[i ^ masks.flip].conj() * masks.phase(i) * amp;
        }
        Ok(acc.re)
    }

    fn apply_1q(&mut self, q: usize, u: &[[Complex64; 2]; 2]) -> Result<()> {
        self.check_qubit(q)?;
        let bit = 1 << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let j = i | bit;
                let (a, b) = (self.amps[i], self.amps[j]);
                self.amps[i] = u[0][0] * a + u[0][1] * b;
                self.amps[j] = u[1][0] * a + u[1][1] * b;
            }
        }
        Ok(())
    }

    fn apply_controlled(&mut self, control: usize, target: usize, u: &[[Complex64; 2]; 2]) {
        let cbit = 1 << control;
        let tbit = 1 << target;
        for i in 0..self.amps.len() {
            if i & cbit != 0 && i & tbit == 0 {
                let j = i | tbit;
                let (a, b) = (self.amps[i], self.amps[j]);
                self.amps[i] = u[0][0] * a + u[0][1] * b;
                self.amps[j] = u[1][0] * a + u[1][1] * b;
            }
        }
    }
}

/// 2×2 matrix of `exp(-iθV/2)` for a single-qubit Pauli `V`.
pub fn rotation(axis: Pauli, theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    match axis {
        Pauli::X => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ],
        Pauli::Y => [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ],
        Pauli::Z => [[Complex64::new(c, -s), ZERO], [ZERO, Complex64::new(c, s)]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Tensor product of single-qubit Paulis; identity on unlisted qubits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliString {
    factors: Vec<(usize, Pauli)>,
}

struct PauliMasks {
    flip: usize,
    sign: usize,
    i_power: u32,
}

impl PauliMasks {
    /// Phase picked up by basis state `|i⟩`: `P|i⟩ = phase(i)·|i ^ flip⟩`.
    #[inline]
    fn phase(&self, i: usize) -> Complex64 {
        let base = match self.i_power % 4 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        };
        if (i & self.sign).count_ones() % 2 == 1 {
            -base
        } else {
            base
        }
    }
}

impl PauliString {
    pub fn new(mut factors: Vec<(usize, Pauli)>) -> Result<Self> {
        factors.sort_by_key(|&(q, _)| q);
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Argument(
                "Pauli string lists the same qubit twice".into(),
            ));
        }
        Ok(Self { factors })
    }

    pub fn identity() -> Self {
        Self { factors: vec![] }
    }

    pub fn single(qubit: usize, axis: Pauli) -> Self {
        Self {
            factors: vec![(qubit, axis)],
        }
    }

    pub fn x(qubit: usize) -> Self {
        Self::single(qubit, Pauli::X)
    }

    pub fn y(qubit: usize) -> Self {
        Self::single(qubit, Pauli::Y)
    }

    pub fn z(qubit: usize) -> Self {
        Self::single(qubit, Pauli::Z)
    }

    pub fn factors(&self) -> &[(usize, Pauli)] {
        &self.factors
    }

    /// Highest qubit index touched, if any.
    pub fn max_qubit(&self) -> Option<usize> {
        self.factors.last().map(|&(q, _)| q)
    }

    fn masks(&self, n_qubits: usize) -> Result<PauliMasks> {
        let mut flip = 0;
        let mut sign = 0;
        let mut i_power = 0;
        for &(q, p) in &self.factors {
            if q >= n_qubits {
                return Err(Error::QubitIndex { index: q, n_qubits });
            }
            match p {
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    sign |= 1 << q;
                    i_power += 1;
                }
                Pauli::Z => sign |= 1 << q,
            }
        }
        Ok(PauliMasks {
            flip,
            sign,
            i_power,
        })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "I");
        }
        for (k, (q, p)) in self.factors.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            write!(f, "{p:?}{q}")?;
        }
        Ok(())
    }
}

impl TryFrom<String> for PauliString {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PauliString> for String {
    fn from(p: PauliString) -> Self {
        p.to_string()
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses strings like `Z0`, `X0*Z2` or `X0 Y1`; `I` is the identity.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "I" {
            return Ok(Self::identity());
        }
        let mut factors = Vec::new();
        for tok in s.split(|c: char| c == '*' || c.is_whitespace()) {
            if tok.is_empty() {
                continue;
            }
            let mut chars = tok.chars();
            let axis = match chars.next() {
                Some('X') | Some('x') => Pauli::X,
                Some('Y') | Some('y') => Pauli::Y,
                Some('Z') | Some('z') => Pauli::Z,
                _ => return Err(Error::Argument(format!("bad Pauli factor '{tok}'"))),
            };
            let q: usize = chars
                .as_str()
                .parse()
                .map_err(|_| Error::Argument(format!("bad qubit index in '{tok}'")))?;
            factors.push((q, axis));
        }
        if factors.is_empty() {
            return Err(Error::Argument(format!("empty Pauli string '{s}'")));
        }
        Self::new(factors)
    }
}

/// A gate with its angles resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx {
        qubit: usize,
        angle: f64,
    },
    Ry {
        qubit: usize,
        angle: f64,
    },
    Rz {
        qubit: usize,
        angle: f64,
    },
    H {
        qubit: usize,
    },
    /// `RZ(γ)·RY(β)·RZ(α)`: α is applied first.
    R3 {
        qubit: usize,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    /// `diag(1, 1, 1, e^{iθ})` on the pair.
    CPhase {
        a: usize,
        b: usize,
        theta: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// Controlled `R3(α, β, γ)`.
    CR3 {
        control: usize,
        target: usize,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    /// `exp(-iθ X⊗X/2)`.
    XXRot {
        a: usize,
        b: usize,
        theta: f64,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn zero_state_sizes() {
        let s = zero_state(1).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO]);
        let s = zero_state(2).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        assert!(matches!(zero_state(13), Err(Error::Capacity { .. })));
        assert!(matches!(zero_state(0), Err(Error::Capacity { .. })));
    }

    #[test]
    fn ry_pi_flips() {
        let s = apply_gate(
            &zero_state(1).unwrap(),
            &Gate::Ry {
                qubit: 0,
                angle: PI,
            },
        )
        .unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!(close(s.amplitudes()[1].norm(), 1.0, 1e-15));
    }

    #[test]
    fn rz_keeps_z_expectation() {
        for theta in [0.1, 1.0, 2.5, -4.0] {
            let s = apply_gate(
                &zero_state(1).unwrap(),
                &Gate::Rz {
                    qubit: 0,
                    angle: theta,
                },
            )
            .unwrap();
            assert!(close(
                s.expectation(&PauliString::z(0)).unwrap(),
                1.0,
                1e-15
            ));
        }
    }

    #[test]
    fn xx_rotation_on_zero() {
        let s = apply_gate(
            &zero_state(2).unwrap(),
            &Gate::XXRot {
                a: 0,
                b: 1,
                theta: 1.0,
            },
        )
        .unwrap();
        let a = s.amplitudes();
        assert!((a[0] - Complex64::new(0.5f64.cos(), 0.0)).norm() < 1e-15);
        assert!((a[3] - Complex64::new(0.0, -(0.5f64.sin()))).norm() < 1e-15);
        assert!(a[1].norm() < 1e-15 && a[2].norm() < 1e-15);
    }

    #[test]
    fn expectation_basics() {
        let s = zero_state(1).unwrap();
        assert_eq!(s.expectation(&PauliString::z(0)).unwrap(), 1.0);
        let s = apply_gate(
            &s,
            &Gate::Ry {
                qubit: 0,
                angle: FRAC_PI_2,
            },
        )
        .unwrap();
        assert!(s.expectation(&PauliString::z(0)).unwrap().abs() < 1e-12);
        assert!(close(
            s.expectation(&PauliString::x(0)).unwrap(),
            1.0,
            1e-12
        ));
    }

    #[test]
    fn y_phase_convention() {
        // RX(-π/2)|0⟩ points along +Y.
        let s = apply_gate(
            &zero_state(1).unwrap(),
            &Gate::Rx {
                qubit: 0,
                angle: -FRAC_PI_2,
            },
        )
        .unwrap();
        assert!(close(
            s.expectation(&PauliString::y(0)).unwrap(),
            1.0,
            1e-12
        ));
    }

    #[test]
    fn index_errors() {
        let s = zero_state(2).unwrap();
        assert!(matches!(
            apply_gate(&s, &Gate::H { qubit: 2 }),
            Err(Error::QubitIndex { index: 2, .. })
        ));
        assert!(s.expectation(&PauliString::z(5)).is_err());
        assert!(apply_gate(
            &s,
            &Gate::Cnot {
                control: 1,
                target: 1
            }
        )
        .is_err());
    }

    #[test]
    fn pauli_parsing() {
        let p: PauliString = "X0*Z2".parse().unwrap();
        assert_eq!(p.factors(), &[(0, Pauli::X), (2, Pauli::Z)]);
        assert_eq!(p.to_string(), "X0*Z2");
        assert!("Z0 Z0".parse::<PauliString>().is_err());
        assert!("Q1".parse::<PauliString>().is_err());
        assert_eq!("I".parse::<PauliString>().unwrap(), PauliString::identity());
    }

    #[test]
    fn shots_deterministic_outcome() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let s = zero_state(1).unwrap();
        for shots in [1, 7, 10_000] {
            assert_eq!(
                sample_expectation(&s, &PauliString::z(0), shots, &mut rng).unwrap(),
                1.0
            );
        }
        assert!(sample_expectation(&s, &PauliString::z(0), 0, &mut rng).is_err());
    }

    #[test]
    fn shots_pi_over_three() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let s = apply_gate(
            &zero_state(1).unwrap(),
            &Gate::Ry {
                qubit: 0,
                angle: PI / 3.0,
            },
        )
        .unwrap();
        let v = sample_expectation(&s, &PauliString::z(0), 10_000, &mut rng).unwrap();
        let sigma = (1.0f64 - 0.25).sqrt() / 100.0;
        assert!((v - 0.5).abs() < 3.0 * sigma, "{v}");
    }
}
