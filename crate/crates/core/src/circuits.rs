//! Parameterized circuit representation and the encoder/ansatz constructors.
//!
//! Every gate angle is a [`ParamSlot`]: bound to a component of the classical
//! input through a fixed nonlinearity, to a trainable parameter, or to a
//! constant. Slots are addressed by a flat [`SlotId`] in op order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{Gate, Statevector};

/// Inputs with `|x| ≤ 1 + INPUT_SLACK` are clamped into `[-1, 1]` before the
/// encoder nonlinearities; beyond that they are rejected.
pub const INPUT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMap {
    Identity,
    Arcsin,
    /// `arccos(x²)`
    ArccosSquare,
}

impl DataMap {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            DataMap::Identity => x,
            DataMap::Arcsin => x.asin(),
            DataMap::ArccosSquare => (x * x).acos(),
        }
    }

    /// `d map / dx`; unbounded at `|x| = 1` for the trigonometric maps.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            DataMap::Identity => 1.0,
            DataMap::Arcsin => 1.0 / (1.0 - x * x).sqrt(),
            DataMap::ArccosSquare => -2.0 * x / (1.0 - x.powi(4)).sqrt(),
        }
    }

    pub fn is_bounded_domain(self) -> bool {
        !matches!(self, DataMap::Identity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSlot {
    Data { index: usize, map: DataMap },
    Trainable(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    R3,
    #[serde(rename = "CPHASE")]
    CPhase,
    Cnot,
    CR3,
    #[serde(rename = "XXROT")]
    XXRot,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::H | GateKind::R3 => 1,
            GateKind::CPhase | GateKind::Cnot | GateKind::CR3 | GateKind::XXRot => 2,
        }
    }

    pub fn n_angles(self) -> usize {
        match self {
            GateKind::H | GateKind::Cnot => 0,
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::CPhase | GateKind::XXRot => 1,
            GateKind::R3 | GateKind::CR3 => 3,
        }
    }

    /// Builds the concrete gate. For controlled kinds `qubits = [control, target]`.
    pub fn gate(self, qubits: &[usize], angles: &[f64]) -> Gate {
        match self {
            GateKind::Rx => Gate::Rx {
                qubit: qubits[0],
                angle: angles[0],
            },
            GateKind::Ry => Gate::Ry {
                qubit: qubits[0],
                angle: angles[0],
            },
            GateKind::Rz => Gate::Rz {
                qubit: qubits[0],
                angle: angles[0],
            },
            GateKind::H => Gate::H { qubit: qubits[0] },
            GateKind::R3 => Gate::R3 {
                qubit: qubits[0],
                alpha: angles[0],
                beta: angles[1],
                gamma: angles[2],
            },
            GateKind::CPhase => Gate::CPhase {
                a: qubits[0],
                b: qubits[1],
                theta: angles[0],
            },
            GateKind::Cnot => Gate::Cnot {
                control: qubits[0],
                target: qubits[1],
            },
            GateKind::CR3 => Gate::CR3 {
                control: qubits[0],
                target: qubits[1],
                alpha: angles[0],
                beta: angles[1],
                gamma: angles[2],
            },
            GateKind::XXRot => Gate::XXRot {
                a: qubits[0],
                b: qubits[1],
                theta: angles[0],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Op {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub slots: Vec<ParamSlot>,
}

/// Flat index of an angle slot across the whole circuit, in op order.
pub type SlotId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit", into = "RawCircuit")]
pub struct Circuit {
    n_qubits: usize,
    n_trainable: usize,
    input_dim: usize,
    ops: Vec<Op>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    n_qubits: usize,
    #[serde(default)]
    n_trainable: usize,
    #[serde(default)]
    input_dim: usize,
    #[serde(default)]
    ops: Vec<Op>,
}

impl TryFrom<RawCircuit> for Circuit {
    type Error = Error;

    fn try_from(raw: RawCircuit) -> Result<Self> {
        let mut c = Circuit::new(raw.n_qubits, raw.n_trainable, raw.input_dim)?;
        for op in raw.ops {
            c.push(op.kind, &op.qubits, &op.slots)?;
        }
        Ok(c)
    }
}

impl From<Circuit> for RawCircuit {
    fn from(c: Circuit) -> Self {
        RawCircuit {
            n_qubits: c.n_qubits,
            n_trainable: c.n_trainable,
            input_dim: c.input_dim,
            ops: c.ops,
        }
    }
}

impl Circuit {
    /// Empty circuit; `run` on it yields `|0…0⟩`.
    pub fn new(n_qubits: usize, n_trainable: usize, input_dim: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > crate::simulator::MAX_QUBITS {
            return Err(Error::Capacity {
                requested: n_qubits,
                max: crate::simulator::MAX_QUBITS,
            });
        }
        Ok(Self {
            n_qubits,
            n_trainable,
            input_dim,
            ops: Vec::new(),
        })
    }

    pub fn push(&mut self, kind: GateKind, qubits: &[usize], slots: &[ParamSlot]) -> Result<()> {
        if qubits.len() != kind.arity() {
            return Err(Error::Argument(format!(
                "{kind:?} acts on {} qubit(s), got {}",
                kind.arity(),
                qubits.len()
            )));
        }
        if slots.len() != kind.n_angles() {
            return Err(Error::Argument(format!(
                "{kind:?} takes {} angle(s), got {}",
                kind.n_angles(),
                slots.len()
            )));
        }
        for &q in qubits {
            if q >= self.n_qubits {
                return Err(Error::QubitIndex {
                    index: q,
                    n_qubits: self.n_qubits,
                });
            }
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(Error::Argument(format!(
                "{kind:?} needs distinct qubits, got {} twice",
                qubits[0]
            )));
        }
        for slot in slots {
            match *slot {
                ParamSlot::Trainable(i) if i >= self.n_trainable => {
                    return Err(Error::Argument(format!(
                        "trainable index {i} exceeds parameter count {}",
                        self.n_trainable
                    )))
                }
                ParamSlot::Data { index, .. } if index >= self.input_dim => {
                    return Err(Error::Argument(format!(
                        "data index {index} exceeds input dimension {}",
                        self.input_dim
                    )))
                }
                _ => {}
            }
        }
        self.ops.push(Op {
            kind,
            qubits: qubits.to_vec(),
            slots: slots.to_vec(),
        });
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_trainable(&self) -> usize {
        self.n_trainable
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn n_slots(&self) -> usize {
        self.ops.iter().map(|op| op.slots.len()).sum()
    }

    /// `(slot id, op index, angle index within op, binding)` for every angle.
    pub fn slots(&self) -> impl Iterator<Item = (SlotId, usize, usize, &ParamSlot)> + '_ {
        self.ops
            .iter()
            .enumerate()
            .flat_map(|(k, op)| op.slots.iter().enumerate().map(move |(a, s)| (k, a, s)))
            .enumerate()
            .map(|(id, (k, a, s))| (id, k, a, s))
    }

    fn check_lengths(&self, inputs: &[f64], params: &[f64]) -> Result<()> {
        if inputs.len() != self.input_dim {
            return Err(Error::Argument(format!(
                "expected {} input components, got {}",
                self.input_dim,
                inputs.len()
            )));
        }
        if params.len() != self.n_trainable {
            return Err(Error::Argument(format!(
                "expected {} trainable parameters, got {}",
                self.n_trainable,
                params.len()
            )));
        }
        Ok(())
    }

    /// Resolved angle of every slot, flat in slot order.
    pub fn resolve_angles(&self, inputs: &[f64], params: &[f64]) -> Result<Vec<f64>> {
        self.check_lengths(inputs, params)?;
        let mut angles = Vec::with_capacity(self.n_slots());
        for op in &self.ops {
            for slot in &op.slots {
                angles.push(match *slot {
                    ParamSlot::Fixed(v) => v,
                    ParamSlot::Trainable(i) => params[i],
                    ParamSlot::Data { index, map } => {
                        let x = if map.is_bounded_domain() {
                            clamp_input(index, inputs[index])?
                        } else {
                            inputs[index]
                        };
                        map.apply(x)
                    }
                });
            }
        }
        Ok(angles)
    }

    /// Runs from `|0…0⟩` with already-resolved angles.
    pub fn run_resolved(&self, angles: &[f64]) -> Result<Statevector> {
        if angles.len() != self.n_slots() {
            return Err(Error::Argument(format!(
                "expected {} resolved angles, got {}",
                self.n_slots(),
                angles.len()
            )));
        }
        let mut state = Statevector::zero(self.n_qubits)?;
        let mut offset = 0;
        for op in &self.ops {
            let n = op.slots.len();
            state.apply(&op.kind.gate(&op.qubits, &angles[offset..offset + n]))?;
            offset += n;
        }
        Ok(state)
    }
}

/// Clamps shot-noise overshoot back into `[-1, 1]`; rejects anything further out.
pub fn clamp_input(index: usize, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + INPUT_SLACK {
        return Err(Error::Domain { index, value: x });
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Runs `circuit` on `|0…0⟩` with inputs passed through their data maps.
pub fn run(circuit: &Circuit, inputs: &[f64], params: &[f64]) -> Result<Statevector> {
    let angles = circuit.resolve_angles(inputs, params)?;
    circuit.run_resolved(&angles)
}

/// Product encoding with tensorial replication: component `k` is written onto
/// qubits `k·copies .. (k+1)·copies`, each receiving `RY(arcsin x_k)` followed
/// by `RZ(arccos x_k²)`.
pub fn product_encoder(input_dim: usize, copies_per_component: usize) -> Result<Circuit> {
    if input_dim == 0 || copies_per_component == 0 {
        return Err(Error::Argument(
            "product encoder needs input_dim >= 1 and copies >= 1".into(),
        ));
    }
    let mut c = Circuit::new(input_dim * copies_per_component, 0, input_dim)?;
    for k in 0..input_dim {
        for i in 0..copies_per_component {
            let q = k * copies_per_component + i;
            c.push(
                GateKind::Ry,
                &[q],
                &[ParamSlot::Data {
                    index: k,
                    map: DataMap::Arcsin,
                }],
            )?;
            c.push(
                GateKind::Rz,
                &[q],
                &[ParamSlot::Data {
                    index: k,
                    map: DataMap::ArccosSquare,
                }],
            )?;
        }
    }
    Ok(c)
}

/// `RY(θ₀)` on qubit 0, `RY(θ₁)` on qubit 1, then `XXROT(θ₂)`.
pub fn generator_ansatz_2q() -> Circuit {
    let mut c = Circuit::new(2, 3, 0).expect("2 qubits is in range");
    c.push(GateKind::Ry, &[0], &[ParamSlot::Trainable(0)])
        .expect("valid op");
    c.push(GateKind::Ry, &[1], &[ParamSlot::Trainable(1)])
        .expect("valid op");
    c.push(GateKind::XXRot, &[0, 1], &[ParamSlot::Trainable(2)])
        .expect("valid op");
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entangler {
    CR3,
    CPhase,
}

pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(target, control)` of the two-qubit gates of a `B(n, r)` block:
/// `t_j = (jr − r) mod n`, `c_j = jr mod n` for `j = 1..=n/gcd(n, r)`.
pub fn b_block_pairs(n: usize, r: usize) -> Vec<(usize, usize)> {
    (1..=n / gcd(n, r))
        .map(|j| ((j * r - r) % n, (j * r) % n))
        .collect()
}

/// `B(n, r)` block: an `R3` layer on every qubit, `n/gcd(n, r)` entangling
/// gates of range `r`, then optionally an `RX` layer.
pub fn b_block(n: usize, r: usize, entangler: Entangler, final_x_layer: bool) -> Result<Circuit> {
    if n < 2 {
        return Err(Error::Argument(format!("B-block needs n >= 2, got {n}")));
    }
    if r == 0 || r >= n {
        return Err(Error::Argument(format!(
            "B-block range must satisfy 1 <= r < n, got r = {r}, n = {n}"
        )));
    }
    let pairs = b_block_pairs(n, r);
    let per_gate = match entangler {
        Entangler::CR3 => 3,
        Entangler::CPhase => 1,
    };
    let n_trainable = 3 * n + per_gate * pairs.len() + if final_x_layer { n } else { 0 };
    let mut c = Circuit::new(n, n_trainable, 0)?;
    let mut next = 0;
    let mut take = |k: usize| {
        let slots: Vec<ParamSlot> = (next..next + k).map(ParamSlot::Trainable).collect();
        next += k;
        slots
    };
    for q in 0..n {
        c.push(GateKind::R3, &[q], &take(3))?;
    }
    for &(t, ctl) in &pairs {
        match entangler {
            Entangler::CR3 => c.push(GateKind::CR3, &[ctl, t], &take(3))?,
            Entangler::CPhase => c.push(GateKind::CPhase, &[ctl, t], &take(1))?,
        }
    }
    if final_x_layer {
        for q in 0..n {
            c.push(GateKind::Rx, &[q], &take(1))?;
        }
    }
    Ok(c)
}

/// Encoder ops followed by ansatz ops. The ansatz's trainable and data indices
/// are shifted past the encoder's so the two index spaces stay disjoint.
pub fn compose(encoder: &Circuit, ansatz: &Circuit) -> Result<Circuit> {
    if encoder.n_qubits != ansatz.n_qubits {
        return Err(Error::Composition {
            left: encoder.n_qubits,
            right: ansatz.n_qubits,
        });
    }
    let mut out = encoder.clone();
    out.n_trainable += ansatz.n_trainable;
    out.input_dim += ansatz.input_dim;
    for op in &ansatz.ops {
        let slots: Vec<ParamSlot> = op
            .slots
            .iter()
            .map(|s| match *s {
                ParamSlot::Trainable(i) => ParamSlot::Trainable(i + encoder.n_trainable),
                ParamSlot::Data { index, map } => ParamSlot::Data {
                    index: index + encoder.input_dim,
                    map,
                },
                fixed => fixed,
            })
            .collect();
        out.ops.push(Op {
            kind: op.kind,
            qubits: op.qubits.clone(),
            slots,
        });
    }
    Ok(out)
}
