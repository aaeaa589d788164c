//! Analytic derivatives of circuit expectation values by the parameter-shift rule.
//!
//! For an angle entering as `exp(-iθG)` with `G = Σ_k c_k P_k` a sum of
//! commuting Pauli strings, `d⟨O⟩/dθ = Σ_k c_k [⟨O⟩_k(+π/2) − ⟨O⟩_k(−π/2)]`,
//! where `⟨O⟩_k(s)` is the expectation with `R_{P_k}(s)` inserted next to the
//! gate. Single Pauli rotations have one term with `c = 1/2`, which is the
//! same as shifting the angle itself. `CPHASE` is `exp(iθ|11⟩⟨11|)`, whose
//! generator has a unit eigenvalue gap, so the same two-point rule applies
//! to its angle. Controlled rotations inside `CR3` split as
//! `½|1⟩⟨1|_c ⊗ V_t = ¼ V_t − ¼ Z_c V_t`, giving four evaluations per angle.

use std::f64::consts::FRAC_PI_2;

use crate::circuits::{Circuit, GateKind, ParamSlot, SlotId};
use crate::error::{Error, Result};
use crate::simulator::{Mode, Pauli, PauliString, Statevector};

/// Inputs closer than this to `±1` have unbounded encoder derivatives.
pub const BOUNDARY_MARGIN: f64 = 1e-9;

/// Dense row-major matrix: rows are observables, columns are parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl Jacobian {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] += v;
    }

    /// `Jᵀ·v`, the vector-Jacobian product used in reverse mode.
    pub fn vjp(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "cotangent length must equal row count");
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &j) in out.iter_mut().zip(self.row(i)) {
                *o += vi * j;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shift {
    /// Shift the slot's resolved angle.
    Angle,
    /// Insert `R_P(±π/2)` after constituent `constituent` of the op.
    Insert {
        constituent: usize,
        pauli: PauliString,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coeff: f64,
    shift: Shift,
}

fn shift_terms(kind: GateKind, qubits: &[usize], angle_index: usize) -> Vec<Term> {
    match kind {
        GateKind::CR3 => {
            let (control, target) = (qubits[0], qubits[1]);
            let axis = if angle_index == 1 { Pauli::Y } else { Pauli::Z };
            let on_target = PauliString::single(target, axis);
            let with_control = PauliString::new(vec![(control, Pauli::Z), (target, axis)])
                .expect("control and target are distinct");
            vec![
                Term {
                    coeff: 0.25,
                    shift: Shift::Insert {
                        constituent: angle_index,
                        pauli: on_target,
                    },
                },
                Term {
                    coeff: -0.25,
                    shift: Shift::Insert {
                        constituent: angle_index,
                        pauli: with_control,
                    },
                },
            ]
        }
        _ => vec![Term {
            coeff: 0.5,
            shift: Shift::Angle,
        }],
    }
}

struct Insertion<'a> {
    op: usize,
    constituent: usize,
    pauli: &'a PauliString,
    angle: f64,
}

fn run_with_insertion(
    circuit: &Circuit,
    angles: &[f64],
    insertion: Option<&Insertion<'_>>,
) -> Result<Statevector> {
    let Some(ins) = insertion else {
        return circuit.run_resolved(angles);
    };
    let mut state = Statevector::zero(circuit.n_qubits())?;
    let mut offset = 0;
    for (k, op) in circuit.ops().iter().enumerate() {
        let n = op.slots.len();
        let a = &angles[offset..offset + n];
        offset += n;
        if k != ins.op {
            state.apply(&op.kind.gate(&op.qubits, a))?;
            continue;
        }
        match op.kind {
            GateKind::CR3 => {
                let axes = [Pauli::Z, Pauli::Y, Pauli::Z];
                for (c, (&axis, &angle)) in axes.iter().zip(a).enumerate() {
                    state.apply_controlled_rotation(op.qubits[0], op.qubits[1], axis, angle)?;
                    if c == ins.constituent {
                        state.apply_pauli_rotation(ins.pauli, ins.angle)?;
                    }
                }
            }
            _ => {
                state.apply(&op.kind.gate(&op.qubits, a))?;
                state.apply_pauli_rotation(ins.pauli, ins.angle)?;
            }
        }
    }
    Ok(state)
}

/// Derivative of every observable with respect to the resolved angle of `slot`.
/// Shots mode uses stream `stream_base + i` for observable `i`, identically
/// for every shifted evaluation.
fn slot_derivatives(
    circuit: &Circuit,
    angles: &[f64],
    slot: SlotId,
    paulis: &[PauliString],
    mode: Mode,
    stream_base: u64,
) -> Result<Vec<f64>> {
    let (op_index, angle_index) = circuit
        .slots()
        .find(|&(id, ..)| id == slot)
        .map(|(_, k, a, _)| (k, a))
        .ok_or_else(|| Error::Argument(format!("slot {slot} does not exist")))?;
    let op = &circuit.ops()[op_index];
    let mut out = vec![0.0; paulis.len()];
    let mut shifted = angles.to_vec();
    for term in shift_terms(op.kind, &op.qubits, angle_index) {
        for (sign, s) in [(1.0, FRAC_PI_2), (-1.0, -FRAC_PI_2)] {
            let state = match &term.shift {
                Shift::Angle => {
                    shifted[slot] = angles[slot] + s;
                    let st = circuit.run_resolved(&shifted)?;
                    shifted[slot] = angles[slot];
                    st
                }
                Shift::Insert { constituent, pauli } => run_with_insertion(
                    circuit,
                    angles,
                    Some(&Insertion {
                        op: op_index,
                        constituent: *constituent,
                        pauli,
                        angle: s,
                    }),
                )?,
            };
            for (i, p) in paulis.iter().enumerate() {
                let v = mode.measure(&state, p, stream_base + i as u64)?;
                out[i] += sign * term.coeff * v;
            }
        }
    }
    Ok(out)
}

/// Rejects inputs where a bounded-domain encoder map has no finite derivative.
pub fn check_differentiable_inputs(circuit: &Circuit, inputs: &[f64]) -> Result<()> {
    for (_, _, _, slot) in circuit.slots() {
        if let ParamSlot::Data { index, map } = *slot {
            let x = inputs.get(index).copied().unwrap_or(0.0);
            if map.is_bounded_domain() && x.abs() >= 1.0 - BOUNDARY_MARGIN {
                return Err(Error::DomainBoundary { index, value: x });
            }
        }
    }
    Ok(())
}

/// Which Jacobians [`jacobians`] should assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wanted {
    pub params: bool,
    pub inputs: bool,
}

/// Parameter and input Jacobians of `paulis` in one sweep over the slots.
/// Skipped Jacobians come back with zero columns.
pub fn jacobians(
    circuit: &Circuit,
    paulis: &[PauliString],
    inputs: &[f64],
    params: &[f64],
    mode: Mode,
    wanted: Wanted,
) -> Result<(Jacobian, Jacobian)> {
    let angles = circuit.resolve_angles(inputs, params)?;
    if wanted.inputs {
        check_differentiable_inputs(circuit, inputs)?;
    }
    let mut jp = Jacobian::zeros(
        paulis.len(),
        if wanted.params {
            circuit.n_trainable()
        } else {
            0
        },
    );
    let mut jx = Jacobian::zeros(
        paulis.len(),
        if wanted.inputs {
            circuit.input_dim()
        } else {
            0
        },
    );
    let m = paulis.len() as u64;
    for (id, _, _, slot) in circuit.slots() {
        let (column, scale, target) = match *slot {
            ParamSlot::Trainable(j) if wanted.params => (j, 1.0, &mut jp),
            ParamSlot::Data { index, map } if wanted.inputs => {
                (index, map.derivative(inputs[index]), &mut jx)
            }
            _ => continue,
        };
        let d = slot_derivatives(circuit, &angles, id, paulis, mode, (id as u64 + 1) * m)?;
        for (i, di) in d.into_iter().enumerate() {
            target.add(i, column, scale * di);
        }
    }
    Ok((jp, jx))
}

/// `½[⟨P⟩(angle + π/2) − ⟨P⟩(angle − π/2)]`, generalized per gate kind as
/// described in the module docs.
pub fn param_shift_derivative(
    circuit: &Circuit,
    pauli: &PauliString,
    inputs: &[f64],
    params: &[f64],
    slot: SlotId,
) -> Result<f64> {
    let angles = circuit.resolve_angles(inputs, params)?;
    let d = slot_derivatives(
        circuit,
        &angles,
        slot,
        std::slice::from_ref(pauli),
        Mode::Exact,
        0,
    )?;
    Ok(d[0])
}

/// `∂⟨P⟩/∂θ_j` for every trainable parameter; repeated uses of a parameter sum.
pub fn param_gradient(
    circuit: &Circuit,
    pauli: &PauliString,
    inputs: &[f64],
    params: &[f64],
) -> Result<Vec<f64>> {
    let (jp, _) = jacobians(
        circuit,
        std::slice::from_ref(pauli),
        inputs,
        params,
        Mode::Exact,
        Wanted {
            params: true,
            inputs: false,
        },
    )?;
    Ok(jp.row(0).to_vec())
}

/// `∂⟨P⟩/∂x_k`: shift-rule derivative of each data-bound slot times the
/// derivative of its encoder map.
pub fn input_gradient(
    circuit: &Circuit,
    pauli: &PauliString,
    inputs: &[f64],
    params: &[f64],
) -> Result<Vec<f64>> {
    let (_, jx) = jacobians(
        circuit,
        std::slice::from_ref(pauli),
        inputs,
        params,
        Mode::Exact,
        Wanted {
            params: false,
            inputs: true,
        },
    )?;
    Ok(jx.row(0).to_vec())
}

/// Row `i` is [`param_gradient`] for `paulis[i]`.
pub fn jacobian(
    circuit: &Circuit,
    paulis: &[PauliString],
    inputs: &[f64],
    params: &[f64],
) -> Result<Jacobian> {
    let (jp, _) = jacobians(
        circuit,
        paulis,
        inputs,
        params,
        Mode::Exact,
        Wanted {
            params: true,
            inputs: false,
        },
    )?;
    Ok(jp)
}

/// Shot-estimated parameter gradient; unbiased for the exact one.
pub fn param_gradient_shots(
    circuit: &Circuit,
    pauli: &PauliString,
    inputs: &[f64],
    params: &[f64],
    shots: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let (jp, _) = jacobians(
        circuit,
        std::slice::from_ref(pauli),
        inputs,
        params,
        Mode::Shots { shots, seed },
        Wanted {
            params: true,
            inputs: false,
        },
    )?;
    Ok(jp.row(0).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{
        b_block, compose, generator_ansatz_2q, product_encoder, run, DataMap, Entangler,
    };
    use std::f64::consts::FRAC_PI_2;

    fn ry_circuit() -> Circuit {
        let mut c = Circuit::new(1, 1, 0).unwrap();
        c.push(GateKind::Ry, &[0], &[ParamSlot::Trainable(0)])
            .unwrap();
        c
    }

    fn expval(c: &Circuit, p: &PauliString, x: &[f64], t: &[f64]) -> f64 {
        run(c, x, t).unwrap().expectation(p).unwrap()
    }

    fn central_param(c: &Circuit, p: &PauliString, x: &[f64], t: &[f64], j: usize) -> f64 {
        let h = 1e-5;
        let mut tp = t.to_vec();
        let mut tm = t.to_vec();
        tp[j] += h;
        tm[j] -= h;
        (expval(c, p, x, &tp) - expval(c, p, x, &tm)) / (2.0 * h)
    }

    #[test]
    fn ry_identity() {
        let c = ry_circuit();
        let z = PauliString::z(0);
        let d = param_shift_derivative(&c, &z, &[], &[FRAC_PI_2], 0).unwrap();
        assert!((d + 1.0).abs() < 1e-12);
        let d = param_shift_derivative(&c, &z, &[], &[0.0], 0).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn generator_slot_matches_finite_difference() {
        let g = compose(&product_encoder(1, 2).unwrap(), &generator_ansatz_2q()).unwrap();
        let z0 = PauliString::z(0);
        let theta = [2.3, 2.3, 1.0];
        let slot = g.n_slots() - 1;
        let d = param_shift_derivative(&g, &z0, &[0.3], &theta, slot).unwrap();
        let fd = central_param(&g, &z0, &[0.3], &theta, 2);
        assert!((d - fd).abs() < 1e-6, "{d} vs {fd}");
    }

    #[test]
    fn empty_and_identity_gradients() {
        let enc = product_encoder(1, 2).unwrap();
        assert!(param_gradient(&enc, &PauliString::z(0), &[0.2], &[])
            .unwrap()
            .is_empty());
        let g = compose(&enc, &generator_ansatz_2q()).unwrap();
        let grad = param_gradient(&g, &PauliString::z(0), &[0.0], &[0.0; 3]).unwrap();
        assert!(grad.iter().all(|v| v.abs() < 1e-12), "{grad:?}");
    }

    #[test]
    fn shared_parameter_accumulates() {
        let mut c = Circuit::new(1, 1, 0).unwrap();
        c.push(GateKind::Ry, &[0], &[ParamSlot::Trainable(0)])
            .unwrap();
        c.push(GateKind::Ry, &[0], &[ParamSlot::Trainable(0)])
            .unwrap();
        // ⟨Z⟩ = cos 2θ
        let g = param_gradient(&c, &PauliString::z(0), &[], &[0.4]).unwrap();
        assert!((g[0] + 2.0 * (0.8f64).sin()).abs() < 1e-12);
    }

    #[test]
    fn cr3_and_cphase_match_finite_difference() {
        for entangler in [Entangler::CR3, Entangler::CPhase] {
            let b = b_block(3, 1, entangler, true).unwrap();
            let params: Vec<f64> = (0..b.n_trainable())
                .map(|i| 0.37 * i as f64 - 1.1)
                .collect();
            for p in [PauliString::z(0), "X1*Y2".parse().unwrap()] {
                let grad = param_gradient(&b, &p, &[], &params).unwrap();
                for (j, g) in grad.iter().enumerate() {
                    let fd = central_param(&b, &p, &[], &params, j);
                    assert!((g - fd).abs() < 1e-6, "{entangler:?} {j}: {g} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn arcsin_input_gradient() {
        let mut c = Circuit::new(1, 0, 1).unwrap();
        c.push(
            GateKind::Ry,
            &[0],
            &[ParamSlot::Data {
                index: 0,
                map: DataMap::Arcsin,
            }],
        )
        .unwrap();
        let z = PauliString::z(0);
        assert!(input_gradient(&c, &z, &[0.0], &[]).unwrap()[0].abs() < 1e-12);
        let g = input_gradient(&c, &z, &[0.5], &[]).unwrap()[0];
        assert!((g + 0.5 / 0.75f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            input_gradient(&c, &z, &[1.0], &[]),
            Err(Error::DomainBoundary { index: 0, .. })
        ));
    }

    #[test]
    fn jacobian_shapes() {
        let g = compose(&product_encoder(1, 2).unwrap(), &generator_ansatz_2q()).unwrap();
        let j = jacobian(&g, &[], &[0.1], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((j.rows(), j.cols()), (0, 3));
        let p = PauliString::z(0);
        let j = jacobian(&g, std::slice::from_ref(&p), &[0.1], &[1.0, 2.0, 3.0]).unwrap();
        let row = param_gradient(&g, &p, &[0.1], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(j.row(0), row.as_slice());
    }

    #[test]
    fn vjp_is_transpose_product() {
        let mut j = Jacobian::zeros(2, 3);
        for i in 0..2 {
            for k in 0..3 {
                j.add(i, k, (i * 3 + k) as f64);
            }
        }
        assert_eq!(j.vjp(&[1.0, 2.0]), vec![6.0, 9.0, 12.0]);
    }
}
