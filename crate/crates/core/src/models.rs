//! Generator, discriminators and the fixed data source.
//!
//! Every model exposes its trainable state as a list of named arrays. The
//! same arrays drive checkpoints, optimizer updates and tape recording: a
//! model's `record` method takes one tape node per array, in array order.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, QuantumNodeSpec, Tape};
use crate::circuits::{
    b_block, clamp_input, compose, generator_ansatz_2q, product_encoder, run, Circuit, Entangler,
};
use crate::error::{Error, Result};
use crate::simulator::{Mode, PauliString};

/// Parameters of the generator that produced the target distribution.
pub const DATA_SOURCE_PARAMS: [f64; 3] = [2.48, 2.52, 2.0];
/// Initial generator parameters of the reference experiment.
pub const GENERATOR_INIT_PARAMS: [f64; 3] = [2.3, 2.3, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            name: name.into(),
            shape,
            data,
        }
    }
}

/// Models with named, fixed-shape parameter arrays.
pub trait Parameterized {
    fn arrays(&self) -> Vec<NamedArray>;

    /// Overwrites every array's data; names and shapes must match `arrays()`.
    fn set_array_data(&mut self, data: &[Vec<f64>]) -> Result<()>;

    fn load_arrays(&mut self, arrays: &[NamedArray]) -> Result<()> {
        let mine = self.arrays();
        if mine.len() != arrays.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter arrays, got {}",
                mine.len(),
                arrays.len()
            )));
        }
        for (a, b) in mine.iter().zip(arrays) {
            if a.name != b.name || a.shape != b.shape || b.data.len() != a.data.len() {
                return Err(Error::Shape(format!(
                    "array '{}' {:?} does not match '{}' {:?}",
                    b.name, b.shape, a.name, a.shape
                )));
            }
        }
        let data: Vec<Vec<f64>> = arrays.iter().map(|a| a.data.clone()).collect();
        self.set_array_data(&data)
    }
}

fn check_lengths(expected: &[usize], data: &[Vec<f64>]) -> Result<()> {
    if expected.len() != data.len() || expected.iter().zip(data).any(|(&n, d)| n != d.len()) {
        return Err(Error::Shape(format!(
            "parameter arrays of lengths {:?} expected, got {:?}",
            expected,
            data.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Identity,
    Tanh,
}

/// Classical map `h(W·P + b)` applied to the decoded expectation values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostProcessing {
    pub outputs: usize,
    pub inputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl PostProcessing {
    pub fn new(
        outputs: usize,
        inputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != outputs * inputs || bias.len() != outputs || outputs == 0 {
            return Err(Error::Shape(format!(
                "post-processing {outputs}×{inputs} with {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            outputs,
            inputs,
            weights,
            bias,
            activation,
        })
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|i| {
                let row = &self.weights[i * self.inputs..(i + 1) * self.inputs];
                let a: f64 = row.iter().zip(p).map(|(w, x)| w * x).sum::<f64>() + self.bias[i];
                match self.activation {
                    Activation::Identity => a,
                    Activation::Tanh => a.tanh(),
                }
            })
            .collect()
    }
}

/// Quantum encoder and variational circuit measured on a set of Pauli
/// strings, optionally followed by classical post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    encoder: Circuit,
    ansatz: Circuit,
    circuit: Arc<Circuit>,
    params: Vec<f64>,
    paulis: Vec<PauliString>,
    postproc: Option<PostProcessing>,
}

impl Generator {
    pub fn new(
        encoder: Circuit,
        ansatz: Circuit,
        params: Vec<f64>,
        paulis: Vec<PauliString>,
        postproc: Option<PostProcessing>,
    ) -> Result<Self> {
        if encoder.n_trainable() != 0 {
            return Err(Error::Argument(
                "the encoder must not carry trainable parameters".into(),
            ));
        }
        let circuit = compose(&encoder, &ansatz)?;
        if params.len() != circuit.n_trainable() {
            return Err(Error::Shape(format!(
                "ansatz has {} parameters, got {}",
                circuit.n_trainable(),
                params.len()
            )));
        }
        if paulis.is_empty() {
            return Err(Error::Argument(
                "generator needs at least one observable".into(),
            ));
        }
        for p in &paulis {
            if p.max_qubit().is_some_and(|q| q >= circuit.n_qubits()) {
                return Err(Error::QubitIndex {
                    index: p.max_qubit().unwrap_or(0),
                    n_qubits: circuit.n_qubits(),
                });
            }
        }
        if let Some(pp) = &postproc {
            if pp.inputs != paulis.len() {
                return Err(Error::Shape(format!(
                    "post-processing expects {} inputs, generator decodes {}",
                    pp.inputs,
                    paulis.len()
                )));
            }
        }
        Ok(Self {
            encoder,
            ansatz,
            circuit: Arc::new(circuit),
            params,
            paulis,
            postproc,
        })
    }

    /// Two-qubit generator of the reference experiment: scalar noise copied
    /// onto both qubits, `RY ⊗ RY` then `XXROT`, decoding `⟨Z₀⟩` directly.
    pub fn reference(params: Vec<f64>) -> Result<Self> {
        Self::reference_with_observable(params, PauliString::z(0))
    }

    pub fn reference_with_observable(params: Vec<f64>, pauli: PauliString) -> Result<Self> {
        Self::new(
            product_encoder(1, 2)?,
            generator_ansatz_2q(),
            params,
            vec![pauli],
            None,
        )
    }

    pub fn encoder(&self) -> &Circuit {
        &self.encoder
    }

    pub fn ansatz(&self) -> &Circuit {
        &self.ansatz
    }

    pub fn circuit(&self) -> &Arc<Circuit> {
        &self.circuit
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn paulis(&self) -> &[PauliString] {
        &self.paulis
    }

    pub fn postproc(&self) -> Option<&PostProcessing> {
        self.postproc.as_ref()
    }

    pub fn noise_dim(&self) -> usize {
        self.circuit.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.postproc
            .as_ref()
            .map_or(self.paulis.len(), |pp| pp.outputs)
    }

    /// Decoded expectation values `P` before post-processing.
    pub fn expectations(&self, z: &[f64], mode: Mode) -> Result<Vec<f64>> {
        if z.len() != self.noise_dim() {
            return Err(Error::Shape(format!(
                "noise vector of length {} for noise dimension {}",
                z.len(),
                self.noise_dim()
            )));
        }
        let state = run(&self.circuit, z, &self.params)?;
        self.paulis
            .iter()
            .enumerate()
            .map(|(i, p)| mode.measure(&state, p, i as u64))
            .collect()
    }

    /// One sample `x_Fake` for noise `z`.
    pub fn generate(&self, z: &[f64], mode: Mode) -> Result<Vec<f64>> {
        let p = self.expectations(z, mode)?;
        Ok(match &self.postproc {
            Some(pp) => pp.apply(&p),
            None => p,
        })
    }

    /// Records `x_Fake(z)` on the tape. `params` holds one node per array.
    pub fn record(
        &self,
        tape: &mut Tape,
        z: NodeId,
        params: &[NodeId],
        mode: Mode,
    ) -> Result<NodeId> {
        let q = tape.quantum(QuantumNodeSpec {
            circuit: Arc::clone(&self.circuit),
            paulis: self.paulis.clone(),
            input: z,
            params: params[0],
            mode,
        })?;
        let Some(pp) = &self.postproc else {
            return Ok(q);
        };
        let wx = tape.matvec(params[1], q, pp.outputs, pp.inputs)?;
        let a = tape.bias_add(wx, params[2])?;
        match pp.activation {
            Activation::Identity => Ok(a),
            Activation::Tanh => tape.tanh(a),
        }
    }
}

impl Parameterized for Generator {
    fn arrays(&self) -> Vec<NamedArray> {
        let mut out = vec![NamedArray::new(
            "theta_g",
            vec![self.params.len()],
            self.params.clone(),
        )];
        if let Some(pp) = &self.postproc {
            out.push(NamedArray::new(
                "omega_w",
                vec![pp.outputs, pp.inputs],
                pp.weights.clone(),
            ));
            out.push(NamedArray::new(
                "omega_b",
                vec![pp.outputs],
                pp.bias.clone(),
            ));
        }
        out
    }

    fn set_array_data(&mut self, data: &[Vec<f64>]) -> Result<()> {
        let lens: Vec<usize> = self.arrays().iter().map(|a| a.data.len()).collect();
        check_lengths(&lens, data)?;
        self.params = data[0].clone();
        if let Some(pp) = &mut self.postproc {
            pp.weights = data[1].clone();
            pp.bias = data[2].clone();
        }
        Ok(())
    }
}

/// Frozen generator evaluated exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSource {
    generator: Generator,
}

impl DataSource {
    pub fn new(generator: Generator) -> Self {
        Self { generator }
    }

    /// Target distribution of the reference experiment: parameters
    /// `[2.48, 2.52, 2.0]`, decoding `⟨X₀⟩`.
    pub fn reference() -> Self {
        Self::new(
            Generator::reference_with_observable(DATA_SOURCE_PARAMS.to_vec(), PauliString::x(0))
                .expect("reference data source is well formed"),
        )
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn noise_dim(&self) -> usize {
        self.generator.noise_dim()
    }

    pub fn sample(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.generator.generate(z, Mode::Exact)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Feed-forward network with tanh hidden layers and a sigmoid output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalDiscriminator {
    layers: Vec<DenseLayer>,
}

impl ClassicalDiscriminator {
    /// `sizes = [N, h₁, …, 1]`, weights and biases uniform in `±1/√fan_in`.
    pub fn new_random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        Self::validate_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = 1.0 / (inputs as f64).sqrt();
                let mut draw = |n: usize| -> Vec<f64> {
                    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
                };
                DenseLayer {
                    inputs,
                    outputs,
                    weights: draw(inputs * outputs),
                    bias: draw(outputs),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::validate_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| DenseLayer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self { layers })
    }

    fn validate_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap_or(&0) != 1 {
            return Err(Error::Shape(format!(
                "layer sizes {sizes:?} must be positive and end in a single output"
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "discriminator input of length {} for input size {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            h = (0..layer.outputs)
                .map(|i| {
                    let row = &layer.weights[i * layer.inputs..(i + 1) * layer.inputs];
                    let a = row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + layer.bias[i];
                    if k == last {
                        1.0 / (1.0 + (-a).exp())
                    } else {
                        a.tanh()
                    }
                })
                .collect();
        }
        Ok(h[0])
    }

    pub fn record(&self, tape: &mut Tape, x: NodeId, params: &[NodeId]) -> Result<NodeId> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let wx = tape.matvec(params[2 * k], h, layer.outputs, layer.inputs)?;
            let a = tape.bias_add(wx, params[2 * k + 1])?;
            h = if k == last {
                tape.sigmoid(a)?
            } else {
                tape.tanh(a)?
            };
        }
        Ok(h)
    }
}

impl Parameterized for ClassicalDiscriminator {
    fn arrays(&self) -> Vec<NamedArray> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(k, l)| {
                [
                    NamedArray::new(
                        format!("layer{k}.weight"),
                        vec![l.outputs, l.inputs],
                        l.weights.clone(),
                    ),
                    NamedArray::new(format!("layer{k}.bias"), vec![l.outputs], l.bias.clone()),
                ]
            })
            .collect()
    }

    fn set_array_data(&mut self, data: &[Vec<f64>]) -> Result<()> {
        let lens: Vec<usize> = self
            .layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        check_lengths(&lens, data)?;
        for (k, layer) in self.layers.iter_mut().enumerate() {
            layer.weights = data[2 * k].clone();
            layer.bias = data[2 * k + 1].clone();
        }
        Ok(())
    }
}

/// Encoder plus variational block read out as `p_Real = (1 + ⟨Z_p⟩)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumDiscriminator {
    encoder: Circuit,
    ansatz: Circuit,
    circuit: Arc<Circuit>,
    params: Vec<f64>,
    readout: usize,
}

impl QuantumDiscriminator {
    pub fn new(
        encoder: Circuit,
        ansatz: Circuit,
        params: Vec<f64>,
        readout: usize,
    ) -> Result<Self> {
        let circuit = compose(&encoder, &ansatz)?;
        if params.len() != circuit.n_trainable() {
            return Err(Error::Shape(format!(
                "discriminator circuit has {} parameters, got {}",
                circuit.n_trainable(),
                params.len()
            )));
        }
        if readout >= circuit.n_qubits() {
            return Err(Error::QubitIndex {
                index: readout,
                n_qubits: circuit.n_qubits(),
            });
        }
        Ok(Self {
            encoder,
            ansatz,
            circuit: Arc::new(circuit),
            params,
            readout,
        })
    }

    /// Scalar input copied onto three qubits, one `B(3,1)` block with
    /// controlled-phase entanglers and a final `RX` layer, read out on qubit 0.
    pub fn reference(params: Vec<f64>) -> Result<Self> {
        Self::new(
            product_encoder(1, 3)?,
            b_block(3, 1, Entangler::CPhase, true)?,
            params,
            0,
        )
    }

    /// Parameters uniform in `[-π, π)`.
    pub fn random_params<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-PI..PI)).collect()
    }

    pub fn encoder(&self) -> &Circuit {
        &self.encoder
    }

    pub fn ansatz(&self) -> &Circuit {
        &self.ansatz
    }

    pub fn circuit(&self) -> &Arc<Circuit> {
        &self.circuit
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn readout(&self) -> usize {
        self.readout
    }

    pub fn input_dim(&self) -> usize {
        self.circuit.input_dim()
    }

    pub fn observable(&self) -> PauliString {
        PauliString::z(self.readout)
    }

    /// `(1 + ⟨Z_p⟩)/2`. Inputs are clamped into `[-1, 1]` first.
    pub fn probability(&self, x: &[f64], mode: Mode) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "discriminator input of length {} for input size {}",
                x.len(),
                self.input_dim()
            )));
        }
        let x: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| clamp_input(i, v))
            .collect::<Result<_>>()?;
        let state = run(&self.circuit, &x, &self.params)?;
        let z = mode.measure(&state, &self.observable(), 0)?;
        Ok((1.0 + z) / 2.0)
    }

    pub fn record(
        &self,
        tape: &mut Tape,
        x: NodeId,
        params: &[NodeId],
        mode: Mode,
    ) -> Result<NodeId> {
        let z = tape.quantum(QuantumNodeSpec {
            circuit: Arc::clone(&self.circuit),
            paulis: vec![self.observable()],
            input: x,
            params: params[0],
            mode,
        })?;
        let half_z = tape.scale(z, 0.5)?;
        let half = tape.scalar(0.5);
        tape.add(half, half_z)
    }
}

impl Parameterized for QuantumDiscriminator {
    fn arrays(&self) -> Vec<NamedArray> {
        vec![NamedArray::new(
            "theta_d",
            vec![self.params.len()],
            self.params.clone(),
        )]
    }

    fn set_array_data(&mut self, data: &[Vec<f64>]) -> Result<()> {
        check_lengths(&[self.params.len()], data)?;
        self.params = data[0].clone();
        Ok(())
    }
}

/// Inputs to a quantum discriminator are kept this far inside `±1` on the
/// tape so the encoder derivatives stay finite.
pub const TAPE_INPUT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Discriminator {
    Classical(ClassicalDiscriminator),
    Quantum(QuantumDiscriminator),
}

impl Discriminator {
    pub fn input_dim(&self) -> usize {
        match self {
            Discriminator::Classical(d) => d.input_dim(),
            Discriminator::Quantum(d) => d.input_dim(),
        }
    }

    pub fn probability(&self, x: &[f64], mode: Mode) -> Result<f64> {
        match self {
            Discriminator::Classical(d) => d.probability(x),
            Discriminator::Quantum(d) => d.probability(x, mode),
        }
    }

    /// Records `F_D(x)` on the tape; quantum inputs pass through a clamp first.
    pub fn record(
        &self,
        tape: &mut Tape,
        x: NodeId,
        params: &[NodeId],
        mode: Mode,
    ) -> Result<NodeId> {
        match self {
            Discriminator::Classical(d) => d.record(tape, x, params),
            Discriminator::Quantum(d) => {
                let bound = 1.0 - TAPE_INPUT_MARGIN;
                let xc = tape.clamp(x, -bound, bound)?;
                d.record(tape, xc, params, mode)
            }
        }
    }
}

impl Parameterized for Discriminator {
    fn arrays(&self) -> Vec<NamedArray> {
        match self {
            Discriminator::Classical(d) => d.arrays(),
            Discriminator::Quantum(d) => d.arrays(),
        }
    }

    fn set_array_data(&mut self, data: &[Vec<f64>]) -> Result<()> {
        match self {
            Discriminator::Classical(d) => d.set_array_data(data),
            Discriminator::Quantum(d) => d.set_array_data(data),
        }
    }
}

/// Places a model's arrays on the tape, as inputs when `trainable` (returning
/// their bindings) or as constants otherwise.
pub fn place_arrays(
    tape: &mut Tape,
    arrays: &[NamedArray],
    trainable: bool,
    bindings: &mut crate::autodiff::Bindings,
) -> Vec<NodeId> {
    arrays
        .iter()
        .map(|a| {
            if trainable {
                let id = tape.input(a.data.len());
                bindings.insert(id, a.data.clone());
                id
            } else {
                tape.constant(a.data.clone())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Bindings;
    use crate::seed::{named, Stream};

    #[test]
    fn reference_generator_trivial_points() {
        let g = Generator::reference(vec![0.0; 3]).unwrap();
        assert!((g.generate(&[0.0], Mode::Exact).unwrap()[0] - 1.0).abs() < 1e-12);
        let g = Generator::reference(vec![PI, 0.0, 0.0]).unwrap();
        assert!((g.generate(&[0.0], Mode::Exact).unwrap()[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn data_source_is_bounded_and_deterministic() {
        let src = DataSource::reference();
        for k in -10..=10 {
            let z = k as f64 / 10.0;
            let a = src.sample(&[z]).unwrap();
            assert!(a[0].abs() <= 1.0);
            assert_eq!(a, src.sample(&[z]).unwrap());
        }
    }

    #[test]
    fn zero_classical_discriminator_is_half() {
        let d = ClassicalDiscriminator::zeros(&[1, 16, 16, 1]).unwrap();
        for x in [-1.0, 0.0, 0.7] {
            assert_eq!(d.probability(&[x]).unwrap(), 0.5);
        }
        let mut d = ClassicalDiscriminator::zeros(&[1, 1]).unwrap();
        d.set_array_data(&[vec![3.0], vec![0.0]]).unwrap();
        assert_eq!(d.probability(&[0.0]).unwrap(), 0.5);
        assert!(d.probability(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn random_classical_discriminator_in_open_interval() {
        let mut rng = named(7, Stream::Init);
        let d = ClassicalDiscriminator::new_random(&[1, 16, 16, 1], &mut rng).unwrap();
        let p = d.probability(&[0.5]).unwrap();
        assert!(p > 0.0 && p < 1.0);
        for l in d.layers() {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            assert!(l.weights.iter().chain(&l.bias).all(|w| w.abs() <= bound));
        }
        assert!(ClassicalDiscriminator::zeros(&[1, 4, 2]).is_err());
    }

    #[test]
    fn quantum_discriminator_zero_params() {
        let d = QuantumDiscriminator::reference(vec![0.0; 15]).unwrap();
        assert!((d.probability(&[0.0], Mode::Exact).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = named(3, Stream::Init);
        let d = QuantumDiscriminator::reference(QuantumDiscriminator::random_params(15, &mut rng))
            .unwrap();
        for x in [-0.99, -0.3, 0.0, 0.25, 0.9] {
            let p = d.probability(&[x], Mode::Exact).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(d.probability(&[1.5], Mode::Exact).is_err());
    }

    #[test]
    fn record_matches_direct_evaluation() {
        let mut rng = named(5, Stream::Init);
        let qd = QuantumDiscriminator::reference(QuantumDiscriminator::random_params(15, &mut rng))
            .unwrap();
        let cd = ClassicalDiscriminator::new_random(&[1, 4, 1], &mut rng).unwrap();
        for d in [Discriminator::Quantum(qd), Discriminator::Classical(cd)] {
            let mut tape = Tape::new();
            let mut b = Bindings::new();
            let x = tape.constant(vec![0.25]);
            let nodes = place_arrays(&mut tape, &d.arrays(), true, &mut b);
            d.record(&mut tape, x, &nodes, Mode::Exact).unwrap();
            let v = tape.forward(&b).unwrap()[0];
            let direct = d.probability(&[0.25], Mode::Exact).unwrap();
            assert!((v - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn generator_with_postprocessing() {
        let pp =
            PostProcessing::new(2, 1, vec![0.5, -1.0], vec![0.1, 0.0], Activation::Tanh).unwrap();
        let g = Generator::new(
            product_encoder(1, 2).unwrap(),
            generator_ansatz_2q(),
            GENERATOR_INIT_PARAMS.to_vec(),
            vec![PauliString::z(0)],
            Some(pp),
        )
        .unwrap();
        assert_eq!(g.output_dim(), 2);
        let p = g.expectations(&[0.3], Mode::Exact).unwrap()[0];
        let x = g.generate(&[0.3], Mode::Exact).unwrap();
        assert!((x[0] - (0.5 * p + 0.1).tanh()).abs() < 1e-15);
        assert!((x[1] - (-p).tanh()).abs() < 1e-15);
        assert_eq!(g.arrays().len(), 3);
        assert!(Generator::new(
            product_encoder(1, 2).unwrap(),
            generator_ansatz_2q(),
            vec![0.0; 2],
            vec![PauliString::z(0)],
            None
        )
        .is_err());
    }

    #[test]
    fn load_arrays_checks_names_and_shapes() {
        let mut g = Generator::reference(GENERATOR_INIT_PARAMS.to_vec()).unwrap();
        let mut arrays = g.arrays();
        arrays[0].data = vec![1.0, 2.0, 3.0];
        g.load_arrays(&arrays).unwrap();
        assert_eq!(g.params(), &[1.0, 2.0, 3.0]);
        arrays[0].name = "other".into();
        assert!(g.load_arrays(&arrays).is_err());
    }
}
