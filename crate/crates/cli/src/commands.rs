//! Implementations of the `run`, `gradcheck` and `sample` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use vqg::autodiff::{Bindings, NodeId, Tape};
use vqg::circuits::run as run_circuit;
use vqg::gradients::jacobian;
use vqg::models::{place_arrays, Discriminator, Generator, Parameterized};
use vqg::seed::{named, Stream};
use vqg::simulator::Mode;
use vqg::training::{generator_loss, EpochRecord, GenLoss, Measurement, Trainer, PROB_CLIP};

use crate::artifacts::{
    snapshot_epochs, write_json, write_text, Checkpoint, Histograms, TraceWriter, CHECKPOINT_FILE,
    HISTOGRAM_FILE, MANIFEST_FILE, TRACE_FILE, VERSION,
};
use crate::config::{ExperimentConfig, ManifestInfo};
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Metrics of the untrained models.
    pub initial: EpochRecord,
    pub records: Vec<EpochRecord>,
}

/// Trains according to `config` and writes every artifact into `out`.
pub fn run(config: &ExperimentConfig, out: &Path, verbose: bool) -> Result<RunSummary, CliError> {
    let models = config.build()?;
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;

    let mut manifest = config.clone();
    manifest.output.dir = out.to_path_buf();
    manifest.manifest = Some(ManifestInfo {
        version: VERSION.to_string(),
    });
    write_text(&out.join(MANIFEST_FILE), &manifest.to_toml()?)?;

    let epochs = config.train.epochs;
    let snapshots = snapshot_epochs(epochs);
    let mut histograms = Histograms::new(config.train.kl_bins);
    let mut trace = TraceWriter::create(&out.join(TRACE_FILE))?;
    let mut trainer = Trainer::new(
        config.train.clone(),
        models.generator,
        models.discriminator,
        models.source,
    )
    .map_err(CliError::config)?;

    let initial = trainer.evaluate().map_err(CliError::runtime)?;
    histograms.push(&initial.record, &initial.generated, &initial.data);
    let mut records = Vec::with_capacity(epochs);
    let report_every = (epochs / 10).max(1);
    for _ in 0..epochs {
        let eval = match trainer.run_epoch() {
            Ok(e) => e,
            Err(e) => {
                write_json(&out.join(HISTOGRAM_FILE), &histograms)?;
                return Err(CliError::Runtime(format!("training aborted: {e}")));
            }
        };
        trace.write(&eval.record)?;
        if snapshots.contains(&eval.record.epoch) {
            histograms.push(&eval.record, &eval.generated, &eval.data);
        }
        if verbose && eval.record.epoch % report_every == 0 {
            let r = &eval.record;
            eprintln!(
                "epoch {:>6}  C_d {:.4}  C_g {:.4}  KL {:.4}",
                r.epoch, r.c_d, r.c_g, r.kl
            );
        }
        records.push(eval.record);
    }

    write_json(&out.join(HISTOGRAM_FILE), &histograms)?;
    let (generator, discriminator) = trainer.into_models();
    Checkpoint::new(
        epochs,
        &config.generator,
        &generator,
        &config.discriminator,
        &discriminator,
    )
    .write(&out.join(CHECKPOINT_FILE))?;
    Ok(RunSummary {
        initial: initial.record,
        records,
    })
}

/// Writes `count` lines `z…,x…` drawn from a checkpointed generator.
pub fn sample(
    checkpoint: &Path,
    count: usize,
    seed: u64,
    mode: Measurement,
    out: &Path,
) -> Result<(), CliError> {
    let generator = Checkpoint::read(checkpoint)?.restore_generator()?;
    let mut z_rng = named(seed, Stream::GeneratorZ);
    let mut shot_rng = named(seed, Stream::Shots);
    let mut text = String::new();
    for _ in 0..count {
        let z: Vec<f64> = (0..generator.noise_dim())
            .map(|_| z_rng.random_range(-1.0..1.0))
            .collect();
        let m = match mode {
            Measurement::Exact => Mode::Exact,
            Measurement::Shots(shots) => Mode::Shots {
                shots,
                seed: shot_rng.random(),
            },
        };
        let x = generator.generate(&z, m).map_err(CliError::runtime)?;
        let fields: Vec<String> = z.iter().chain(&x).map(|v| format!("{v:.16e}")).collect();
        writeln!(text, "{}", fields.join(",")).expect("writing to a string");
    }
    write_text(out, &text)
}

/// Discrepancy below which an analytic gradient is accepted.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckEntry {
    pub component: String,
    pub checked: usize,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub entries: Vec<GradcheckEntry>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.max_error < GRADCHECK_TOLERANCE)
    }
}

fn array_data<P: Parameterized>(model: &P) -> Vec<Vec<f64>> {
    model.arrays().into_iter().map(|a| a.data).collect()
}

/// Central differences of `f` with respect to every parameter of `model`.
fn finite_differences<M, F>(model: &M, f: F) -> Result<Vec<f64>, CliError>
where
    M: Parameterized + Clone,
    F: Fn(&M) -> vqg::Result<f64>,
{
    let data = array_data(model);
    let mut out = Vec::new();
    for i in 0..data.len() {
        for j in 0..data[i].len() {
            let eval = |delta: f64| -> Result<f64, CliError> {
                let mut shifted = data.clone();
                shifted[i][j] += delta;
                let mut m = model.clone();
                m.set_array_data(&shifted).map_err(CliError::runtime)?;
                f(&m).map_err(CliError::runtime)
            };
            out.push((eval(FD_STEP)? - eval(-FD_STEP)?) / (2.0 * FD_STEP));
        }
    }
    Ok(out)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn sum_node(tape: &mut Tape, x: NodeId, len: usize) -> vqg::Result<NodeId> {
    let m = tape.mean(x)?;
    tape.scale(m, len as f64)
}

fn tape_gradient(tape: &Tape, nodes: &[NodeId]) -> Result<Vec<f64>, CliError> {
    let grads = tape.backward().map_err(CliError::runtime)?;
    Ok(nodes.iter().flat_map(|&n| grads.get(n).to_vec()).collect())
}

/// Discriminator output on the tape without the input clamp used in training,
/// so boundary inputs surface as domain errors.
fn record_discriminator(
    d: &Discriminator,
    tape: &mut Tape,
    x: NodeId,
    nodes: &[NodeId],
) -> vqg::Result<NodeId> {
    match d {
        Discriminator::Classical(c) => c.record(tape, x, nodes),
        Discriminator::Quantum(q) => q.record(tape, x, nodes, Mode::Exact),
    }
}

fn clipped_gen_loss(d_fake: f64, kind: GenLoss) -> vqg::Result<f64> {
    generator_loss(&[d_fake.clamp(PROB_CLIP, 1.0 - PROB_CLIP)], kind)
}

fn check_generator_theta(g: &Generator, points: &[Vec<f64>]) -> Result<GradcheckEntry, CliError> {
    let circuit = g.circuit();
    let mut max_error = 0.0f64;
    let mut checked = 0;
    for z in points {
        let jac = jacobian(circuit, g.paulis(), z, g.params()).map_err(CliError::runtime)?;
        for (j, _) in g.params().iter().enumerate() {
            let eval = |delta: f64| -> Result<Vec<f64>, CliError> {
                let mut p = g.params().to_vec();
                p[j] += delta;
                let state = run_circuit(circuit, z, &p).map_err(CliError::runtime)?;
                g.paulis()
                    .iter()
                    .map(|pauli| state.expectation(pauli).map_err(CliError::runtime))
                    .collect()
            };
            let plus = eval(FD_STEP)?;
            let minus = eval(-FD_STEP)?;
            for i in 0..g.paulis().len() {
                let fd = (plus[i] - minus[i]) / (2.0 * FD_STEP);
                max_error = max_error.max((jac.get(i, j) - fd).abs());
                checked += 1;
            }
        }
    }
    Ok(GradcheckEntry {
        component: "generator parameter shift".into(),
        checked,
        max_error,
    })
}

fn check_generator_tape(g: &Generator, points: &[Vec<f64>]) -> Result<GradcheckEntry, CliError> {
    let mut max_error = 0.0f64;
    let mut checked = 0;
    for z in points {
        let mut tape = Tape::new();
        let mut b = Bindings::new();
        let zn = tape.constant(z.clone());
        let nodes = place_arrays(&mut tape, &g.arrays(), true, &mut b);
        let x = g
            .record(&mut tape, zn, &nodes, Mode::Exact)
            .map_err(CliError::runtime)?;
        sum_node(&mut tape, x, g.output_dim()).map_err(CliError::runtime)?;
        tape.forward(&b).map_err(CliError::runtime)?;
        let analytic = tape_gradient(&tape, &nodes)?;
        let fd = finite_differences(g, |m| Ok(m.generate(z, Mode::Exact)?.iter().sum::<f64>()))?;
        max_error = max_error.max(max_diff(&analytic, &fd));
        checked += fd.len();
    }
    Ok(GradcheckEntry {
        component: "generator autodiff".into(),
        checked,
        max_error,
    })
}

fn check_discriminator(
    d: &Discriminator,
    points: &[Vec<f64>],
) -> Result<(GradcheckEntry, GradcheckEntry), CliError> {
    let mut params = (0.0f64, 0);
    let mut input = (0.0f64, 0);
    for x in points {
        let mut tape = Tape::new();
        let mut b = Bindings::new();
        let xn = tape.input(x.len());
        b.insert(xn, x.clone());
        let nodes = place_arrays(&mut tape, &d.arrays(), true, &mut b);
        record_discriminator(d, &mut tape, xn, &nodes).map_err(CliError::runtime)?;
        tape.forward(&b).map_err(CliError::runtime)?;
        let grads = tape.backward().map_err(CliError::runtime)?;
        let analytic: Vec<f64> = nodes.iter().flat_map(|&n| grads.get(n).to_vec()).collect();
        let fd = finite_differences(d, |m| m.probability(x, Mode::Exact))?;
        params.0 = params.0.max(max_diff(&analytic, &fd));
        params.1 += fd.len();

        for (k, &dx) in grads.get(xn).iter().enumerate() {
            let shifted = |delta: f64| {
                let mut y = x.clone();
                y[k] += delta;
                d.probability(&y, Mode::Exact).map_err(CliError::runtime)
            };
            let fd = (shifted(FD_STEP)? - shifted(-FD_STEP)?) / (2.0 * FD_STEP);
            input.0 = input.0.max((dx - fd).abs());
            input.1 += 1;
        }
    }
    Ok((
        GradcheckEntry {
            component: "discriminator parameters".into(),
            checked: params.1,
            max_error: params.0,
        },
        GradcheckEntry {
            component: "discriminator input".into(),
            checked: input.1,
            max_error: input.0,
        },
    ))
}

fn check_generator_loss(
    g: &Generator,
    d: &Discriminator,
    points: &[Vec<f64>],
    kind: GenLoss,
) -> Result<GradcheckEntry, CliError> {
    let mut tape = Tape::new();
    let mut b = Bindings::new();
    let gen_nodes = place_arrays(&mut tape, &g.arrays(), true, &mut b);
    let disc_nodes = place_arrays(&mut tape, &d.arrays(), false, &mut b);
    let mut terms = Vec::new();
    for z in points {
        let zn = tape.constant(z.clone());
        let x = g
            .record(&mut tape, zn, &gen_nodes, Mode::Exact)
            .map_err(CliError::runtime)?;
        let p = d
            .record(&mut tape, x, &disc_nodes, Mode::Exact)
            .map_err(CliError::runtime)?;
        let pc = tape
            .clamp(p, PROB_CLIP, 1.0 - PROB_CLIP)
            .map_err(CliError::runtime)?;
        let term = match kind {
            GenLoss::Minimax => {
                let q = tape.rsub(1.0, pc).map_err(CliError::runtime)?;
                let l = tape.log(q).map_err(CliError::runtime)?;
                tape.scale(l, 0.5)
            }
            GenLoss::Heuristic => {
                let l = tape.log(pc).map_err(CliError::runtime)?;
                tape.negate(l)
            }
        }
        .map_err(CliError::runtime)?;
        terms.push(term);
    }
    let total = tape.sum(&terms).map_err(CliError::runtime)?;
    tape.scale(total, 1.0 / points.len() as f64)
        .map_err(CliError::runtime)?;
    tape.forward(&b).map_err(CliError::runtime)?;
    let analytic = tape_gradient(&tape, &gen_nodes)?;
    let fd = finite_differences(g, |m| {
        let mut total = 0.0;
        for z in points {
            let x: Vec<f64> = m
                .generate(z, Mode::Exact)?
                .into_iter()
                .map(|v| v.clamp(-1.0, 1.0))
                .collect();
            total += clipped_gen_loss(d.probability(&x, Mode::Exact)?, kind)?;
        }
        Ok(total / points.len() as f64)
    })?;
    Ok(GradcheckEntry {
        component: "generator loss chain".into(),
        checked: fd.len(),
        max_error: max_diff(&analytic, &fd),
    })
}

/// Compares every analytic gradient path used in training with central
/// finite differences at the configured sample points (exact mode).
pub fn gradcheck(config: &ExperimentConfig) -> Result<GradcheckReport, CliError> {
    let models = config.build()?;
    let g = &models.generator;
    let d = &models.discriminator;
    let z_points: Vec<Vec<f64>> = config
        .gradcheck
        .z
        .iter()
        .map(|&v| vec![v; g.noise_dim()])
        .collect();
    let x_points: Vec<Vec<f64>> = config
        .gradcheck
        .x
        .iter()
        .map(|&v| vec![v; d.input_dim()])
        .collect();
    let mut entries = vec![
        check_generator_theta(g, &z_points)?,
        check_generator_tape(g, &z_points)?,
    ];
    let (params, input) = check_discriminator(d, &x_points)?;
    entries.push(params);
    entries.push(input);
    if !z_points.is_empty() {
        entries.push(check_generator_loss(
            g,
            d,
            &z_points,
            config.train.gen_loss,
        )?);
    }
    Ok(GradcheckReport { entries })
}
