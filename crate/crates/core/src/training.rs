//! Adversarial training loop, losses, Adam and convergence metrics.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Bindings, NodeId, Tape};
use crate::error::{Error, Result};
use crate::models::{place_arrays, DataSource, Discriminator, Generator, Parameterized};
use crate::seed::{named, Stream};
use crate::simulator::Mode;

/// Probabilities entering a logarithm are clipped into `[PROB_CLIP, 1 - PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-12;

fn clip(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GenLoss {
    Minimax,
    #[default]
    Heuristic,
}

/// How expectation values are obtained during training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Measurement {
    #[default]
    Exact,
    Shots(u64),
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measurement::Exact => f.write_str("exact"),
            Measurement::Shots(n) => write!(f, "shots:{n}"),
        }
    }
}

impl FromStr for Measurement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "exact" {
            return Ok(Measurement::Exact);
        }
        let n = s
            .strip_prefix("shots:")
            .and_then(|n| n.trim().parse::<u64>().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "measurement mode '{s}' is not 'exact' or 'shots:N'"
                ))
            })?;
        Ok(Measurement::Shots(n))
    }
}

impl TryFrom<String> for Measurement {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Measurement> for String {
    fn from(m: Measurement) -> Self {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len()
    {
        return Err(Error::Shape(format!(
            "adam step on {} parameters with {} gradients and state of {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

fn check_probabilities(name: &str, ps: &[f64]) -> Result<()> {
    if ps.is_empty() {
        return Err(Error::Argument(format!("{name} batch is empty")));
    }
    if ps.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite(format!("{name} probabilities")));
    }
    Ok(())
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

/// Smoothed cross-entropy of the discriminator: real targets `1 - smooth`,
/// fake targets 0, each half weighted by one half.
pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64], smooth: f64) -> Result<f64> {
    check_probabilities("real", d_real)?;
    check_probabilities("fake", d_fake)?;
    let real = mean(d_real.iter().map(|&p| bce(clip(p), 1.0 - smooth)));
    let fake = mean(d_fake.iter().map(|&p| bce(clip(p), 0.0)));
    Ok(0.5 * real + 0.5 * fake)
}

fn bce(p: f64, target: f64) -> f64 {
    let mut l = 0.0;
    if target != 0.0 {
        l -= target * p.ln();
    }
    if target != 1.0 {
        l -= (1.0 - target) * (1.0 - p).ln();
    }
    l
}

pub fn generator_loss(d_fake: &[f64], kind: GenLoss) -> Result<f64> {
    check_probabilities("fake", d_fake)?;
    Ok(match kind {
        GenLoss::Minimax => 0.5 * mean(d_fake.iter().map(|&p| (1.0 - clip(p)).ln())),
        GenLoss::Heuristic => -mean(d_fake.iter().map(|&p| clip(p).ln())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn swapped(self) -> Self {
        match self {
            Label::Real => Label::Fake,
            Label::Fake => Label::Real,
        }
    }

    pub fn target(self, smooth: f64) -> f64 {
        match self {
            Label::Real => 1.0 - smooth,
            Label::Fake => 0.0,
        }
    }
}

/// Swaps each label independently with probability `flip_prob`.
pub fn flip_labels<R: Rng + ?Sized>(labels: &[Label], flip_prob: f64, rng: &mut R) -> Vec<Label> {
    labels
        .iter()
        .map(|&l| {
            if rng.random::<f64>() < flip_prob {
                l.swapped()
            } else {
                l
            }
        })
        .collect()
}

/// Counts of `samples` in `bins` equal-width bins over `[lo, hi]`; samples
/// outside the range land in the edge bins.
pub fn histogram(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &x in samples {
        let k = ((x.clamp(lo, hi) - lo) / width).floor() as isize;
        counts[k.clamp(0, bins as isize - 1) as usize] += 1;
    }
    counts
}

/// `KL(p‖q)` between histograms of two sample sets, with one pseudo-count
/// added to every bin before normalization.
pub fn kl_divergence(
    samples_p: &[f64],
    samples_q: &[f64],
    bins: usize,
    range: (f64, f64),
) -> Result<f64> {
    if samples_p.is_empty() || samples_q.is_empty() {
        return Err(Error::Argument(
            "KL divergence of an empty sample set".into(),
        ));
    }
    if bins < 2 {
        return Err(Error::Argument(format!(
            "KL divergence needs at least 2 bins, got {bins}"
        )));
    }
    let (lo, hi) = range;
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Argument(format!(
            "empty histogram range [{lo}, {hi}]"
        )));
    }
    if samples_p.iter().chain(samples_q).any(|x| x.is_nan()) {
        return Err(Error::NonFinite("KL divergence samples".into()));
    }
    let normalize = |s: &[f64]| -> Vec<f64> {
        let total = (s.len() + bins) as f64;
        histogram(s, bins, lo, hi)
            .into_iter()
            .map(|c| (c + 1) as f64 / total)
            .collect()
    };
    let p = normalize(samples_p);
    let q = normalize(samples_q);
    Ok(p.iter()
        .zip(&q)
        .map(|(&pb, &qb)| pb * (pb / qb).ln())
        .sum::<f64>()
        .max(0.0))
}

/// Mean and population standard deviation.
pub fn moments(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    (mu, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub disc_steps: usize,
    pub gen_steps: usize,
    pub batch_size: usize,
    pub lr_disc: f64,
    pub lr_gen: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub label_smooth: f64,
    pub flip_prob: f64,
    pub gen_loss: GenLoss,
    pub mode: Measurement,
    pub eval_samples: usize,
    pub kl_bins: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            disc_steps: 1,
            gen_steps: 1,
            batch_size: 64,
            lr_disc: 0.005,
            lr_gen: 0.02,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            label_smooth: 0.1,
            flip_prob: 0.05,
            gen_loss: GenLoss::Heuristic,
            mode: Measurement::Exact,
            eval_samples: 1000,
            kl_bins: 20,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("disc_steps", self.disc_steps),
            ("gen_steps", self.gen_steps),
            ("batch_size", self.batch_size),
            ("eval_samples", self.eval_samples),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Argument(format!("{name} must be at least 1")));
            }
        }
        if self.kl_bins < 2 {
            return Err(Error::Argument("kl_bins must be at least 2".into()));
        }
        for (name, v) in [("lr_disc", self.lr_disc), ("lr_gen", self.lr_gen)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Argument(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Argument(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            return Err(Error::Argument("adam_eps must be positive".into()));
        }
        for (name, v) in [
            ("label_smooth", self.label_smooth),
            ("flip_prob", self.flip_prob),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Argument(format!("{name} must lie in [0, 1)")));
            }
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub c_d: f64,
    pub c_g: f64,
    pub kl: f64,
    pub mean_gen: f64,
    pub std_gen: f64,
    pub mean_data: f64,
    pub std_data: f64,
}

/// Metrics together with the evaluation samples they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub record: EpochRecord,
    pub generated: Vec<f64>,
    pub data: Vec<f64>,
}

fn uniform_batch<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn flatten(data: &[Vec<f64>]) -> Vec<f64> {
    data.concat()
}

fn unflatten(flat: &[f64], like: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(like.len());
    let mut start = 0;
    for a in like {
        out.push(flat[start..start + a.len()].to_vec());
        start += a.len();
    }
    out
}

fn array_data<P: Parameterized>(model: &P) -> Vec<Vec<f64>> {
    model.arrays().into_iter().map(|a| a.data).collect()
}

/// Clipped binary cross-entropy of a probability node against a fixed target.
fn record_bce(tape: &mut Tape, p: NodeId, target: f64) -> Result<NodeId> {
    let pc = tape.clamp(p, PROB_CLIP, 1.0 - PROB_CLIP)?;
    let mut terms = Vec::new();
    if target != 0.0 {
        let l = tape.log(pc)?;
        terms.push(tape.scale(l, -target)?);
    }
    if target != 1.0 {
        let q = tape.rsub(1.0, pc)?;
        let l = tape.log(q)?;
        terms.push(tape.scale(l, -(1.0 - target))?);
    }
    tape.sum(&terms)
}

fn record_gen_loss(tape: &mut Tape, p: NodeId, kind: GenLoss) -> Result<NodeId> {
    let pc = tape.clamp(p, PROB_CLIP, 1.0 - PROB_CLIP)?;
    match kind {
        GenLoss::Minimax => {
            let q = tape.rsub(1.0, pc)?;
            let l = tape.log(q)?;
            tape.scale(l, 0.5)
        }
        GenLoss::Heuristic => {
            let l = tape.log(pc)?;
            tape.negate(l)
        }
    }
}

fn ensure_finite(what: &str, epoch: usize, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} at epoch {epoch}")))
    }
}

/// Stateful training loop; one call to [`Trainer::run_epoch`] per epoch.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    generator: Generator,
    discriminator: Discriminator,
    source: DataSource,
    gen_z: ChaCha20Rng,
    data_z: ChaCha20Rng,
    flips: ChaCha20Rng,
    shots: ChaCha20Rng,
    eval: ChaCha20Rng,
    adam_gen: AdamState,
    adam_disc: AdamState,
    epoch: usize,
}

impl Trainer {
    pub fn new(
        config: TrainConfig,
        generator: Generator,
        discriminator: Discriminator,
        source: DataSource,
    ) -> Result<Self> {
        config.validate()?;
        if generator.output_dim() != discriminator.input_dim() {
            return Err(Error::Shape(format!(
                "generator emits {} components, discriminator expects {}",
                generator.output_dim(),
                discriminator.input_dim()
            )));
        }
        if source.generator().output_dim() != discriminator.input_dim() {
            return Err(Error::Shape(format!(
                "data source emits {} components, discriminator expects {}",
                source.generator().output_dim(),
                discriminator.input_dim()
            )));
        }
        let seed = config.seed;
        let n_gen = flatten(&array_data(&generator)).len();
        let n_disc = flatten(&array_data(&discriminator)).len();
        Ok(Self {
            config,
            generator,
            discriminator,
            source,
            gen_z: named(seed, Stream::GeneratorZ),
            data_z: named(seed, Stream::DataZ),
            flips: named(seed, Stream::Flips),
            shots: named(seed, Stream::Shots),
            eval: named(seed, Stream::Eval),
            adam_gen: AdamState::new(n_gen),
            adam_disc: AdamState::new(n_disc),
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn into_models(self) -> (Generator, Discriminator) {
        (self.generator, self.discriminator)
    }

    fn draw_mode(config: &TrainConfig, rng: &mut ChaCha20Rng) -> Mode {
        match config.mode {
            Measurement::Exact => Mode::Exact,
            Measurement::Shots(shots) => Mode::Shots {
                shots,
                seed: rng.random(),
            },
        }
    }

    fn disc_step(&mut self) -> Result<()> {
        let n = self.config.batch_size;
        let smooth = self.config.label_smooth;
        let zs = uniform_batch(&mut self.gen_z, n, self.generator.noise_dim());
        let data_zs = uniform_batch(&mut self.data_z, n, self.source.noise_dim());
        let real = data_zs
            .iter()
            .map(|z| self.source.sample(z))
            .collect::<Result<Vec<_>>>()?;
        let fake = zs
            .iter()
            .map(|z| {
                let mode = Self::draw_mode(&self.config, &mut self.shots);
                self.generator.generate(z, mode)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut labels = vec![Label::Real; n];
        labels.extend(std::iter::repeat_n(Label::Fake, n));
        let labels = flip_labels(&labels, self.config.flip_prob, &mut self.flips);

        let mut tape = Tape::new();
        let mut bindings = Bindings::new();
        let arrays = self.discriminator.arrays();
        let nodes = place_arrays(&mut tape, &arrays, true, &mut bindings);
        let mut real_terms = Vec::with_capacity(n);
        let mut fake_terms = Vec::with_capacity(n);
        for (k, x) in real.iter().chain(&fake).enumerate() {
            let xn = tape.constant(x.clone());
            let mode = Self::draw_mode(&self.config, &mut self.shots);
            let p = self.discriminator.record(&mut tape, xn, &nodes, mode)?;
            let term = record_bce(&mut tape, p, labels[k].target(smooth))?;
            if k < n {
                real_terms.push(term);
            } else {
                fake_terms.push(term);
            }
        }
        let r = tape.sum(&real_terms)?;
        let f = tape.sum(&fake_terms)?;
        let total = tape.add(r, f)?;
        tape.scale(total, 0.5 / n as f64)?;
        let loss = tape.forward(&bindings)?;
        ensure_finite("discriminator loss", self.epoch, &loss)?;
        let grads = tape.backward()?;
        let g: Vec<f64> = nodes
            .iter()
            .flat_map(|&id| grads.get(id).to_vec())
            .collect();
        ensure_finite("discriminator gradient", self.epoch, &g)?;

        let data = array_data(&self.discriminator);
        let mut flat = flatten(&data);
        adam_step(
            &mut flat,
            &g,
            &mut self.adam_disc,
            &self.config.adam(self.config.lr_disc),
        )?;
        self.discriminator.set_array_data(&unflatten(&flat, &data))
    }

    fn gen_step(&mut self) -> Result<()> {
        let n = self.config.batch_size;
        let zs = uniform_batch(&mut self.gen_z, n, self.generator.noise_dim());
        let mut tape = Tape::new();
        let mut bindings = Bindings::new();
        let gen_nodes = place_arrays(&mut tape, &self.generator.arrays(), true, &mut bindings);
        let disc_nodes = place_arrays(
            &mut tape,
            &self.discriminator.arrays(),
            false,
            &mut bindings,
        );
        let mut terms = Vec::with_capacity(n);
        for z in &zs {
            let zn = tape.constant(z.clone());
            let gm = Self::draw_mode(&self.config, &mut self.shots);
            let x = self.generator.record(&mut tape, zn, &gen_nodes, gm)?;
            let dm = Self::draw_mode(&self.config, &mut self.shots);
            let p = self.discriminator.record(&mut tape, x, &disc_nodes, dm)?;
            terms.push(record_gen_loss(&mut tape, p, self.config.gen_loss)?);
        }
        let total = tape.sum(&terms)?;
        tape.scale(total, 1.0 / n as f64)?;
        let loss = tape.forward(&bindings)?;
        ensure_finite("generator loss", self.epoch, &loss)?;
        let grads = tape.backward()?;
        let g: Vec<f64> = gen_nodes
            .iter()
            .flat_map(|&id| grads.get(id).to_vec())
            .collect();
        ensure_finite("generator gradient", self.epoch, &g)?;

        let data = array_data(&self.generator);
        let mut flat = flatten(&data);
        adam_step(
            &mut flat,
            &g,
            &mut self.adam_gen,
            &self.config.adam(self.config.lr_gen),
        )?;
        self.generator.set_array_data(&unflatten(&flat, &data))
    }

    /// Metrics on a fresh evaluation batch. Generated samples are clamped to
    /// `[-1, 1]` before they reach the discriminator.
    pub fn evaluate(&mut self) -> Result<Evaluation> {
        let n = self.config.eval_samples;
        let zs = uniform_batch(&mut self.eval, n, self.generator.noise_dim());
        let data_zs = uniform_batch(&mut self.eval, n, self.source.noise_dim());
        let mut generated = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n);
        let mut d_fake = Vec::with_capacity(n);
        let mut d_real = Vec::with_capacity(n);
        for (z, dz) in zs.iter().zip(&data_zs) {
            let mode = Self::draw_mode(&self.config, &mut self.eval);
            let x: Vec<f64> = self
                .generator
                .generate(z, mode)?
                .into_iter()
                .map(|v| v.clamp(-1.0, 1.0))
                .collect();
            let y = self.source.sample(dz)?;
            let mode = Self::draw_mode(&self.config, &mut self.eval);
            d_fake.push(self.discriminator.probability(&x, mode)?);
            let mode = Self::draw_mode(&self.config, &mut self.eval);
            d_real.push(self.discriminator.probability(&y, mode)?);
            generated.push(x[0]);
            data.push(y[0]);
        }
        ensure_finite("evaluation samples", self.epoch, &generated)?;
        let c_d = discriminator_loss(&d_real, &d_fake, 0.0)?;
        let c_g = generator_loss(&d_fake, self.config.gen_loss)?;
        let kl = kl_divergence(&data, &generated, self.config.kl_bins, (-1.0, 1.0))?;
        let (mean_gen, std_gen) = moments(&generated);
        let (mean_data, std_data) = moments(&data);
        Ok(Evaluation {
            record: EpochRecord {
                epoch: self.epoch,
                c_d,
                c_g,
                kl,
                mean_gen,
                std_gen,
                mean_data,
                std_data,
            },
            generated,
            data,
        })
    }

    /// `S_d` discriminator updates, `S_g` generator updates, then evaluation.
    pub fn run_epoch(&mut self) -> Result<Evaluation> {
        self.epoch += 1;
        for _ in 0..self.config.disc_steps {
            self.disc_step()?;
        }
        for _ in 0..self.config.gen_steps {
            self.gen_step()?;
        }
        self.evaluate()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub records: Vec<EpochRecord>,
}

/// Runs `config.epochs` epochs and collects one record per epoch.
pub fn train(
    config: TrainConfig,
    generator: Generator,
    discriminator: Discriminator,
    source: DataSource,
) -> Result<TrainOutput> {
    let epochs = config.epochs;
    let mut trainer = Trainer::new(config, generator, discriminator, source)?;
    let records = (0..epochs)
        .map(|_| trainer.run_epoch().map(|e| e.record))
        .collect::<Result<Vec<_>>>()?;
    let (generator, discriminator) = trainer.into_models();
    Ok(TrainOutput {
        generator,
        discriminator,
        records,
    })
}
