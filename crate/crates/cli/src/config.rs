//! Experiment configuration: TOML with dotted `--set` overrides.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use vqg::circuits::{b_block, generator_ansatz_2q, product_encoder, Circuit, Entangler};
use vqg::models::{
    ClassicalDiscriminator, DataSource, Discriminator, Generator, PostProcessing,
    QuantumDiscriminator, DATA_SOURCE_PARAMS,
};
use vqg::seed::{named, Stream};
use vqg::simulator::PauliString;
use vqg::training::TrainConfig;

use crate::error::CliError;

/// Variational circuit placed after the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnsatzSpec {
    /// `RY ⊗ RY` followed by an `XX` rotation; needs two qubits.
    #[default]
    Xx,
    /// No trainable gates.
    None,
    BBlock {
        r: usize,
        entangler: Entangler,
        #[serde(default = "yes")]
        final_x: bool,
    },
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(default = "one")]
    pub noise_dim: usize,
    /// Qubit copies per noise component.
    #[serde(default = "two")]
    pub copies: usize,
    #[serde(default)]
    pub ansatz: AnsatzSpec,
    pub paulis: Vec<PauliString>,
    /// Initial parameters; drawn uniformly from `[-π, π)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postproc: Option<PostProcessing>,
}

impl GeneratorSpec {
    fn circuits(&self) -> Result<(Circuit, Circuit), CliError> {
        let encoder = product_encoder(self.noise_dim, self.copies).map_err(CliError::config)?;
        let n = encoder.n_qubits();
        let ansatz = match &self.ansatz {
            AnsatzSpec::Xx => generator_ansatz_2q(),
            AnsatzSpec::None => Circuit::new(n, 0, 0).map_err(CliError::config)?,
            AnsatzSpec::BBlock {
                r,
                entangler,
                final_x,
            } => b_block(n, *r, *entangler, *final_x).map_err(CliError::config)?,
        };
        Ok((encoder, ansatz))
    }

    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Generator, CliError> {
        let params = match &self.params {
            Some(p) => p.clone(),
            None => {
                let n = self.circuits()?.1.n_trainable();
                QuantumDiscriminator::random_params(n, rng)
            }
        };
        self.build_with(params)
    }

    pub fn build_with(&self, params: Vec<f64>) -> Result<Generator, CliError> {
        let (encoder, ansatz) = self.circuits()?;
        Generator::new(
            encoder,
            ansatz,
            params,
            self.paulis.clone(),
            self.postproc.clone(),
        )
        .map_err(CliError::config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Classical feed-forward discriminator.
    I,
    /// Variational quantum discriminator.
    II,
}

fn default_layers() -> Vec<usize> {
    vec![1, 16, 16, 1]
}

fn default_entangler() -> Entangler {
    Entangler::CPhase
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorSpec {
    pub scheme: Scheme,
    /// Layer sizes for scheme I.
    #[serde(default = "default_layers")]
    pub layers: Vec<usize>,
    /// Qubit copies per input component for scheme II.
    #[serde(default = "three")]
    pub copies: usize,
    #[serde(default = "one")]
    pub r: usize,
    #[serde(default = "default_entangler")]
    pub entangler: Entangler,
    #[serde(default = "yes")]
    pub final_x: bool,
    #[serde(default)]
    pub readout: usize,
    /// Initial scheme II parameters; drawn uniformly from `[-π, π)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
}

impl DiscriminatorSpec {
    pub fn build<R: Rng + ?Sized>(
        &self,
        input_dim: usize,
        rng: &mut R,
    ) -> Result<Discriminator, CliError> {
        match self.scheme {
            Scheme::I => {
                if self.params.is_some() {
                    return Err(CliError::Config(
                        "discriminator.params applies to scheme II only".into(),
                    ));
                }
                ClassicalDiscriminator::new_random(&self.layers, rng)
                    .map(Discriminator::Classical)
                    .map_err(CliError::config)
            }
            Scheme::II => {
                let n = input_dim * self.copies;
                let encoder = product_encoder(input_dim, self.copies).map_err(CliError::config)?;
                let ansatz =
                    b_block(n, self.r, self.entangler, self.final_x).map_err(CliError::config)?;
                let params = match &self.params {
                    Some(p) => p.clone(),
                    None => QuantumDiscriminator::random_params(ansatz.n_trainable(), rng),
                };
                QuantumDiscriminator::new(encoder, ansatz, params, self.readout)
                    .map(Discriminator::Quantum)
                    .map_err(CliError::config)
            }
        }
    }
}

fn reference_data() -> GeneratorSpec {
    GeneratorSpec {
        noise_dim: 1,
        copies: 2,
        ansatz: AnsatzSpec::Xx,
        paulis: vec![PauliString::x(0)],
        params: Some(DATA_SOURCE_PARAMS.to_vec()),
        postproc: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
        }
    }
}

fn default_points() -> Vec<f64> {
    vec![-0.9, -0.5, -0.1, 0.3, 0.7]
}

/// Sample points for `gradcheck`; each value is broadcast to every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSpec {
    #[serde(default = "default_points")]
    pub z: Vec<f64>,
    #[serde(default = "default_points")]
    pub x: Vec<f64>,
}

impl Default for GradcheckSpec {
    fn default() -> Self {
        Self {
            z: default_points(),
            x: default_points(),
        }
    }
}

/// Written into emitted manifests; ignored on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub train: TrainConfig,
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
    #[serde(default = "reference_data")]
    pub data: GeneratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub gradcheck: GradcheckSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
}

/// Models built from a configuration, before any training.
#[derive(Debug, Clone)]
pub struct Models {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub source: DataSource,
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{assignment}' is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("malformed override key '{key}'")));
    }
    let (last, parents) = path.split_last().expect("split yields one element");
    let mut cur = table;
    for part in parents {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("override '{key}': '{part}' is not a table"))
        })?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let config: Self = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            let mut table: toml::Table = text
                .parse()
                .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            let merged = toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?;
            toml::from_str(&merged)
                .map_err(|e| CliError::Config(format!("after overrides: {e}")))?
        };
        config.train.validate().map_err(CliError::config)?;
        if config.data.params.is_none() {
            return Err(CliError::Config("data.params must be given".into()));
        }
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Builds all models. Random initial values come from the init stream in
    /// a fixed order: generator, then discriminator.
    pub fn build(&self) -> Result<Models, CliError> {
        let mut rng = named(self.train.seed, Stream::Init);
        let generator = self.generator.build(&mut rng)?;
        let discriminator = self.discriminator.build(generator.output_dim(), &mut rng)?;
        let data_params = self.data.params.clone().unwrap_or_default();
        let source = DataSource::new(self.data.build_with(data_params)?);
        if generator.noise_dim() != source.noise_dim() {
            return Err(CliError::Config(format!(
                "generator noise dimension {} differs from data source {}",
                generator.noise_dim(),
                source.noise_dim()
            )));
        }
        Ok(Models {
            generator,
            discriminator,
            source,
        })
    }
}
