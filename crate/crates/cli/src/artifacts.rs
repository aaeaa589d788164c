//! Files written by `run` and read back by `sample`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use vqg::models::{Discriminator, Generator, NamedArray, Parameterized};
use vqg::training::{histogram, EpochRecord};

use crate::config::{DiscriminatorSpec, GeneratorSpec};
use crate::error::CliError;

pub const TRACE_FILE: &str = "trace.csv";
pub const HISTOGRAM_FILE: &str = "histograms.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MANIFEST_FILE: &str = "manifest.toml";

pub const TRACE_HEADER: &str = "epoch,C_d,C_g,KL,mean_gen,std_gen,mean_data,std_data";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn trace_row(r: &EpochRecord) -> String {
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.epoch, r.c_d, r.c_g, r.kl, r.mean_gen, r.std_gen, r.mean_data, r.std_data
    )
}

/// Appends one row per epoch, flushing each so an abort keeps earlier rows.
pub struct TraceWriter {
    path: std::path::PathBuf,
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        w.line(TRACE_HEADER)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<(), CliError> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| io_err(&self.path, e))
    }

    pub fn write(&mut self, r: &EpochRecord) -> Result<(), CliError> {
        let values = [
            r.c_d,
            r.c_g,
            r.kl,
            r.mean_gen,
            r.std_gen,
            r.mean_data,
            r.std_data,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Runtime(format!(
                "non-finite metrics at epoch {}",
                r.epoch
            )));
        }
        self.line(&trace_row(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSnapshot {
    pub epoch: usize,
    pub kl: f64,
    pub generated: Vec<u64>,
    pub data: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histograms {
    pub bins: usize,
    pub edges: Vec<f64>,
    pub snapshots: Vec<HistogramSnapshot>,
}

impl Histograms {
    pub fn new(bins: usize) -> Self {
        let edges = (0..=bins)
            .map(|k| -1.0 + 2.0 * k as f64 / bins as f64)
            .collect();
        Self {
            bins,
            edges,
            snapshots: Vec::new(),
        }
    }

    pub fn push(&mut self, record: &EpochRecord, generated: &[f64], data: &[f64]) {
        self.snapshots.push(HistogramSnapshot {
            epoch: record.epoch,
            kl: record.kl,
            generated: histogram(generated, self.bins, -1.0, 1.0),
            data: histogram(data, self.bins, -1.0, 1.0),
        });
    }
}

/// Epochs `0, N_e/4, N_e/2, N_e` without repeats.
pub fn snapshot_epochs(epochs: usize) -> Vec<usize> {
    let mut e = vec![0, epochs / 4, epochs / 2, epochs];
    e.dedup();
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub epoch: usize,
    pub generator_spec: GeneratorSpec,
    pub generator: Vec<NamedArray>,
    pub discriminator_spec: DiscriminatorSpec,
    pub discriminator: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn new(
        epoch: usize,
        generator_spec: &GeneratorSpec,
        generator: &Generator,
        discriminator_spec: &DiscriminatorSpec,
        discriminator: &Discriminator,
    ) -> Self {
        let mut generator_spec = generator_spec.clone();
        generator_spec.params = None;
        generator_spec.postproc = generator.postproc().cloned();
        let mut discriminator_spec = discriminator_spec.clone();
        discriminator_spec.params = None;
        Self {
            version: VERSION.to_string(),
            epoch,
            generator_spec,
            generator: generator.arrays(),
            discriminator_spec,
            discriminator: discriminator.arrays(),
        }
    }

    pub fn restore_generator(&self) -> Result<Generator, CliError> {
        let theta = self
            .generator
            .first()
            .map(|a| a.data.clone())
            .ok_or_else(|| CliError::Config("checkpoint has no generator arrays".into()))?;
        let mut g = self.generator_spec.build_with(theta)?;
        g.load_arrays(&self.generator).map_err(CliError::config)?;
        Ok(g)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let finite = self
            .generator
            .iter()
            .chain(&self.discriminator)
            .all(|a| a.data.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(CliError::Runtime(
                "refusing to write non-finite parameters".into(),
            ));
        }
        let text = serde_json::to_string_pretty(self).map_err(CliError::runtime)?;
        std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
