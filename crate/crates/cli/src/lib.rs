//! `efpsa` command-line front end.
//!
//! Every subcommand produces one or more CSV documents. Each document starts
//! with a `#` manifest block (tool version, subcommand, resolved parameters,
//! SHA-256 of every input file, seed, output names) and contains nothing
//! time- or host-dependent, so equal manifests give equal bytes.

mod commands;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use efpsa_core::control::ControlError;
use efpsa_core::device::DeviceError;
use efpsa_core::field::FieldError;
use efpsa_core::photonic::PhotonicError;
use efpsa_core::repeater::RepeaterError;
use efpsa_core::spin::SpinError;
use efpsa_core::thermal::ThermalError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "efpsa", version, about = "Electric-field programmable spin array simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// Device configuration (TOML key/value).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Precomputed G-matrix CSV.
    #[arg(long, global = true, value_name = "PATH")]
    pub gmatrix: Option<PathBuf>,
    /// Imported per-electrode field map; repeat once per electrode.
    #[arg(long = "field-map", global = true, value_name = "PATH")]
    pub field_maps: Vec<PathBuf>,
    /// Output directory; documents go to stdout when omitted.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Turn breakdown and validity warnings into errors.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rabi frequency and π-gate fidelity against transverse field.
    GateFidelity(commands::GateFidelityArgs),
    /// Normalized far-field localization profiles.
    FieldProfile(commands::FieldProfileArgs),
    /// Assemble the voltage-to-field matrix.
    Gmatrix(commands::GmatrixArgs),
    /// Electrode voltages for a drive target or a Stark channel plan.
    Synthesize(commands::SynthesizeArgs),
    /// Electric vs magnetic heat per π-pulse over a drive-frequency sweep.
    HeatBudget(commands::HeatBudgetArgs),
    /// Entanglement rate against qubit number.
    Rates(commands::RatesArgs),
    /// Heralding-scheme comparison against detection efficiency.
    Schemes(commands::SchemesArgs),
    /// Monte Carlo check of the closed-form rate.
    Mc(commands::McArgs),
    /// Field profiles along the array with and without cross-talk elimination.
    Fig2(commands::Fig2Args),
    /// Repeater curves for all architectures, hybrid envelope and length sweep.
    Fig4(commands::Fig4Args),
    /// Localization profiles, slopes and superradiance trade-off.
    Appendix(commands::AppendixArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErrorKind {
    Validation,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(m: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Validation, message: m.into() }
    }

    pub fn numerical(m: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Numerical, message: m.into() }
    }

    /// `error kind=<validation|numerical> code=<n>: <message>` on one line.
    pub fn line(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Validation => "validation",
            ErrorKind::Numerical => "numerical",
        };
        let msg: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error kind={kind} code={}: {msg}", self.kind.exit_code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::validation(e.to_string())
            }
        }
    )*};
}
validation_from!(DeviceError, ThermalError, PhotonicError, RepeaterError);

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Degenerate(_) => CliError::numerical(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Singular(_) | ControlError::RankDeficient(_) | ControlError::Tolerance(_) => {
                CliError::numerical(e.to_string())
            }
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<SpinError> for CliError {
    fn from(e: SpinError) -> Self {
        match e {
            SpinError::NonPhysical(_) => CliError::numerical(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Resolved inputs of one run.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub command: String,
    pub params: Vec<(String, String)>,
    /// `(role, path, sha256)`.
    pub inputs: Vec<(String, String, String)>,
    pub seed: Option<u64>,
    pub results: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), ..Default::default() }
    }

    pub fn param(&mut self, key: &str, value: impl fmt::Display) {
        self.params.push((key.to_string(), value.to_string()));
    }

    pub fn result(&mut self, key: &str, value: impl fmt::Display) {
        self.results.push((key.to_string(), value.to_string()));
    }

    /// Read an input file and record its digest.
    pub fn read_input(&mut self, role: &str, path: &Path) -> CliResult<String> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::validation(format!("cannot read {role} '{}': {e}", path.display())))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        self.inputs.push((role.to_string(), path.display().to_string(), digest));
        String::from_utf8(bytes).map_err(|_| CliError::validation(format!("{role} '{}' is not UTF-8", path.display())))
    }

    fn header(&self, outputs: &[String], this: &str) -> String {
        let mut h = format!("# efpsa {VERSION}\n# command: {}\n", self.command);
        for (k, v) in &self.params {
            h.push_str(&format!("# param {k} = {v}\n"));
        }
        for (role, path, digest) in &self.inputs {
            h.push_str(&format!("# input {role} = {path} sha256:{digest}\n"));
        }
        if let Some(s) = self.seed {
            h.push_str(&format!("# seed = {s}\n"));
        }
        h.push_str(&format!("# outputs = {}\n", outputs.join(",")));
        h.push_str(&format!("# document = {this}\n"));
        for (k, v) in &self.results {
            h.push_str(&format!("# result {k} = {v}\n"));
        }
        h
    }
}

/// One emitted CSV document.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub name: String,
    pub body: String,
}

impl Document {
    pub fn new(name: &str, body: String) -> Self {
        Self { name: name.to_string(), body }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: Manifest,
    pub documents: Vec<Document>,
    /// Non-fatal findings, reported on stderr.
    pub warnings: Vec<String>,
}

impl RunOutput {
    /// Documents with their manifest headers attached.
    pub fn rendered(&self) -> Vec<(String, String)> {
        let names: Vec<String> = self.documents.iter().map(|d| d.name.clone()).collect();
        self.documents
            .iter()
            .map(|d| (d.name.clone(), format!("{}{}", self.manifest.header(&names, &d.name), d.body)))
            .collect()
    }
}

pub fn run(cli: &Cli) -> CliResult<RunOutput> {
    commands::dispatch(&cli.global, &cli.command)
}

/// Write rendered documents to `--out` (or stdout) and return the paths written.
pub fn emit(out: &RunOutput, dir: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    use std::io::Write;
    let rendered = out.rendered();
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::validation(format!("cannot create '{}': {e}", dir.display())))?;
            let mut paths = Vec::new();
            for (name, text) in rendered {
                let p = dir.join(&name);
                std::fs::write(&p, text)
                    .map_err(|e| CliError::validation(format!("cannot write '{}': {e}", p.display())))?;
                paths.push(p);
            }
            Ok(paths)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            for (_, text) in rendered {
                stdout
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::validation(format!("stdout: {e}")))?;
            }
            Ok(Vec::new())
        }
    }
}
