//! Run configurations and the manifest that records them.

use std::fs;
use std::path::{Path, PathBuf};

use lfun::theta::Normalization;
use lfun::zeros::DEFAULT_RESCALE;
use lfun::{Error, Result};
use serde::{Deserialize, Serialize};

/// Settings of a class-group zero scan.  Output files depend only on these
/// fields, never on the cache location or worker count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZerosConfig {
    pub q: u64,
    pub digits: u32,
    pub t_range: (f64, f64),
    /// Sample spacing; defaults to `2π / (20 ln q)`.
    pub step: Option<f64>,
    /// Refinement bracket width; defaults to `10^{-D-2}`.
    pub tol: Option<f64>,
    /// Explicit characters as `a1:a2:...`; empty means all usable ones.
    pub chars: Vec<String>,
    pub normalization: Normalization,
    pub rescale: f64,
    pub paranoid: bool,
    pub oracle: bool,
}

impl ZerosConfig {
    pub fn new(q: u64, digits: u32) -> Self {
        ZerosConfig {
            q,
            digits,
            t_range: (0.0, 1.0),
            step: None,
            tol: None,
            chars: Vec::new(),
            normalization: Normalization::Ideal,
            rescale: DEFAULT_RESCALE,
            paranoid: false,
            oracle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_common(self.digits, self.t_range)?;
        if !(self.rescale.is_finite() && self.rescale > 0.0) {
            return Err(Error::Input(format!("rescale must be positive, got {}", self.rescale)));
        }
        Ok(())
    }
}

fn validate_common(digits: u32, (lo, hi): (f64, f64)) -> Result<()> {
    if digits == 0 {
        return Err(Error::Input("--digits must be at least 1".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && -1.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::Input(format!("t range [{lo}, {hi}] must lie in [-1, 1]")));
    }
    Ok(())
}

/// Where the generic path gets its coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenericSource {
    File(PathBuf),
    /// Built-in `(d/n)` sequence for a fundamental discriminant `d`.
    Kronecker(i64),
}

/// Settings of a generic-coefficient zero scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericConfig {
    pub source: GenericSource,
    pub digits: u32,
    pub t_range: (f64, f64),
    pub step: Option<f64>,
    pub tol: Option<f64>,
}

impl GenericConfig {
    pub fn validate(&self) -> Result<()> {
        validate_common(self.digits, self.t_range)
    }
}

/// What a manifest re-runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    Zeros(ZerosConfig),
    Generic(GenericConfig),
}

/// Record of one run: its configuration, the derived parameters and a
/// summary.  Carries no timestamps, so reruns reproduce it byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub library_version: String,
    pub run: Command,
    pub parameters: serde_json::Value,
    pub summary: serde_json::Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(run: Command, parameters: serde_json::Value, summary: serde_json::Value, outputs: &[&str]) -> Self {
        Manifest {
            tool: "lfun".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            library_version: lfun::VERSION.into(),
            run,
            parameters,
            summary,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Input(e.to_string()))?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parse { line: e.line(), msg: format!("{}: {e}", path.display()) })
    }
}
