//! Benchmark run manifest, a TOML file naming inputs and sweep parameters.
//!
//! ```toml
//! inputs = ["graphs/a.mtx", "graphs/b.mtx"]
//! dims = [16, 48, 96]        # optional; default sweep is 16..=256 step 16
//! w_domain = [2, 4, 8]       # optional
//! omega = 32                 # optional
//! repeats = 3                # optional, minimum 3
//! seed = 0                   # optional
//! out_dir = "results"        # optional if --out is passed
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub inputs: Vec<PathBuf>,
    dims: Option<Vec<usize>>,
    #[serde(default = "default_w_domain")]
    pub w_domain: Vec<usize>,
    #[serde(default = "default_omega")]
    pub omega: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

fn default_w_domain() -> Vec<usize> {
    vec![2, 4, 8]
}

fn default_omega() -> usize {
    32
}

fn default_repeats() -> usize {
    3
}

impl RunManifest {
    /// Omitting `dims` selects the standard sweep, 16 to 256 in steps of 16.
    pub fn dims(&self) -> Vec<usize> {
        self.dims.clone().unwrap_or_else(|| (16..=256).step_by(16).collect())
    }
}

/// Parses and validates: inputs exist now, dim list is non-empty, the
/// benchmark loop has enough repeats to take a minimum over.
pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let manifest: RunManifest =
        toml::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
    if manifest.inputs.is_empty() {
        bail!("manifest lists no inputs");
    }
    for input in &manifest.inputs {
        if !input.is_file() {
            bail!("manifest input {} does not exist", input.display());
        }
    }
    if matches!(&manifest.dims, Some(d) if d.is_empty()) {
        bail!("manifest dim list is empty");
    }
    if manifest.repeats < 3 {
        bail!("repeats must be >= 3, got {}", manifest.repeats);
    }
    Ok(manifest)
}
