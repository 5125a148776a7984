//! Run manifests: one `manifest.json` per output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json, FORMAT_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub bytes: u64,
}

/// What a command read, wrote and was configured with.
///
/// `args` is the full command line with every default spelled out, so
/// running it again reproduces the outputs bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<InputFile>,
    /// File names inside the output directory.
    pub outputs: Vec<String>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        RunManifest {
            format_version: FORMAT_VERSION,
            command: command.to_owned(),
            args,
            inputs: Vec::new(),
            outputs: Vec::new(),
            parameters: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(InputFile {
            path: path.to_path_buf(),
            bytes: meta.len(),
        });
        Ok(())
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("parameters serialize to JSON");
        self.parameters.insert(key.to_owned(), value);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// The recorded command line with its output directory replaced.
    pub fn args_with_output(&self, out: &Path) -> Result<Vec<String>> {
        let mut args = self.args.clone();
        let at = args
            .iter()
            .position(|a| a == "--out")
            .filter(|&i| i + 1 < args.len())
            .ok_or_else(|| Error::Usage("manifest command line has no --out".into()))?;
        args[at + 1] = out.display().to_string();
        Ok(args)
    }
}

/// Absolute form of `path`, so recorded command lines do not depend on the
/// working directory they are replayed from.
pub fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(|e| Error::io(path, e))
}
