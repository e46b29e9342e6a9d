//! Per-command run manifest: configuration digest, file digests, seeds,
//! outputs and stage timings, written next to the primary output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use sentivis_core::io::write_atomic;

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn run_manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

pub struct RunLog {
    command: String,
    config: String,
    inputs: Vec<(String, PathBuf)>,
    outputs: Vec<PathBuf>,
    seeds: Map<String, Value>,
    stages: Map<String, Value>,
    mark: Instant,
}

impl RunLog {
    pub fn new(command: &str, config: String) -> Self {
        RunLog {
            command: command.to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: Map::new(),
            stages: Map::new(),
            mark: Instant::now(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) {
        self.inputs.push((role.to_string(), path.to_path_buf()));
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), json!(value));
    }

    /// Closes the current stage under `name` and starts the next one.
    pub fn stage(&mut self, name: &str) {
        let ms = self.mark.elapsed().as_secs_f64() * 1000.0;
        self.stages.insert(name.to_string(), json!(ms));
        self.mark = Instant::now();
    }

    pub fn finish(self, path: &Path) -> CliResult<()> {
        let digest = |(role, p): &(String, PathBuf)| -> CliResult<Value> {
            Ok(json!({"role": role, "path": p.display().to_string(), "sha256": file_digest(p)?}))
        };
        let inputs = self.inputs.iter().map(digest).collect::<CliResult<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|p| digest(&("output".to_string(), p.clone())))
            .collect::<CliResult<Vec<_>>>()?;
        let doc = json!({
            "command": self.command,
            "config_sha256": sha256_hex(self.config.as_bytes()),
            "config": self.config.lines().collect::<Vec<_>>(),
            "inputs": inputs,
            "outputs": outputs,
            "seeds": self.seeds,
            "timing_ms": self.stages,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
        text.push('\n');
        write_atomic(path, text.as_bytes()).map_err(CliError::from)
    }
}
