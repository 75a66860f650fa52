use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::experiment::{run_experiment_on, write_outputs, load_cohort_for, load_resources, MetricReport};
use crate::config::Config;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

/// Provenance record written next to the run outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub status: RunStatus,
    pub config_path: Option<PathBuf>,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub module_versions: BTreeMap<String, String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
    pub outputs: Vec<PathBuf>,
    pub error: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub fn module_versions() -> BTreeMap<String, String> {
    [
        ("redrisk", env!("CARGO_PKG_VERSION").to_string()),
        ("cohort", format!("schema {}", crate::cohort::SCHEMA_VERSION)),
        ("trees", "cart.v1".to_string()),
        ("ensemble", "forest.v1 gbm.v1".to_string()),
        ("neuralnet", "dnnd.v1".to_string()),
        ("linear", "lasso.v1".to_string()),
        ("eval", format!("archive {}", super::archive::ARCHIVE_VERSION)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl RunManifest {
    pub fn start(cfg: &Config, config_path: Option<&Path>, config_bytes: &[u8]) -> Self {
        let e = &cfg.experiment;
        RunManifest {
            tool: "redrisk".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: RunStatus::Running,
            config_path: config_path.map(Path::to_path_buf),
            config_sha256: sha256_hex(config_bytes),
            seeds: (0..e.repeats as u64).map(|r| e.seed.wrapping_add(r)).collect(),
            module_versions: module_versions(),
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
            outputs: Vec::new(),
            error: None,
        }
    }

    /// Fails if `bytes` no longer hash to the recorded config digest.
    pub fn verify_config(&self, bytes: &[u8]) -> Result<()> {
        let now = sha256_hex(bytes);
        if now != self.config_sha256 {
            return Err(Error::config(format!(
                "config changed during the run (sha256 {} at start, {now} now)",
                self.config_sha256
            )));
        }
        Ok(())
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::data(format!("cannot encode manifest: {e}")))?;
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), format!("manifest: {e}")))
    }
}

/// Runs the experiment into `out_dir` with a manifest written before and
/// after. When `config_path` is given its bytes are re-hashed at the end.
pub fn run_to_dir(
    cfg: &Config,
    config_path: Option<&Path>,
    config_bytes: &[u8],
    out_dir: &Path,
) -> Result<(RunManifest, MetricReport)> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest_path = out_dir.join("manifest.json");
    let mut manifest = RunManifest::start(cfg, config_path, config_bytes);
    manifest.write_atomic(&manifest_path)?;

    let result = load_cohort_for(cfg).and_then(|ds| {
        let res = load_resources(cfg)?;
        let out = run_experiment_on(cfg, &ds, &res)?;
        let written = write_outputs(&out, out_dir)?;
        Ok((out.report, written))
    });
    let result = result.and_then(|r| {
        if let Some(p) = config_path {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            manifest.verify_config(&bytes)?;
        }
        Ok(r)
    });
    manifest.finished_unix_ms = Some(now_ms());
    match result {
        Ok((report, written)) => {
            manifest.status = RunStatus::Complete;
            manifest.outputs = written
                .iter()
                .map(|p| p.strip_prefix(out_dir).unwrap_or(p).to_path_buf())
                .collect();
            manifest.outputs.push(PathBuf::from("manifest.json"));
            manifest.write_atomic(&manifest_path)?;
            Ok((manifest, report))
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            manifest.write_atomic(&manifest_path)?;
            Err(e)
        }
    }
}
