//! Project manifests: phenomena, hypothesis model files, explanation priors
//! and trial files, in TOML or JSON. Relative paths resolve against the
//! manifest's directory.

use std::path::{Path, PathBuf};

use hypodb_core::ingest;
use hypodb_core::model::parse_model;
use hypodb_core::pipeline::{Explanation, Hypothesis, Phenomenon, Project, Settings, Trials};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub phenomena: Vec<Phenomenon>,
    pub hypotheses: Vec<HypothesisEntry>,
    pub explanation: Vec<Explanation>,
    #[serde(default)]
    pub settings: Settings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisEntry {
    pub upsilon: u64,
    pub model: PathBuf,
    pub inputs: PathBuf,
    pub outputs: Vec<PathBuf>,
}

/// A parsed manifest with the content hash of everything it references.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub path: PathBuf,
    pub manifest: Manifest,
    pub hash: String,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Failed(format!("cannot read {}: {e}", path.display())))
}

impl LoadedManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = read(path)?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Validation(format!("{}: not valid UTF-8", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let manifest: Manifest = if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        };
        let mut loaded = LoadedManifest { path: path.to_path_buf(), manifest, hash: String::new() };
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        for h in &loaded.manifest.hypotheses {
            for f in std::iter::once(&h.model).chain([&h.inputs]).chain(&h.outputs) {
                hasher.update(read(&loaded.resolve(f))?);
            }
        }
        loaded.hash = format!("{:x}", hasher.finalize());
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match self.path.parent() {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Parses the models and trial files into a project.
    pub fn project(&self) -> Result<Project, CliError> {
        let m = &self.manifest;
        let mut hypotheses = Vec::new();
        let mut trials = Vec::new();
        for h in &m.hypotheses {
            let path = self.resolve(&h.model);
            let src = String::from_utf8(read(&path)?).map_err(|_| CliError::Failed(format!("{}: not valid UTF-8", path.display())))?;
            let model = parse_model(&src).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
            let outputs: Vec<PathBuf> = h.outputs.iter().map(|p| self.resolve(p)).collect();
            let output_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
            let (inputs, outputs) =
                ingest::load_trials(&self.resolve(&h.inputs), &output_refs, model.dims()).map_err(|e| CliError::Failed(e.to_string()))?;
            trials.push(Trials { upsilon: h.upsilon, inputs, outputs });
            hypotheses.push(Hypothesis { upsilon: h.upsilon, model });
        }
        Ok(Project { phenomena: m.phenomena.clone(), hypotheses, explanation: m.explanation.clone(), trials, settings: m.settings })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fall/project.toml")
    }

    #[test]
    fn loads_fall_fixture() {
        let m = LoadedManifest::load(&fixture()).unwrap();
        assert_eq!(m.manifest.hypotheses.len(), 3);
        assert_eq!(m.hash.len(), 64);
        let p = m.project().unwrap();
        assert_eq!(p.trials[0].inputs.rows.len(), 6);
        assert_eq!(p.trials[1].inputs.params, ["g", "D", "s0"]);
        p.validate().unwrap();
    }

    #[test]
    fn json_and_toml_agree() {
        let m = LoadedManifest::load(&fixture()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut json = m.manifest.clone();
        for h in &mut json.hypotheses {
            h.model = m.resolve(&h.model);
            h.inputs = m.resolve(&h.inputs);
            h.outputs = h.outputs.iter().map(|p| m.resolve(p)).collect();
        }
        let path = dir.path().join("p.json");
        std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        let j = LoadedManifest::load(&path).unwrap();
        assert_eq!(j.project().unwrap(), m.project().unwrap());
    }

    #[test]
    fn malformed_manifest_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        std::fs::write(&path, "phenomena = 3\n").unwrap();
        assert!(matches!(LoadedManifest::load(&path), Err(CliError::Validation(_))));
        assert!(matches!(LoadedManifest::load(&dir.path().join("missing.toml")), Err(CliError::Failed(_))));
    }
}
