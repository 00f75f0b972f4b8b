use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs. It carries
/// no wall-clock fields, so a rerun with the same inputs and parameters
/// reproduces the manifest, and therefore the outputs, byte for byte.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str) -> RunManifest {
        RunManifest {
            tool: "launchcurve",
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("manifest parameters are plain data");
        self.parameters.insert(key.to_string(), value);
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = sha256_hex(path)?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(file_name(path));
    }

    /// Writes the manifest next to `primary` as `<name>.manifest.json` and
    /// returns the manifest's file name for outputs to reference.
    pub fn write_beside(&self, primary: &Path) -> Result<String, CliError> {
        let manifest_path = manifest_path_for(primary);
        let body = serde_json::to_string_pretty(self)?;
        fs::write(&manifest_path, body + "\n")
            .map_err(|e| CliError::io(&format!("writing {}", manifest_path.display()), e))?;
        Ok(file_name(&manifest_path))
    }
}

pub fn manifest_path_for(primary: &Path) -> std::path::PathBuf {
    let mut name = primary.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// First line of every CSV or log output, tying it to its manifest. The
/// parsers in this toolchain skip `#` comment lines.
pub fn reference_line(manifest_name: &str) -> String {
    format!("# manifest: {manifest_name}\n")
}

pub fn sha256_hex(path: &Path) -> Result<String, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(&format!("opening {}", path.display()), e))?;
    let mut reader = std::io::BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_match_known_sha256_vectors() {
        let dir = std::env::temp_dir().join("launchcurve-manifest-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("abc.txt");
        fs::write(&path, "abc").unwrap();
        assert_eq!(
            sha256_hex(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        fs::write(&path, "").unwrap();
        assert_eq!(
            sha256_hex(&path).unwrap(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn manifests_land_next_to_their_output() {
        assert_eq!(
            manifest_path_for(Path::new("/tmp/run/curve.csv")),
            Path::new("/tmp/run/curve.csv.manifest.json")
        );
        assert_eq!(reference_line("curve.csv.manifest.json"), "# manifest: curve.csv.manifest.json\n");
    }

    #[test]
    fn manifest_json_is_stable_and_ordered() {
        let mut m = RunManifest::new("estimate");
        m.param("grid", "31:115:1");
        m.param("condition", "none");
        m.seed = Some(7);
        m.outputs.push("curve.csv".to_string());
        let body = serde_json::to_string_pretty(&m).unwrap();
        let repeat = serde_json::to_string_pretty(&m).unwrap();
        assert_eq!(body, repeat);
        let idx_cond = body.find("\"condition\"").unwrap();
        let idx_grid = body.find("\"grid\"").unwrap();
        assert!(idx_cond < idx_grid, "parameters serialize in key order");
        assert!(body.contains("\"tool\": \"launchcurve\""));
    }
}
