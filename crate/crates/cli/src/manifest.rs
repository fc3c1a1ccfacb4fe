use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    /// Input name → content hash.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory → content hash.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    fn same_inputs(&self, other: &Manifest) -> bool {
        self.command == other.command
            && self.tool_version == other.tool_version
            && self.seed == other.seed
            && self.config_hash == other.config_hash
            && self.inputs == other.inputs
    }
}

/// Output files of one command, relative to the output directory.
pub type Outputs = Vec<(PathBuf, Vec<u8>)>;

pub struct Step {
    pub out_dir: PathBuf,
    pub command: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
}

impl Step {
    fn manifest_path(&self) -> PathBuf {
        self.out_dir.join("manifests").join(format!("{}.json", self.command))
    }

    fn skeleton(&self) -> Manifest {
        Manifest {
            command: self.command.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            inputs: self.inputs.clone(),
            outputs: BTreeMap::new(),
        }
    }

    /// True when a previous run saw the same inputs and its outputs are intact.
    pub fn up_to_date(&self) -> bool {
        let Ok(text) = std::fs::read_to_string(self.manifest_path()) else {
            return false;
        };
        let Ok(old) = serde_json::from_str::<Manifest>(&text) else {
            return false;
        };
        old.same_inputs(&self.skeleton())
            && old
                .outputs
                .iter()
                .all(|(p, h)| hash_file(&self.out_dir.join(p)).is_ok_and(|x| x == *h))
    }

    /// Run `body` unless up to date, write its outputs and the manifest.
    pub fn run(self, body: impl FnOnce() -> anyhow::Result<Outputs>) -> anyhow::Result<()> {
        if self.up_to_date() {
            log::info!("{}: inputs unchanged, skipping", self.command);
            return Ok(());
        }
        let outputs = body()?;
        let mut manifest = self.skeleton();
        for (rel, bytes) in &outputs {
            write_atomic(&self.out_dir.join(rel), bytes)?;
            manifest
                .outputs
                .insert(rel.to_string_lossy().replace('\\', "/"), sha256_hex(bytes));
        }
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&self.manifest_path(), text.as_bytes())?;
        log::info!("{}: wrote {} file(s)", self.command, outputs.len());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skip_requires_same_inputs_and_intact_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let step = |input: &str| Step {
            out_dir: dir.path().to_path_buf(),
            command: "demo",
            seed: 1,
            config_hash: "c".into(),
            inputs: BTreeMap::from([("in".to_owned(), input.to_owned())]),
        };
        let mut runs = 0;
        for input in ["a", "a", "b"] {
            step(input)
                .run(|| {
                    runs += 1;
                    Ok(vec![(PathBuf::from("x/out.txt"), b"hello".to_vec())])
                })
                .unwrap();
        }
        assert_eq!(runs, 2);
        std::fs::write(dir.path().join("x/out.txt"), "tampered").unwrap();
        assert!(!step("b").up_to_date());
    }
}
