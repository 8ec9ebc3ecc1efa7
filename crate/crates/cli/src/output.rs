//! Artifact files: JSON documents tagged with the schema version and the
//! config hash, CSV series with a hash comment line, atomic writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use laughlin_core::SCHEMA_VERSION;
use serde::Serialize;

use crate::CliError;

/// JSON envelope shared by all artifacts.
#[derive(Debug, Serialize)]
pub struct Document<'a, T: Serialize> {
    pub schema_version: u32,
    pub kind: &'a str,
    pub config_hash: &'a str,
    pub data: &'a T,
}

/// Writes the artifacts of one run into a directory.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    config_hash: String,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            config_hash: config_hash.to_string(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Temp file in the target directory, renamed over the final name.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", self.dir.join(name).display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(self.dir.join(name)).map_err(|e| io(e.error))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, kind: &str, data: &T) -> Result<(), CliError> {
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            kind,
            config_hash: &self.config_hash,
            data,
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// CSV preceded by a `# schema_version=.. config_hash=..` line.
    pub fn write_csv(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let text = format!(
            "# schema_version={} config_hash={}\n{body}",
            SCHEMA_VERSION, self.config_hash
        );
        self.write_bytes(name, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_documents_carry_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::create(dir.path(), "abc").unwrap();
        w.write_json("x.json", "test", &vec![1, 2]).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("x.json")).unwrap()).unwrap();
        assert_eq!(v["config_hash"], "abc");
        assert_eq!(v["kind"], "test");
        assert_eq!(v["data"][1], 2);
        w.write_csv("y.csv", "a,b\n1,2\n").unwrap();
        let csv = std::fs::read_to_string(dir.path().join("y.csv")).unwrap();
        assert!(csv.starts_with("# schema_version=1 config_hash=abc\na,b"));
        assert_eq!(w.written(), ["x.json", "y.csv"]);
        // No temp files left behind.
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
