//! Artifact files: a `#` header with provenance, a CSV body, and a
//! read-back check after every write.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

/// Bytes of an input file together with its digest.
pub struct Input {
    pub name: String,
    pub bytes: Vec<u8>,
    pub sha256: String,
}

impl Input {
    pub fn read(path: &Path) -> Result<Input, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Input {
            sha256: hex::encode(Sha256::digest(&bytes)),
            name,
            bytes,
        })
    }

    /// Reads an artifact an earlier stage should have produced.
    pub fn upstream(dir: &Path, name: &str, stage: &str) -> Result<Input, CliError> {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(CliError::Missing {
                path,
                stage: stage.to_string(),
            });
        }
        Input::read(&path)
    }
}

/// Header lines written above an artifact body.
pub struct Provenance {
    stage: &'static str,
    lines: Vec<String>,
}

impl Provenance {
    pub fn new(stage: &'static str, cfg: &RunConfig, inputs: &[&Input]) -> Provenance {
        let mut lines: Vec<String> = cfg
            .echo()
            .into_iter()
            .map(|(k, v)| format!("config.{k}={v}"))
            .collect();
        lines.extend(
            inputs
                .iter()
                .map(|i| format!("input.{}=sha256:{}", i.name, i.sha256)),
        );
        Provenance { stage, lines }
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("note.{key}={value}"));
    }

    fn render(&self) -> Vec<u8> {
        let mut out =
            format!("# tiediv {} {}\n", env!("CARGO_PKG_VERSION"), self.stage).into_bytes();
        for line in &self.lines {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(line.replace('\n', " ").as_bytes());
            out.push(b'\n');
        }
        out
    }
}

/// Writes `<dir>/<name>` and confirms it parses back as a rectangular table.
pub fn write_artifact(
    dir: &Path,
    name: &str,
    meta: &Provenance,
    body: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
) -> Result<PathBuf, CliError> {
    let mut bytes = meta.render();
    body(&mut bytes)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.partial"));
    let mut file = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    file.write_all(&bytes)
        .and_then(|_| file.sync_all())
        .map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
    verify_table(&path)?;
    Ok(path)
}

pub fn verify_table(path: &Path) -> Result<usize, CliError> {
    let bad = |msg: String| CliError::Artifact(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let width = reader.headers().map_err(|e| bad(e.to_string()))?.len();
    if width == 0 {
        return Err(bad("missing header".into()));
    }
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != width {
            return Err(bad(format!(
                "row {} has {} fields, header has {width}",
                rows + 1,
                record.len()
            )));
        }
        rows += 1;
    }
    Ok(rows)
}

/// A CSV writer over `buf`; the caller writes the header row.
pub fn table(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}
