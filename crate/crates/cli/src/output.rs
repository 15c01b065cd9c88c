use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use wgpca::ingest::{sha256_hex, write_atomic};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Output directory; every file is written atomically and recorded.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Output {
            path: dir.display().to_string(),
            source: e.into(),
        })?;
        Ok(OutputDir {
            dir,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })?;
        self.record(name, bytes);
        Ok(())
    }

    /// Registers a file some other routine already wrote.
    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn write_csv(&mut self, name: &str, table: Table) -> Result<(), CliError> {
        let bytes = table.into_bytes().map_err(|source| CliError::Output {
            path: name.to_string(),
            source,
        })?;
        self.write(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Output {
            path: name.to_string(),
            source: e.into(),
        })?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn written(&self) -> &[FileDigest] {
        &self.written
    }
}

/// CSV table of strings; numbers go through `f64`'s shortest round-trip
/// formatting so identical results give identical bytes.
pub struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header.iter().map(|h| h.as_ref()))
            .map_err(|e| CliError::Compute(e.into()))?;
        Ok(Table { w })
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> Result<(), CliError> {
        self.w
            .write_record(cells.iter().map(|c| c.as_ref()))
            .map_err(|e| CliError::Compute(e.into()))
    }

    pub fn numeric_row(&mut self, cells: &[f64]) -> Result<(), CliError> {
        let cells: Vec<String> = cells.iter().map(|x| num(*x)).collect();
        self.row(&cells)
    }

    fn into_bytes(self) -> wgpca::Result<Vec<u8>> {
        self.w
            .into_inner()
            .map_err(|e| wgpca::Error::Io(std::io::Error::other(e.to_string())))
    }
}

pub fn num(x: f64) -> String {
    x.to_string()
}

/// Parameter as it appears in file names: `-2`, `0.5`.
pub fn tau_tag(t: f64) -> String {
    let s = t.to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_bytes() {
        let mut t = Table::new(&["x", "y"]).unwrap();
        t.numeric_row(&[0.5, -2.0]).unwrap();
        t.row(&["a,b", "1"]).unwrap();
        let s = String::from_utf8(t.into_bytes().unwrap()).unwrap();
        assert_eq!(s, "x,y\n0.5,-2\n\"a,b\",1\n");
    }

    #[test]
    fn tags() {
        assert_eq!(tau_tag(-2.0), "-2");
        assert_eq!(tau_tag(0.5), "0.5");
        assert_eq!(tau_tag(-0.0), "0");
    }
}
