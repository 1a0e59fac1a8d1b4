use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

/// Output directory; every file lands via a temporary sibling and a rename,
/// so readers never see a partial file.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Names of the files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_with(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
        let target = self.root.join(name);
        let io_err = |source| CliError::Io {
            path: target.clone(),
            source,
        };
        let tmp = NamedTempFile::new_in(&self.root).map_err(io_err)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            body(&mut w).map_err(io_err)?;
            w.flush().map_err(io_err)?;
        }
        tmp.as_file().sync_all().map_err(io_err)?;
        tmp.persist(&target).map_err(|e| io_err(e.error))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
            writeln!(w)
        })
    }
}

/// File-name friendly form of a user-supplied label.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "unnamed".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_replace_atomically_and_record_names() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("nested")).unwrap();
        out.write_with("a.csv", |w| writeln!(w, "first")).unwrap();
        out.write_with("a.csv", |w| writeln!(w, "second")).unwrap();
        out.write_json("b.json", &[1, 2]).unwrap();
        assert_eq!(out.written(), ["a.csv", "b.json"]);
        assert_eq!(fs::read_to_string(out.root().join("a.csv")).unwrap(), "second\n");
        let leftovers = fs::read_dir(out.root()).unwrap().count();
        assert_eq!(leftovers, 2);
    }

    #[test]
    fn failed_body_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let err = out.write_with("x.csv", |_| Err(io::Error::other("boom")));
        assert!(err.is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("γ1 then γ2"), "_1_then__2");
        assert_eq!(slug("big-circle_2"), "big-circle_2");
        assert_eq!(slug(""), "unnamed");
    }
}
