use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use patchflow::grid::{write_snapshot, ScalarField};
use serde::Serialize;

/// One line of the JSON-lines summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub bound: f64,
    pub measured: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `measured <= bound`.
    pub fn at_most(id: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self { id: id.into(), bound, measured, pass: measured <= bound }
    }
}

pub struct Output {
    dir: PathBuf,
    checks: Vec<Check>,
}

impl Output {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir.join("snapshots"))?;
        Ok(Self { dir: dir.to_path_buf(), checks: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn snapshot(&self, name: &str, step: usize, t: f64, field: &ScalarField) -> patchflow::Result<()> {
        let path = self.dir.join("snapshots").join(format!("{name}_{step:06}.snap"));
        let mut w = BufWriter::new(File::create(path)?);
        write_snapshot(&mut w, field, t, name)?;
        w.flush()?;
        Ok(())
    }

    pub fn file(&self, name: &str) -> std::io::Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    /// Writes `summary.jsonl`, echoes it on stdout and reports whether every check passed.
    pub fn finish(&self) -> std::io::Result<bool> {
        let mut w = self.file("summary.jsonl")?;
        for c in &self.checks {
            let line = serde_json::to_string(c).expect("plain struct");
            writeln!(w, "{line}")?;
            println!("{line}");
        }
        w.flush()?;
        Ok(self.checks.iter().all(|c| c.pass))
    }
}
