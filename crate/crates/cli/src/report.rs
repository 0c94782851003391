//! Structured text output: every artifact starts with a `# config-hash:`
//! comment and is written atomically.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const HASH_PREFIX: &str = "# config-hash: ";

pub fn config_hash(bytes: &[u8], seed_override: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    if let Some(seed) = seed_override {
        h.update(format!("\nseed-override = {seed}").as_bytes());
    }
    hex::encode(h.finalize())
}

/// 17 significant digits; `nan`/`inf` spelled the way TOML reads them.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_list<'a>(xs: impl IntoIterator<Item = &'a f64>) -> String {
    let items: Vec<String> = xs.into_iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_str(s: &str) -> String {
    format!("{s:?}")
}

/// TOML document builder.
pub struct Report {
    buf: String,
}

impl Report {
    pub fn new(hash: &str) -> Self {
        Self { buf: format!("{HASH_PREFIX}{hash}\n") }
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        let _ = write!(self.buf, "\n[{name}]\n");
        self
    }

    pub fn row(&mut self, name: &str) -> &mut Self {
        let _ = write!(self.buf, "\n[[{name}]]\n");
        self
    }

    pub fn float(&mut self, key: &str, x: f64) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {}", fmt_f64(x));
        self
    }

    pub fn int(&mut self, key: &str, x: usize) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {x}");
        self
    }

    pub fn flag(&mut self, key: &str, x: bool) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {x}");
        self
    }

    pub fn text(&mut self, key: &str, s: &str) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {}", fmt_str(s));
        self
    }

    pub fn texts(&mut self, key: &str, items: &[String]) -> &mut Self {
        let items: Vec<String> = items.iter().map(|s| fmt_str(s)).collect();
        let _ = writeln!(self.buf, "{key} = [{}]", items.join(", "));
        self
    }

    pub fn floats(&mut self, key: &str, xs: &[f64]) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {}", fmt_list(xs));
        self
    }

    pub fn vector(&mut self, key: &str, v: &DVector<f64>) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {}", fmt_list(v.iter()));
        self
    }

    /// Row-major nested array plus a `<key>_shape` entry, so empty
    /// dimensions survive a round trip.
    pub fn matrix(&mut self, key: &str, m: &DMatrix<f64>) -> &mut Self {
        let rows: Vec<String> = m.row_iter().map(|r| fmt_list(r.iter())).collect();
        let _ = writeln!(self.buf, "{key} = [{}]", rows.join(", "));
        let _ = writeln!(self.buf, "{key}_shape = [{}, {}]", m.nrows(), m.ncols());
        self
    }

    pub fn finish(&self) -> String {
        self.buf.clone()
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Reads the hash recorded in the first line of an artifact.
pub fn recorded_hash(contents: &str) -> Option<&str> {
    contents.lines().next()?.strip_prefix(HASH_PREFIX).map(str::trim)
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Collects artifacts for one subcommand and writes its manifest last.
pub struct Outputs {
    pub dir: PathBuf,
    pub hash: String,
    subcommand: &'static str,
    started: u64,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path, hash: String, subcommand: &'static str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), hash, subcommand, started: unix_now(), files: Vec::new() })
    }

    pub fn report(&self) -> Report {
        Report::new(&self.hash)
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// CSV body with the hash comment prepended.
    pub fn write_csv(&mut self, name: &str, csv: &str) -> Result<(), CliError> {
        let body = format!("{HASH_PREFIX}{}\n{csv}", self.hash);
        self.write(name, &body)
    }

    pub fn finish(self) -> Result<Vec<String>, CliError> {
        let mut m = Report::new(&self.hash);
        m.section("manifest")
            .text("config_hash", &self.hash)
            .text("tool_version", env!("CARGO_PKG_VERSION"))
            .text("subcommand", self.subcommand)
            .int("started_unix", self.started as usize)
            .int("finished_unix", unix_now() as usize)
            .texts("files", &self.files);
        write_atomic(&self.dir.join(format!("manifest-{}.toml", self.subcommand)), &m.finish())?;
        Ok(self.files)
    }
}
