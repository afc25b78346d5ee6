use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use detstab_core::evans::EvansValue;
use detstab_core::linalg::C64;
use detstab_core::{Error, Result};
use serde::Serialize;

pub const CSV_HEADER: &str = "re_lambda,im_lambda,re_D,im_D,log_scale";

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Creates `dir` and checks that files can be written into it.
pub fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let probe = dir.join(".detstab-probe");
    fs::write(&probe, b"").map_err(|e| io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io(e.to_string())),
    }
}

pub fn evans_csv(rows: &[(C64, EvansValue)]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for (l, v) in rows {
        s.push_str(&format!("{},{},{},{},{}\n", l.re, l.im, v.value.re, v.value.im, v.log_scale));
    }
    s
}

/// Collects written files relative to the output directory.
pub struct Writer {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Writer {
    pub fn new(dir: PathBuf) -> Self {
        Writer { dir, files: Vec::new() }
    }

    pub fn write(&mut self, name: &str, text: &str) -> Result<()> {
        write_text(&self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }
}
