use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub stage: &'static str,
    pub message: String,
}

impl CliError {
    pub fn input(stage: &'static str, message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, stage, message: message.into() }
    }

    /// Maps a library error to the input or numerical exit code.
    pub fn from_core(stage: &'static str, e: cams_core::Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INPUT };
        CliError { code, stage, message: e.to_string() }
    }

    /// Prints the error as one JSON object on stderr.
    pub fn report(&self) -> ExitCode {
        let kind = if self.code == EXIT_NUMERICAL { "numerical" } else { "input" };
        let body = json!({ "error": { "kind": kind, "stage": self.stage, "message": self.message } });
        eprintln!("{body}");
        ExitCode::from(self.code)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Stage<T> {
    fn at(self, stage: &'static str) -> CliResult<T>;
}

impl<T> Stage<T> for cams_core::Result<T> {
    fn at(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::from_core(stage, e))
    }
}

/// A file read once, kept with its content hash for output headers.
pub struct Input {
    pub role: &'static str,
    pub path: PathBuf,
    pub text: String,
    pub sha256: String,
}

impl Input {
    pub fn read(role: &'static str, path: &Path) -> CliResult<Input> {
        let bytes = std::fs::read(path).map_err(|e| CliError::input("read", format!("cannot read {}: {e}", path.display())))?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::input("read", format!("{} is not UTF-8 text", path.display())))?;
        Ok(Input { role, path: path.to_path_buf(), text, sha256 })
    }
}

/// Provenance block embedded in every output file. Paths are left out so
/// that identical inputs give identical bytes wherever they live.
pub fn header(command: &str, seed: u64, inputs: &[&Input], ablations: &[&str]) -> Value {
    json!({
        "tool": "cams",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "inputs": inputs.iter().map(|i| json!({ "role": i.role, "sha256": i.sha256 })).collect::<Vec<_>>(),
        "ablations": ablations,
    })
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::input("write", format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::input("write", format!("cannot write {}: {e}", path.display())))
}
