use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

/// Shortest round-trip scientific form.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub struct Table {
    header: Vec<&'static str>,
    body: String,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            body: String::new(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.header.len());
        let _ = writeln!(self.body, "{}", cells.join(","));
    }

    pub fn nums(&mut self, cells: &[f64]) {
        let cells: Vec<String> = cells.iter().map(|&x| num(x)).collect();
        self.row(&cells);
    }

    pub fn write(&self, path: &Path) -> Result<PathBuf, CliError> {
        let mut text = self.header.join(",");
        text.push('\n');
        text.push_str(&self.body);
        fs::write(path, text)?;
        Ok(path.to_path_buf())
    }
}

pub fn inputs_hash(subcommand: &str, config: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(subcommand.as_bytes());
    h.update(b"\n");
    h.update(config.to_json(false).as_bytes());
    hex::encode(h.finalize())
}

pub fn write_json(path: &Path, value: &Value, pretty: bool) -> Result<PathBuf, CliError> {
    let mut text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .expect("summary serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}
