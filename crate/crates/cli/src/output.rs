//! Output files, each opening with the provenance header: tool version,
//! command and the resolved configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::CliError;

pub const TOOL: &str = concat!("marble ", env!("CARGO_PKG_VERSION"));

pub struct Provenance {
    pub command: &'static str,
    pub config: Vec<String>,
}

impl Provenance {
    pub fn new(command: &'static str, cfg: &Config) -> Self {
        Self {
            command,
            config: cfg.lines(),
        }
    }

    pub fn lines(&self) -> Vec<String> {
        let mut v = vec![format!("tool={TOOL}"), format!("command={}", self.command)];
        v.extend(self.config.iter().cloned());
        v
    }

    fn json(&self) -> Value {
        let cfg: serde_json::Map<String, Value> = self
            .config
            .iter()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_owned(), Value::String(v.to_owned())))
            .collect();
        json!({ "tool": TOOL, "command": self.command, "config": cfg })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// CSV writer whose file starts with `# key=value` provenance lines.
pub fn csv_writer(dir: &Path, name: &str, prov: &Provenance) -> Result<(csv::Writer<BufWriter<File>>, PathBuf), CliError> {
    let path = dir.join(name);
    let mut f = create(&path)?;
    for l in prov.lines() {
        writeln!(f, "# {l}").map_err(|e| CliError::Io(path.clone(), e))?;
    }
    Ok((csv::Writer::from_writer(f), path))
}

pub fn finish_csv(w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), CliError> {
    w.into_inner()
        .map_err(|e| CliError::Io(path.to_path_buf(), e.into_error()))?
        .flush()
        .map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// JSON report `{"provenance": …, "report": …}`.
pub fn write_json(dir: &Path, name: &str, prov: &Provenance, report: &impl Serialize) -> Result<(), CliError> {
    let path = dir.join(name);
    let body = json!({
        "provenance": prov.json(),
        "report": serde_json::to_value(report).map_err(|e| CliError::Abort(e.to_string()))?,
    });
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, &body).map_err(|e| CliError::Abort(e.to_string()))?;
    writeln!(f).and_then(|_| f.flush()).map_err(|e| CliError::Io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(path.to_path_buf(), e))
}
