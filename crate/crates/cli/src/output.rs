//! Output files: CSV with `#` header lines, JSONL with a header object first.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Bumped whenever a CSV column or JSONL field changes; see `docs/schema.md`.
pub const SCHEMA_VERSION: u32 = 1;

pub struct OutDir {
    dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl OutDir {
    /// Create the output directory and write the effective config into `run.cfg`.
    pub fn create(cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        let mut d = OutDir { dir: cfg.out.clone(), files: Vec::new() };
        let p = d.path("run.cfg");
        std::fs::write(&p, cfg.emit()).with_context(|| format!("writing {}", p.display()))?;
        Ok(d)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    pub fn csv(&mut self, name: &str, cfg: &RunConfig, command: &str) -> Result<csv::Writer<BufWriter<File>>> {
        let p = self.path(name);
        let mut f = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        for line in cfg.header(command) {
            write!(f, "# {line}\r\n")?;
        }
        Ok(csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(f))
    }

    pub fn jsonl(&mut self, name: &str, cfg: &RunConfig, command: &str) -> Result<Jsonl> {
        let p = self.path(name);
        let f = BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?);
        let mut j = Jsonl { f };
        j.write(&json!({ "header": header_value(cfg, command) }))?;
        Ok(j)
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, serde_json::to_string_pretty(value)? + "\n")
            .with_context(|| format!("writing {}", p.display()))
    }
}

pub fn header_value(cfg: &RunConfig, command: &str) -> Value {
    let config: serde_json::Map<String, Value> =
        cfg.entries().into_iter().map(|(k, v)| (k.to_string(), Value::String(v))).collect();
    json!({ "command": command, "schema": SCHEMA_VERSION, "config": config })
}

pub struct Jsonl {
    f: BufWriter<File>,
}

impl Jsonl {
    pub fn write<T: Serialize>(&mut self, v: &T) -> Result<()> {
        serde_json::to_writer(&mut self.f, v)?;
        self.f.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.f.flush()?;
        Ok(())
    }
}
