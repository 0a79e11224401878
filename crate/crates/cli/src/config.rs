//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use lrising::params::{alpha_plus, min_separation_constant};
use lrising::sampler::{Dynamics, Start};
use lrising::ModelParams;

/// Everything a subcommand needs. Unset optional keys fall back to the model defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub big_j: f64,
    pub beta: f64,
    pub l: usize,
    pub c: f64,
    pub a: Option<f64>,
    pub gamma: Option<f64>,
    pub nu: Option<f64>,
    pub m: f64,
    pub m_beta: Option<f64>,
    pub eps0_abs: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    /// Event list for `enumerate` and the laplace suite.
    pub events: String,
    /// `i:j;i:j` external triangles for `cluster`.
    pub externals: String,
    pub field_r: f64,
    pub dynamics: Dynamics,
    pub start: Start,
    pub burn_in: u64,
    pub sweeps: u64,
    pub measure_every: u64,
    pub replicas: u64,
    /// Random instances for the sampled parts of the check suites.
    pub samples: u64,
    /// Largest contour or family mass enumerated by the check suites.
    pub mass_max: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.3,
            big_j: 10.0,
            beta: 2.0,
            l: 8,
            c: 14.0,
            a: None,
            gamma: None,
            nu: None,
            m: 0.0,
            m_beta: None,
            eps0_abs: None,
            seed: 1,
            out: PathBuf::from("out"),
            events: "all".into(),
            externals: String::new(),
            field_r: 0.0,
            dynamics: Dynamics::WindowRestricted,
            start: Start::Droplet,
            burn_in: 1000,
            sweeps: 10_000,
            measure_every: 1,
            replicas: 4,
            samples: 1000,
            mass_max: 5,
        }
    }
}

#[cfg(test)]
const KEYS: &[&str] = &[
    "alpha",
    "bigJ",
    "beta",
    "L",
    "C",
    "a",
    "gamma",
    "nu",
    "m",
    "m_beta",
    "eps0_abs",
    "seed",
    "out",
    "events",
    "externals",
    "field_r",
    "dynamics",
    "start",
    "burn_in",
    "sweeps",
    "measure_every",
    "replicas",
    "samples",
    "mass_max",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow::anyhow!("{key}: cannot parse '{v}': {e}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = num(key, v)?,
            "bigJ" => self.big_j = num(key, v)?,
            "beta" => self.beta = num(key, v)?,
            "L" => self.l = num(key, v)?,
            "C" => self.c = num(key, v)?,
            "a" => self.a = Some(num(key, v)?),
            "gamma" => self.gamma = Some(num(key, v)?),
            "nu" => self.nu = Some(num(key, v)?),
            "m" => self.m = num(key, v)?,
            "m_beta" => self.m_beta = Some(num(key, v)?),
            "eps0_abs" => self.eps0_abs = Some(num(key, v)?),
            "seed" => self.seed = num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "events" => self.events = v.to_string(),
            "externals" => self.externals = v.to_string(),
            "field_r" => self.field_r = num(key, v)?,
            "dynamics" => self.dynamics = num(key, v)?,
            "start" => self.start = num(key, v)?,
            "burn_in" => self.burn_in = num(key, v)?,
            "sweeps" => self.sweeps = num(key, v)?,
            "measure_every" => self.measure_every = num(key, v)?,
            "replicas" => self.replicas = num(key, v)?,
            "samples" => self.samples = num(key, v)?,
            "mass_max" => self.mass_max = num(key, v)?,
            _ => bail!("unknown key '{key}'"),
        }
        Ok(())
    }

    /// Ordered `(key, value)` pairs; unset optional keys are left out.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut e = vec![
            ("alpha", self.alpha.to_string()),
            ("bigJ", self.big_j.to_string()),
            ("beta", self.beta.to_string()),
            ("L", self.l.to_string()),
            ("C", self.c.to_string()),
        ];
        for (k, v) in [("a", self.a), ("gamma", self.gamma), ("nu", self.nu)] {
            if let Some(v) = v {
                e.push((k, v.to_string()));
            }
        }
        e.push(("m", self.m.to_string()));
        if let Some(v) = self.m_beta {
            e.push(("m_beta", v.to_string()));
        }
        if let Some(v) = self.eps0_abs {
            e.push(("eps0_abs", v.to_string()));
        }
        e.extend([
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("events", self.events.clone()),
            ("externals", self.externals.clone()),
            ("field_r", self.field_r.to_string()),
            ("dynamics", self.dynamics.to_string()),
            ("start", self.start.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("sweeps", self.sweeps.to_string()),
            ("measure_every", self.measure_every.to_string()),
            ("replicas", self.replicas.to_string()),
            ("samples", self.samples.to_string()),
            ("mass_max", self.mass_max.to_string()),
        ]);
        e
    }

    pub fn emit(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Apply a config text on top of `self`. Blank lines and `#` comments are skipped;
    /// values are trimmed, so they cannot carry leading or trailing spaces.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').with_context(|| format!("line {}: expected key = value", no + 1))?;
            let k = k.trim();
            if seen.contains(&k) {
                bail!("line {}: duplicate key '{k}'", no + 1);
            }
            seen.push(k);
            self.set(k, v.trim()).with_context(|| format!("line {}", no + 1))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Every problem with the model parameters, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.alpha > 0.0 && self.alpha < alpha_plus()) {
            out.push(format!("alpha: {} not in (0, {:.7})", self.alpha, alpha_plus()));
        }
        if !(self.big_j >= 0.0 && self.big_j.is_finite()) {
            out.push(format!("bigJ: {} must be finite and >= 0", self.big_j));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            out.push(format!("beta: {} must be finite and >= 0", self.beta));
        }
        if self.l == 0 {
            out.push("L: must be positive".into());
        }
        if !(self.c >= min_separation_constant()) {
            out.push(format!("C: {} below {:.6}", self.c, min_separation_constant()));
        }
        for (k, v) in [("a", self.a), ("gamma", self.gamma), ("nu", self.nu)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    out.push(format!("{k}: {v} not in (0, 1)"));
                }
            }
        }
        if !(self.m.is_finite() && self.m.abs() <= 1.0) {
            out.push(format!("m: {} not in [-1, 1]", self.m));
        }
        if let Some(mb) = self.m_beta {
            if !(mb > 0.0 && mb <= 1.0) {
                out.push(format!("m_beta: {mb} not in (0, 1]"));
            }
        }
        if !self.field_r.is_finite() {
            out.push("field_r: must be finite".into());
        }
        if self.measure_every == 0 {
            out.push("measure_every: must be positive".into());
        }
        if self.replicas == 0 {
            out.push("replicas: must be positive".into());
        }
        out
    }

    pub fn params(&self) -> Result<ModelParams> {
        let p = self.problems();
        if !p.is_empty() {
            bail!("invalid configuration:\n  {}", p.join("\n  "));
        }
        let base = ModelParams::new(self.alpha, self.big_j, self.beta, self.l)?.with_c(self.c)?;
        Ok(base.with_exponents(
            self.a.unwrap_or(base.a),
            self.gamma.unwrap_or(base.gamma),
            self.nu.unwrap_or(base.nu),
        )?)
    }

    /// Header lines echoed at the top of every output file.
    pub fn header(&self, command: &str) -> Vec<String> {
        let mut h = vec![format!("lrising {command} schema={}", crate::output::SCHEMA_VERSION)];
        h.extend(self.entries().into_iter().map(|(k, v)| format!("{k}={v}")));
        h
    }
}
