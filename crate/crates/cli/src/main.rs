//! `lrising`: command-line harness for the long-range Ising workspace.
//!
//! Exit status: 0 on success, 1 when a checked assertion fails, 2 on usage or
//! configuration errors.

mod check;
mod cluster;
mod config;
mod geometry;
mod output;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

pub struct Outcome {
    pub pass: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Parser)]
#[command(
    name = "lrising",
    version,
    about = "Long-range 1D Ising model: geometry, checks, exact enumeration and sampling"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Model flags shared by every subcommand. They override values from `--config`.
#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Nearest-neighbour enhancement J, with J(1) = J + 1
    #[arg(long = "bigJ")]
    big_j: Option<String>,
    /// Window half-width, |Lambda| = 2L + 1
    #[arg(long = "L")]
    l: Option<String>,
    /// Target magnetization
    #[arg(long)]
    m: Option<String>,
    /// Exponent of eps0 = |Lambda|^-a
    #[arg(long)]
    a: Option<String>,
    /// Exponent of eps_s = |Lambda|^-gamma
    #[arg(long)]
    gamma: Option<String>,
    /// Exponent of eps_c = |Lambda|^-nu
    #[arg(long)]
    nu: Option<String>,
    /// Contour separation constant
    #[arg(long = "C")]
    c: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// Any other config key, as key=value (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Triangles, contours and droplet observables of each line of a spin file
    #[command(allow_negative_numbers = true)]
    Geometry {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite
    #[command(allow_negative_numbers = true)]
    Check {
        #[arg(value_enum)]
        suite: check::Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Exact enumeration of a small window
    #[command(allow_negative_numbers = true)]
    Enumerate {
        /// Comma separated events, e.g. "all,window(m=0,eps0=0.2)"
        #[arg(long)]
        events: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Conditioned Monte Carlo run with a droplet measurement stream
    #[command(allow_negative_numbers = true)]
    Sample {
        #[arg(long)]
        dynamics: Option<String>,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        sweeps: Option<String>,
        #[arg(long = "burn-in")]
        burn_in: Option<String>,
        #[arg(long)]
        replicas: Option<String>,
        #[arg(long = "m-beta")]
        m_beta: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact values against the leading-order cluster envelopes
    #[command(allow_negative_numbers = true)]
    Cluster {
        /// External triangles as flip pairs, e.g. "-5:3;4:6"
        #[arg(long)]
        externals: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn config(&self, extra: &[(&str, &Option<String>)]) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("bigJ", &self.big_j),
            ("L", &self.l),
            ("m", &self.m),
            ("a", &self.a),
            ("gamma", &self.gamma),
            ("nu", &self.nu),
            ("C", &self.c),
            ("seed", &self.seed),
            ("out", &self.out),
        ];
        for (k, v) in flags.iter().chain(extra) {
            if let Some(v) = v {
                cfg.set(k, v).with_context(|| format!("--{k}"))?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set {kv}: expected KEY=VALUE"))?;
            cfg.set(k.trim(), v.trim()).with_context(|| format!("--set {kv}"))?;
        }
        Ok(cfg)
    }
}

fn dispatch(cmd: Cmd) -> Result<Outcome> {
    match cmd {
        Cmd::Geometry { input, common } => geometry::run(&common.config(&[])?, &input),
        Cmd::Check { suite, common } => check::run(&common.config(&[])?, suite),
        Cmd::Enumerate { events, common } => runs::enumerate_cmd(&common.config(&[("events", &events)])?),
        Cmd::Sample { dynamics, start, sweeps, burn_in, replicas, m_beta, common } => {
            runs::sample_cmd(&common.config(&[
                ("dynamics", &dynamics),
                ("start", &start),
                ("sweeps", &sweeps),
                ("burn_in", &burn_in),
                ("replicas", &replicas),
                ("m_beta", &m_beta),
            ])?)
        }
        Cmd::Cluster { externals, common } => cluster::run(&common.config(&[("externals", &externals)])?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                println!("  wrote {}", f.display());
            }
            if o.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
