//! Exact oracle against the leading-order cluster formulas.

use anyhow::{bail, Result};
use serde::Serialize;

use lrising::cluster::{conditional_m_leading, finite_volume_slack, logz_leading, m_beta_leading, two_point_leading};
use lrising::oracle::MAX_L;
use lrising::{enumerate, EventSpec, ModelParams, Observables, Triangle};

use crate::config::RunConfig;
use crate::output::OutDir;
use crate::Outcome;

/// One row of `cluster.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeRow {
    pub quantity: String,
    pub i: Option<i64>,
    pub j: Option<i64>,
    pub exact: f64,
    pub center: f64,
    pub half_width: f64,
    pub lo: f64,
    pub hi: f64,
    pub contained: bool,
}

impl EnvelopeRow {
    fn new(quantity: &str, ij: Option<(i64, i64)>, exact: f64, center: f64, half_width: f64) -> Self {
        EnvelopeRow {
            quantity: quantity.into(),
            i: ij.map(|x| x.0),
            j: ij.map(|x| x.1),
            exact,
            center,
            half_width,
            lo: center - half_width,
            hi: center + half_width,
            contained: (exact - center).abs() <= half_width,
        }
    }
}

/// Parse `i:j;i:j`; empty means the centered triangle with base `[-L/2, L/2 - 1]`.
pub fn externals(cfg: &RunConfig) -> Result<Vec<Triangle>> {
    if cfg.externals.trim().is_empty() {
        let h = (cfg.l / 2) as i64;
        return Ok(vec![Triangle::from_base(-h, h - 1)]);
    }
    let ev: EventSpec = format!("class(flips={})", cfg.externals).parse()?;
    match ev {
        EventSpec::Class { externals } => Ok(externals),
        _ => unreachable!(),
    }
}

/// Rows: `logZ` within 10%, `mu[s0]` in the `m_beta` envelope widened by the
/// finite-volume slack, the conditional magnetization in twice its envelope, and
/// truncated two-point functions at distance 2..=4 within 20% of the centers.
pub fn rows(p: &ModelParams, ext: &[Triangle]) -> Result<Vec<EnvelopeRow>> {
    if p.l > MAX_L {
        bail!("L = {} too large for exact enumeration (limit {MAX_L})", p.l);
    }
    let events = [EventSpec::All, EventSpec::Class { externals: ext.to_vec() }];
    let r = enumerate(p, &events, &Observables { pairs: true, ..Default::default() })?;
    let mut out = Vec::new();

    let lead = logz_leading(p)?.finite_volume.center;
    out.push(EnvelopeRow::new("log_z", None, r.log_z, lead, 0.1 * lead.abs()));

    let env = m_beta_leading(p);
    out.push(EnvelopeRow::new(
        "mu_s0",
        None,
        r.events[0].site_means[p.l],
        env.center,
        env.half_width + finite_volume_slack(p),
    ));

    let rho = ext.iter().map(|t| t.mass()).sum::<u64>() as f64 / p.volume() as f64;
    let cm = conditional_m_leading(rho, p)?;
    out.push(EnvelopeRow::new("conditional_m", None, r.events[1].mean_m, cm.center, 2.0 * cm.half_width));

    let l = p.l as i64;
    let on_frame = |x: i64| ext.iter().any(|t| t.in_sf(x));
    for i in -l..=l {
        for d in 2..=4 {
            let j = i + d;
            if j > l || on_frame(i) || on_frame(j) {
                continue;
            }
            let c = two_point_leading(i, j, ext, 0.0, p)?.center;
            let ex = r.events[1].truncated((i + l) as usize, (j + l) as usize).unwrap_or(f64::NAN);
            out.push(EnvelopeRow::new("two_point", Some((i, j)), ex, c, 0.2 * c.abs()));
        }
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params()?;
    let ext = externals(cfg)?;
    let rows = rows(&p, &ext)?;
    let mut out = OutDir::create(cfg)?;
    let mut w = out.csv("cluster.csv", cfg, "cluster")?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let inside = rows.iter().filter(|r| r.contained).count();
    Ok(Outcome {
        pass: true,
        summary: format!("cluster: {inside} of {} quantities inside their envelopes", rows.len()),
        files: out.files,
    })
}
