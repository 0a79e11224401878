use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use lrising::cluster::m_beta_leading;
use lrising::geometry::droplet_stats_with;
use lrising::spins::parse_spin_line;
use lrising::{build_triangles, group_contours, rho_targets, DropletReport, DropletTargets};

use crate::config::RunConfig;
use crate::output::OutDir;
use crate::Outcome;

#[derive(Serialize)]
struct TriangleOut {
    i: i64,
    j: i64,
    mass: u64,
    external: bool,
}

#[derive(Serialize)]
struct Record {
    line: usize,
    l: usize,
    spins: String,
    triangles: Vec<TriangleOut>,
    /// Triangles of each contour as `[i, j]` pairs.
    contours: Vec<Vec<[i64; 2]>>,
    droplet: Option<DropletReport>,
    invariants_ok: bool,
}

/// Parse every line first so that a malformed one fails before any output is written.
fn read_lines(input: &Path) -> Result<Vec<(usize, String, Vec<i8>)>> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let s = parse_spin_line(line).with_context(|| format!("{}:{}", input.display(), k + 1))?;
        if s.len() % 2 == 0 {
            anyhow::bail!("{}:{}: length {} is even, expected 2L+1", input.display(), k + 1, s.len());
        }
        out.push((k + 1, line.to_string(), s));
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig, input: &Path) -> Result<Outcome> {
    let base = cfg.params()?;
    let lines = read_lines(input)?;
    let mut out = OutDir::create(cfg)?;
    let mut w = out.jsonl("geometry.jsonl", cfg, "geometry")?;
    let mut all_ok = true;
    for (no, text, s) in &lines {
        let l = s.len() / 2;
        let fam = build_triangles(s);
        let ok = fam.invariants_hold();
        all_ok &= ok;
        let contours = group_contours(&fam, cfg.c);
        // the droplet report needs m inside (-m_beta, m_beta)
        let droplet = base.with_l(l).ok().and_then(|p| {
            let m_beta = cfg.m_beta.unwrap_or_else(|| m_beta_leading(&p).center.clamp(1e-9, 1.0));
            let rt = rho_targets(cfg.m, m_beta, l).ok()?;
            Some(droplet_stats_with(s, &fam, &p, &DropletTargets { m: cfg.m, m_beta, rho: rt.rho }))
        });
        let triangles = fam
            .triangles()
            .iter()
            .enumerate()
            .map(|(k, t)| TriangleOut { i: t.i, j: t.j, mass: t.mass(), external: fam.is_external(k) })
            .collect();
        let contours = contours.contours.iter().map(|c| c.triangles().iter().map(|t| [t.i, t.j]).collect()).collect();
        w.write(&Record { line: *no, l, spins: text.clone(), triangles, contours, droplet, invariants_ok: ok })?;
    }
    w.finish()?;
    Ok(Outcome {
        pass: all_ok,
        summary: format!("geometry: {} lines, all invariant checks pass: {all_ok}", lines.len()),
        files: out.files,
    })
}
