//! Named verification suites. Every inequality instance becomes a row of
//! `check_<suite>.csv`; the summary goes to `check_<suite>.json`.

use anyhow::{bail, Result};
use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use lrising::contour::{census_with_peierls, peierls_exhaustive, peierls_pairs, summarize, AffineInstance};
use lrising::geometry::{count_external_families, fragmentation_check};
use lrising::intervals::{family_energy, merge_gain, Interval};
use lrising::oracle::{laplace_check, laplace_threshold, parse_event_list};
use lrising::{build_triangles, reconstruct_spins, Kernel, ModelParams};

use crate::cluster;
use crate::config::RunConfig;
use crate::output::{header_value, OutDir};
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Peierls,
    Entropy,
    Merge,
    Laplace,
    Cluster,
    Bijection,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Peierls => "peierls",
            Suite::Entropy => "entropy",
            Suite::Merge => "merge",
            Suite::Laplace => "laplace",
            Suite::Cluster => "cluster",
            Suite::Bijection => "bijection",
        }
    }
}

/// `lhs relation rhs`, one checked inequality.
#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    pub group: String,
    pub instance: String,
    pub lhs: f64,
    pub relation: &'static str,
    pub rhs: f64,
    pub holds: bool,
}

fn inst(group: &str, instance: impl ToString, lhs: f64, relation: &'static str, rhs: f64, holds: bool) -> Instance {
    Instance { group: group.into(), instance: instance.to_string(), lhs, relation, rhs, holds }
}

/// Exhaustive up to this many sites, random samples beyond.
const BIJECTION_EXHAUSTIVE: usize = 21;

fn bijection(cfg: &RunConfig, rows: &mut Vec<Instance>) -> Value {
    let n = 2 * cfg.l + 1;
    let check = |code: String, s: &[i8], rows: &mut Vec<Instance>| {
        let f = build_triangles(s);
        let back = reconstruct_spins(&f, cfg.l).unwrap_or_default();
        let diff = if back.len() == s.len() { s.iter().zip(&back).filter(|(a, b)| a != b).count() } else { s.len() };
        let bad = f.invariant_violations().len();
        rows.push(inst("round_trip", &code, diff as f64, "==", 0.0, diff == 0));
        rows.push(inst("invariants", code, bad as f64, "==", 0.0, bad == 0));
    };
    let exhaustive = n <= BIJECTION_EXHAUSTIVE;
    if exhaustive {
        for code in 0u64..1 << n {
            let s: Vec<i8> = (0..n).map(|k| if code >> k & 1 == 1 { -1 } else { 1 }).collect();
            check(code.to_string(), &s, rows);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for k in 0..cfg.samples {
            let s: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            check(format!("sample{k}"), &s, rows);
        }
    }
    json!({ "volume": n, "exhaustive": exhaustive })
}

fn affine_rows(group: &str, inst_list: &[AffineInstance], j: f64, rows: &mut Vec<Instance>) {
    for (k, x) in inst_list.iter().enumerate() {
        rows.push(inst(group, k, x.e0 + j * x.flips as f64, ">=", x.rhs, x.holds_at(j)));
    }
}

fn peierls(cfg: &RunConfig, p: &ModelParams, rows: &mut Vec<Instance>) -> Result<Value> {
    if cfg.l > 10 {
        bail!("peierls: L = {} too large for the exhaustive part (limit 10)", cfg.l);
    }
    let ex = peierls_exhaustive(cfg.l, p.alpha);
    let pairs = peierls_pairs(cfg.samples as usize, 60, p.c, p.alpha, cfg.seed);
    affine_rows("configurations", &ex, p.j, rows);
    affine_rows("pairs", &pairs, p.j, rows);
    let (_, contours) = census_with_peierls(cfg.mass_max, p.c, Some((p.alpha, p.j)));
    let contours = contours.expect("census runs the Peierls check when asked");
    rows.push(inst(
        "contours",
        format!("mass<={}", cfg.mass_max),
        contours.worst_margin,
        ">=",
        0.0,
        contours.violations_at_j == 0,
    ));
    let checks = [summarize("configurations", &ex, p.j), summarize("pairs", &pairs, p.j), contours];
    let min_j = checks.iter().map(|c| c.min_j).try_fold(1u32, |a, b| b.map(|b| a.max(b)));
    Ok(json!({ "min_j": min_j, "checks": checks }))
}

fn entropy(cfg: &RunConfig, p: &ModelParams, rows: &mut Vec<Instance>) -> Result<Value> {
    let n = p.volume();
    let thr = (n as f64).powf(1.0 - p.gamma);
    let mut max_count = 0;
    for mass in 0..=n {
        let r = count_external_families(cfg.l, mass as f64 / n as f64, thr)?;
        max_count = max_count.max(r.count);
        rows.push(inst("families", format!("mass={mass}"), r.count as f64, "<=", r.log_bound.exp(), r.holds));
    }
    Ok(json!({ "volume": n, "gamma": p.gamma, "threshold": thr, "max_count": max_count }))
}

fn random_family(rng: &mut ChaCha8Rng, l: i64) -> Vec<Interval> {
    let k = rng.gen_range(2..=8usize);
    let mut pts: Vec<i64> = Vec::new();
    while pts.len() < 2 * k.min(l as usize) {
        let x = rng.gen_range(-l..=l);
        if !pts.contains(&x) {
            pts.push(x);
        }
    }
    pts.sort_unstable();
    let mut out: Vec<Interval> = Vec::new();
    for w in pts.chunks(2) {
        let iv = Interval::new(w[0], w[1]);
        if out.last().is_some_and(|q| q.hi + 1 >= iv.lo) {
            continue;
        }
        out.push(iv);
    }
    out
}

fn merge(cfg: &RunConfig, p: &ModelParams, rows: &mut Vec<Instance>) -> Result<Value> {
    let l = cfg.l as i64;
    let k = Kernel::with_range(p.alpha, p.j, 2 * cfg.l + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut fams = 0;
    let mut tries = 0;
    while fams < cfg.samples && tries < 100 * cfg.samples.max(1) {
        tries += 1;
        let f = random_family(&mut rng, l);
        if f.len() < 2 {
            continue;
        }
        fams += 1;
        let g = merge_gain(&f, &k);
        rows.push(inst("merge_gain", format!("family{fams}"), g, ">", 0.0, g > 0.0));
        let e = family_energy(&f, &k);
        for gap in 1..f.len() {
            if f[gap].lo - f[gap - 1].hi <= 2 {
                continue;
            }
            let moved: Vec<Interval> = f
                .iter()
                .enumerate()
                .map(|(q, iv)| if q >= gap { Interval::new(iv.lo - 1, iv.hi - 1) } else { *iv })
                .collect();
            let em = family_energy(&moved, &k);
            rows.push(inst("gap_shrink", format!("family{fams}/gap{gap}"), em, "<", e, em < e));
        }
    }
    let window = p.volume();
    for mass in 1..=cfg.mass_max.min(window as u64) {
        let r = fragmentation_check(mass, window, p.alpha, p.j)?;
        if r.families > 0 {
            rows.push(inst(
                "fragmentation",
                format!("mass={mass}"),
                r.best_other_energy,
                ">",
                r.single_energy,
                r.holds(),
            ));
        }
    }
    Ok(json!({ "families": fams, "fragmentation_window": window }))
}

fn laplace(cfg: &RunConfig, p: &ModelParams, rows: &mut Vec<Instance>) -> Result<Value> {
    let events = parse_event_list(&cfg.events)?;
    let mut out = Vec::new();
    for ev in &events {
        let (kind, ts) = laplace_threshold(p, ev);
        let Some(ts) = ts else {
            bail!("laplace: event {ev} has no stated range of t (use vs(flips=..) or class(flips=i:j))");
        };
        for r in laplace_check(p, ev, &[ts / 2.0, -ts / 2.0, ts / 4.0, -ts / 4.0])? {
            rows.push(inst(&r.event, r.t, r.gap.abs(), "<=", r.bound, r.holds && r.admissible));
        }
        out.push(json!({ "event": ev.to_string(), "kind": format!("{kind:?}"), "t_star": ts }));
    }
    Ok(Value::Array(out))
}

fn cluster_suite(cfg: &RunConfig, p: &ModelParams, rows: &mut Vec<Instance>) -> Result<Value> {
    let ext = cluster::externals(cfg)?;
    for r in cluster::rows(p, &ext)? {
        let name = match (r.i, r.j) {
            (Some(i), Some(j)) => format!("{i}:{j}"),
            _ => String::new(),
        };
        rows.push(inst(&r.quantity, name, (r.exact - r.center).abs(), "<=", r.half_width, r.contained));
    }
    Ok(json!({ "externals": ext.iter().map(|t| [t.i, t.j]).collect::<Vec<_>>() }))
}

pub fn run(cfg: &RunConfig, suite: Suite) -> Result<Outcome> {
    let p = cfg.params()?;
    let mut rows = Vec::new();
    let details = match suite {
        Suite::Bijection => bijection(cfg, &mut rows),
        Suite::Peierls => peierls(cfg, &p, &mut rows)?,
        Suite::Entropy => entropy(cfg, &p, &mut rows)?,
        Suite::Merge => merge(cfg, &p, &mut rows)?,
        Suite::Laplace => laplace(cfg, &p, &mut rows)?,
        Suite::Cluster => cluster_suite(cfg, &p, &mut rows)?,
    };
    let failed = rows.iter().filter(|r| !r.holds).count();
    let pass = failed == 0;
    let name = suite.name();
    let mut out = OutDir::create(cfg)?;
    let mut w = out.csv(&format!("check_{name}.csv"), cfg, "check")?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    out.json(
        &format!("check_{name}.json"),
        &json!({
            "header": header_value(cfg, "check"),
            "suite": name,
            "pass": pass,
            "instances": rows.len(),
            "failed": failed,
            "details": details,
        }),
    )?;
    let extra = match suite {
        Suite::Peierls => format!(", minimal J {}", details["min_j"]),
        _ => String::new(),
    };
    Ok(Outcome {
        pass,
        summary: format!(
            "check {name}: {} ({} instances, {failed} failed{extra})",
            if pass { "PASS" } else { "FAIL" },
            rows.len()
        ),
        files: out.files,
    })
}
