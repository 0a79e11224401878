//! Exact enumeration of small windows.
//!
//! All `2^|Lambda|` configurations are visited in Gray-code order, so that each
//! step is one flip with an O(|Lambda|) energy update. The space is split by a
//! fixed prefix of high spins across workers and reduced in prefix order.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{build_triangles, n0_count, Triangle};
use crate::kernel::build_kernel;
use crate::params::{zeta_alpha, ModelParams};
use crate::spins::SpinConfig;

/// Largest half-width the oracle accepts.
pub const MAX_L: usize = 12;

/// Predicate on configurations of a fixed window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EventSpec {
    All,
    /// `|m_Lambda - m| < eps0 m_beta`. Missing values are filled by [`EventSpec::resolve`].
    Window {
        m: f64,
        eps0: Option<f64>,
        m_beta: Option<f64>,
    },
    /// Large external triangles equal exactly `externals` (empty: no large external triangle).
    Class {
        externals: Vec<Triangle>,
    },
    /// Large external mass within `(rho +- eps_c)|Lambda|`, at least one large external.
    /// `eps_c = Some(0.0)` is the exact event.
    S1 {
        rho: f64,
        eps_c: Option<f64>,
    },
    /// [`EventSpec::S1`] with a single dominant external triangle.
    SB {
        rho: f64,
        eps_c: Option<f64>,
    },
    /// Class of `externals` with every other triangle of mass at most `eps_s |Lambda|`.
    VerySmall {
        externals: Vec<Triangle>,
    },
    /// No large external triangle.
    Small,
    Not(Box<EventSpec>),
    And(Vec<EventSpec>),
}

/// Per-configuration quantities the predicates look at.
struct Features {
    sum: i64,
    large: Vec<Triangle>,
    /// Heaviest triangle that is not a large external one.
    other_max: u64,
}

impl Features {
    fn of(spins: &[i8], eps_s_abs: f64, need_geometry: bool) -> Self {
        let sum = spins.iter().map(|&s| s as i64).sum();
        if !need_geometry {
            return Features { sum, large: Vec::new(), other_max: 0 };
        }
        let fam = build_triangles(spins);
        let mut large = Vec::new();
        let mut other_max = 0;
        for (k, t) in fam.triangles().iter().enumerate() {
            if fam.is_external(k) && t.mass() as f64 > eps_s_abs {
                large.push(*t);
            } else {
                other_max = other_max.max(t.mass());
            }
        }
        large.sort();
        Features { sum, large, other_max }
    }
}

struct Thresholds {
    n: f64,
    eps_s_abs: f64,
    eps_c: f64,
}

const TOL: f64 = 1e-9;

impl EventSpec {
    /// Replace missing window parameters: `eps0` from `params`, `m_beta` by `m_beta`.
    pub fn resolve(&self, params: &ModelParams, m_beta: f64) -> EventSpec {
        match self {
            EventSpec::Window { m, eps0, m_beta: mb } => EventSpec::Window {
                m: *m,
                eps0: Some(eps0.unwrap_or_else(|| params.eps0())),
                m_beta: Some(mb.unwrap_or(m_beta)),
            },
            EventSpec::Not(e) => EventSpec::Not(Box::new(e.resolve(params, m_beta))),
            EventSpec::And(es) => EventSpec::And(es.iter().map(|e| e.resolve(params, m_beta)).collect()),
            e => e.clone(),
        }
    }

    /// Whether a window parameter is still missing its `m_beta`.
    pub fn needs_m_beta(&self) -> bool {
        match self {
            EventSpec::Window { m_beta, .. } => m_beta.is_none(),
            EventSpec::Not(e) => e.needs_m_beta(),
            EventSpec::And(es) => es.iter().any(|e| e.needs_m_beta()),
            _ => false,
        }
    }

    fn needs_geometry(&self) -> bool {
        match self {
            EventSpec::All | EventSpec::Window { .. } => false,
            EventSpec::Not(e) => e.needs_geometry(),
            EventSpec::And(es) => es.iter().any(|e| e.needs_geometry()),
            _ => true,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            EventSpec::Window { m_beta: None, .. } => {
                Err(Error::InvalidSpec(format!("{self}: m_beta must be resolved before enumeration")))
            }
            EventSpec::Window { m_beta: Some(mb), .. } if !(*mb > 0.0) => {
                Err(Error::InvalidSpec(format!("{self}: m_beta must be positive")))
            }
            EventSpec::S1 { rho, .. } | EventSpec::SB { rho, .. } if !(0.0..=1.0).contains(rho) => {
                Err(Error::InvalidSpec(format!("{self}: rho not in [0, 1]")))
            }
            EventSpec::Not(e) => e.check(),
            EventSpec::And(es) => es.iter().try_for_each(|e| e.check()),
            _ => Ok(()),
        }
    }

    fn eval(&self, f: &Features, th: &Thresholds, params: &ModelParams) -> bool {
        let mass = || f.large.iter().map(|t| t.mass()).sum::<u64>() as f64;
        let in_s1 = |rho: f64, eps_c: Option<f64>| {
            let e = eps_c.unwrap_or(th.eps_c) * th.n;
            !f.large.is_empty() && (mass() - rho * th.n).abs() <= e + TOL
        };
        match self {
            EventSpec::All => true,
            EventSpec::Window { m, eps0, m_beta } => {
                let eps0 = eps0.unwrap_or_else(|| params.eps0());
                (f.sum as f64 / th.n - m).abs() < eps0 * m_beta.unwrap_or(1.0)
            }
            EventSpec::Class { externals } => f.large == *externals,
            EventSpec::S1 { rho, eps_c } => in_s1(*rho, *eps_c),
            EventSpec::SB { rho, eps_c } => {
                let masses: Vec<u64> = f.large.iter().map(|t| t.mass()).collect();
                in_s1(*rho, *eps_c) && n0_count(&masses, th.eps_c * th.n) == 1
            }
            EventSpec::VerySmall { externals } => {
                f.large == *externals && !externals.is_empty() && f.other_max as f64 <= th.eps_s_abs
            }
            EventSpec::Small => f.large.is_empty(),
            EventSpec::Not(e) => !e.eval(f, th, params),
            EventSpec::And(es) => es.iter().all(|e| e.eval(f, th, params)),
        }
    }

    /// Canonical form: class and very-small families sorted.
    fn normalized(&self) -> EventSpec {
        match self {
            EventSpec::Class { externals } => {
                let mut e = externals.clone();
                e.sort();
                EventSpec::Class { externals: e }
            }
            EventSpec::VerySmall { externals } => {
                let mut e = externals.clone();
                e.sort();
                EventSpec::VerySmall { externals: e }
            }
            EventSpec::Not(e) => EventSpec::Not(Box::new(e.normalized())),
            EventSpec::And(es) => EventSpec::And(es.iter().map(|e| e.normalized()).collect()),
            e => e.clone(),
        }
    }
}

fn fmt_tris(ts: &[Triangle]) -> String {
    ts.iter().map(|t| format!("{}:{}", t.i, t.j)).collect::<Vec<_>>().join(";")
}

impl fmt::Display for EventSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |name: &str, v: &Option<f64>| v.map(|x| format!(",{name}={x}")).unwrap_or_default();
        match self {
            EventSpec::All => write!(f, "all"),
            EventSpec::Small => write!(f, "small"),
            EventSpec::Window { m, eps0, m_beta } => {
                write!(f, "window(m={m}{}{})", opt("eps0", eps0), opt("mbeta", m_beta))
            }
            EventSpec::Class { externals } => write!(f, "class(flips={})", fmt_tris(externals)),
            EventSpec::VerySmall { externals } => write!(f, "vs(flips={})", fmt_tris(externals)),
            EventSpec::S1 { rho, eps_c } => write!(f, "s1(rho={rho}{})", opt("epsc", eps_c)),
            EventSpec::SB { rho, eps_c } => write!(f, "sb(rho={rho}{})", opt("epsc", eps_c)),
            EventSpec::Not(e) => write!(f, "not({e})"),
            EventSpec::And(es) => {
                write!(f, "and(")?;
                for (k, e) in es.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Split `s` at top-level commas.
fn split_top(s: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (k, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..k].trim());
                start = k + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(Error::InvalidSpec(format!("unbalanced parentheses in '{s}'")));
        }
    }
    if depth != 0 {
        return Err(Error::InvalidSpec(format!("unbalanced parentheses in '{s}'")));
    }
    let last = s[start..].trim();
    if !last.is_empty() {
        out.push(last);
    }
    Ok(out)
}

/// Split a comma separated list of events, as given on the command line.
pub fn parse_event_list(s: &str) -> Result<Vec<EventSpec>> {
    split_top(s)?.into_iter().map(|e| e.parse()).collect()
}

fn parse_tris(v: &str) -> Result<Vec<Triangle>> {
    let mut out = Vec::new();
    for part in v.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = part
            .split_once(':')
            .ok_or_else(|| Error::InvalidSpec(format!("triangle '{part}' is not of the form i:j")))?;
        let i: i64 = a.trim().parse().map_err(|_| Error::InvalidSpec(format!("bad flip '{a}'")))?;
        let j: i64 = b.trim().parse().map_err(|_| Error::InvalidSpec(format!("bad flip '{b}'")))?;
        if i >= j {
            return Err(Error::InvalidSpec(format!("triangle {i}:{j} needs i < j")));
        }
        out.push(Triangle::new(i, j));
    }
    out.sort();
    Ok(out)
}

impl FromStr for EventSpec {
    type Err = Error;

    /// Grammar: `all`, `small`, `window(m=..[,eps0=..][,mbeta=..])`, `s1(rho=..[,epsc=..])`,
    /// `sb(rho=..[,epsc=..])`, `class(flips=i:j;i:j)`, `vs(flips=..)`, `not(E)`, `and(E,E,..)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = match s.find('(') {
            Some(k) if s.ends_with(')') => (s[..k].trim(), &s[k + 1..s.len() - 1]),
            Some(_) => return Err(Error::InvalidSpec(format!("missing ')' in '{s}'"))),
            None => (s, ""),
        };
        let bad = |msg: String| Error::InvalidSpec(format!("{s}: {msg}"));
        if name == "not" {
            return Ok(EventSpec::Not(Box::new(body.parse()?)));
        }
        if name == "and" {
            let es = split_top(body)?.into_iter().map(|e| e.parse()).collect::<Result<Vec<_>>>()?;
            if es.is_empty() {
                return Err(bad("empty intersection".into()));
            }
            return Ok(EventSpec::And(es));
        }
        let mut kv = std::collections::BTreeMap::new();
        for part in split_top(body)? {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(format!("expected key=value, got '{part}'")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let allowed: &[&str] = match name {
            "all" | "small" => &[],
            "window" => &["m", "eps0", "mbeta"],
            "s1" | "sb" => &["rho", "epsc"],
            "class" | "vs" => &["flips"],
            _ => return Err(bad(format!("unknown event '{name}'"))),
        };
        if let Some(k) = kv.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(bad(format!("unknown key '{k}'")));
        }
        let num = |k: &str| -> Result<Option<f64>> {
            kv.get(k).map(|v| v.parse::<f64>().map_err(|_| bad(format!("{k}='{v}' is not a number")))).transpose()
        };
        let req = |k: &str| -> Result<f64> { num(k)?.ok_or_else(|| bad(format!("missing {k}"))) };
        Ok(match name {
            "all" => EventSpec::All,
            "small" => EventSpec::Small,
            "window" => EventSpec::Window { m: req("m")?, eps0: num("eps0")?, m_beta: num("mbeta")? },
            "s1" => EventSpec::S1 { rho: req("rho")?, eps_c: num("epsc")? },
            "sb" => EventSpec::SB { rho: req("rho")?, eps_c: num("epsc")? },
            "class" => EventSpec::Class { externals: parse_tris(kv.get("flips").map(|s| s.as_str()).unwrap_or(""))? },
            "vs" => EventSpec::VerySmall { externals: parse_tris(kv.get("flips").map(|s| s.as_str()).unwrap_or(""))? },
            _ => unreachable!(),
        })
    }
}

/// What to accumulate besides the partition function.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Observables {
    /// Tilt `r` of the measure `e^{-beta h + beta r sum sigma}`.
    pub field_r: f64,
    /// `mu[sigma_i sigma_j | E]` for all pairs.
    pub pairs: bool,
    /// Distribution of `sum sigma`.
    pub histogram: bool,
    /// Values of `t` for `log mu[e^{beta t sum sigma} | E]`.
    pub laplace_t: Vec<f64>,
    /// Reference sum `c` for the centered gaps
    /// `log mu[e^{beta t (S - c)} | E] - beta t mu[S - c | E]`, which keep their
    /// relative precision when tiny.
    pub laplace_center: Option<i64>,
}

/// Exact results for one event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventResult {
    pub event: String,
    /// Number of configurations in the event.
    pub count: u64,
    /// `log sum_{sigma in E} e^{-beta h + beta r sum sigma}`.
    pub log_z: f64,
    pub probability: f64,
    /// `mu[m_Lambda | E]`.
    pub mean_m: f64,
    /// `mu[sigma_i | E]`, left to right.
    pub site_means: Vec<f64>,
    /// `mu[sigma_i sigma_j | E]` when requested.
    pub pair_means: Option<Vec<Vec<f64>>>,
    /// Joint sign probabilities `[P(++), P(+-), P(-+), P(--)]` of `(sigma_i, sigma_j)`,
    /// row-major over pairs, when requested.
    #[serde(skip)]
    pub pair_table: Option<Vec<[f64; 4]>>,
    /// `P(sum sigma = 2k - |Lambda| | E)` at index `k`, when requested.
    pub histogram: Option<Vec<f64>>,
    /// `(t, log mu[e^{beta t sum sigma} | E])`.
    pub laplace: Vec<(f64, f64)>,
    /// `(t, log mu[e^{beta t sum sigma} | E] - beta t mu[sum sigma | E])`, when a center is given.
    pub laplace_gap: Vec<(f64, f64)>,
    /// `sum sigma` of the most likely configuration in the event.
    pub mode_sum: i64,
}

impl EventResult {
    /// Truncated correlation `mu[s_i s_j|E] - mu[s_i|E] mu[s_j|E]` by array index,
    /// as `4 (P(++) P(--) - P(+-) P(-+))` so that tiny values keep their precision.
    pub fn truncated(&self, a: usize, b: usize) -> Option<f64> {
        let t = self.pair_table.as_ref()?;
        let n = self.site_means.len();
        let [pp, pm, mp, mm] = t[a * n + b];
        Some(4.0 * (pp * mm - pm * mp))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub l: usize,
    pub beta: f64,
    pub field_r: f64,
    /// `log Z` over all configurations (tilted when `field_r != 0`).
    pub log_z: f64,
    pub configurations: u64,
    pub events: Vec<EventResult>,
}

impl OracleResult {
    pub fn event(&self, k: usize) -> &EventResult {
        &self.events[k]
    }
}

/// Running sums of `w = exp(lw - shift)` with the shift raised as needed.
#[derive(Debug, Clone)]
struct Acc {
    shift: f64,
    count: u64,
    z: f64,
    /// `z` without the weight-one configuration that set `shift`, so that
    /// `log z = shift + ln_1p(rest)` keeps its digits when `z` is close to one.
    rest: f64,
    s: f64,
    site: Vec<f64>,
    /// Per pair, weights split by the signs of the two spins.
    pair: Vec<[f64; 4]>,
    hist: Vec<f64>,
    lap: Vec<(f64, f64)>,
    mode_sum: i64,
    /// Per `t`: `sum w (expm1(x) - x)` and `sum w x` with `x = beta t (S - c)`.
    cen: Vec<(f64, f64)>,
    center: Option<i64>,
}

impl Acc {
    fn new(n: usize, obs: &Observables) -> Self {
        Acc {
            shift: f64::NEG_INFINITY,
            count: 0,
            z: 0.0,
            rest: 0.0,
            s: 0.0,
            site: vec![0.0; n],
            pair: if obs.pairs { vec![[0.0; 4]; n * n] } else { Vec::new() },
            hist: if obs.histogram { vec![0.0; n + 1] } else { Vec::new() },
            lap: vec![(f64::NEG_INFINITY, 0.0); obs.laplace_t.len()],
            mode_sum: 0,
            cen: if obs.laplace_center.is_some() { vec![(0.0, 0.0); obs.laplace_t.len()] } else { Vec::new() },
            center: obs.laplace_center,
        }
    }

    fn rescale(&mut self, new_shift: f64) {
        let f = if self.shift == f64::NEG_INFINITY { 0.0 } else { (self.shift - new_shift).exp() };
        self.z *= f;
        self.rest *= f;
        self.s *= f;
        self.site.iter_mut().for_each(|x| *x *= f);
        self.pair.iter_mut().flatten().for_each(|x| *x *= f);
        self.hist.iter_mut().for_each(|x| *x *= f);
        self.cen.iter_mut().for_each(|(a, b)| {
            *a *= f;
            *b *= f;
        });
        self.shift = new_shift;
    }

    fn push(&mut self, lw: f64, spins: &[i8], sum: i64, lap_t: &[f64], beta: f64) {
        self.count += 1;
        let new_mode = lw > self.shift;
        if new_mode {
            self.rescale(lw);
            self.mode_sum = sum;
            self.rest = self.z;
        }
        let w = (lw - self.shift).exp();
        self.z += w;
        if !new_mode {
            self.rest += w;
        }
        self.s += w * sum as f64;
        for (a, &s) in self.site.iter_mut().zip(spins) {
            *a += w * s as f64;
        }
        if !self.pair.is_empty() {
            let n = spins.len();
            for (a, &sa) in spins.iter().enumerate() {
                let ca = 2 * (sa < 0) as usize;
                let row = &mut self.pair[a * n..(a + 1) * n];
                for (p, &sb) in row.iter_mut().zip(spins) {
                    p[ca + (sb < 0) as usize] += w;
                }
            }
        }
        if !self.hist.is_empty() {
            self.hist[((sum + spins.len() as i64) / 2) as usize] += w;
        }
        for (slot, &t) in self.lap.iter_mut().zip(lap_t) {
            let x = lw + beta * t * sum as f64;
            log_add(slot, x);
        }
        if let Some(c) = self.center {
            for (slot, &t) in self.cen.iter_mut().zip(lap_t) {
                let x = beta * t * (sum - c) as f64;
                slot.0 += w * (x.exp_m1() - x);
                slot.1 += w * x;
            }
        }
    }

    fn merge(mut self, mut o: Acc) -> Acc {
        let shift = self.shift.max(o.shift);
        if shift == f64::NEG_INFINITY {
            self.count += o.count;
            return self;
        }
        let other_wins = o.shift > self.shift;
        if other_wins {
            self.mode_sum = o.mode_sum;
        }
        self.rescale(shift);
        o.rescale(shift);
        self.rest = if other_wins { self.z + o.rest } else { self.rest + o.z };
        self.count += o.count;
        for (x, y) in self.cen.iter_mut().zip(&o.cen) {
            x.0 += y.0;
            x.1 += y.1;
        }
        self.z += o.z;
        self.s += o.s;
        add_vec(&mut self.site, &o.site);
        for (x, y) in self.pair.iter_mut().zip(&o.pair) {
            add_vec(x, y);
        }
        add_vec(&mut self.hist, &o.hist);
        for (a, b) in self.lap.iter_mut().zip(&o.lap) {
            if b.0 > f64::NEG_INFINITY {
                log_add(a, b.0 + b.1.ln());
            }
        }
        self
    }

    fn log_z(&self) -> f64 {
        self.shift + self.rest.ln_1p()
    }
}

fn add_vec(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Add `e^x` to a `(shift, sum)` pair representing `e^shift * sum`.
fn log_add(slot: &mut (f64, f64), x: f64) {
    if x > slot.0 {
        slot.1 = if slot.0 == f64::NEG_INFINITY { 0.0 } else { slot.1 * (slot.0 - x).exp() };
        slot.0 = x;
    }
    slot.1 += (x - slot.0).exp();
}

fn check_l(l: usize) -> Result<()> {
    if l > MAX_L {
        return Err(Error::TooLarge { what: format!("oracle half-width L = {l}"), limit: MAX_L });
    }
    Ok(())
}

/// Number of high spins fixed per worker chunk.
fn prefix_bits(n: usize) -> usize {
    n.saturating_sub(10).min(8)
}

/// Exact `log Z`, conditional expectations and distributions for each event.
///
/// Configurations are visited in Gray-code order; bit `k` set means array index
/// `k` carries `-1`.
pub fn enumerate(params: &ModelParams, events: &[EventSpec], obs: &Observables) -> Result<OracleResult> {
    params.check()?;
    check_l(params.l)?;
    let events: Vec<EventSpec> = events.iter().map(|e| e.normalized()).collect();
    for e in &events {
        e.check()?;
    }
    let kernel = Arc::new(build_kernel(params)?);
    let n = params.volume();
    let th = Thresholds { n: n as f64, eps_s_abs: params.eps_s_abs(), eps_c: params.eps_c() };
    let geometry = events.iter().any(|e| e.needs_geometry());
    let beta = params.beta;
    let r = obs.field_r;
    let p = prefix_bits(n);
    let low = n - p;
    let chunks: Vec<(Acc, Vec<Acc>)> = (0..1u64 << p)
        .into_par_iter()
        .map(|prefix| {
            let mut spins = vec![1i8; n];
            for b in 0..p {
                if prefix >> b & 1 == 1 {
                    spins[low + b] = -1;
                }
            }
            let mut cfg = SpinConfig::from_spins(spins, kernel.clone()).expect("valid window");
            let mut all = Acc::new(n, &Observables { laplace_t: Vec::new(), ..obs.clone() });
            all.pair.clear();
            all.hist.clear();
            let mut accs: Vec<Acc> = events.iter().map(|_| Acc::new(n, obs)).collect();
            let mut visit = |cfg: &SpinConfig| {
                let sum = cfg.total_spin();
                let lw = -beta * cfg.energy() + beta * r * sum as f64;
                all.push(lw, cfg.spins(), sum, &[], beta);
                let f = Features::of(cfg.spins(), th.eps_s_abs, geometry);
                for (e, a) in events.iter().zip(accs.iter_mut()) {
                    if e.eval(&f, &th, params) {
                        a.push(lw, cfg.spins(), sum, &obs.laplace_t, beta);
                    }
                }
            };
            visit(&cfg);
            for g in 1u64..(1u64 << low) {
                cfg.flip_at(g.trailing_zeros() as usize);
                visit(&cfg);
            }
            (all, accs)
        })
        .collect();
    let mut it = chunks.into_iter();
    let (mut all, mut accs) = it.next().expect("at least one chunk");
    for (a, es) in it {
        all = all.merge(a);
        accs = accs.into_iter().zip(es).map(|(x, y)| x.merge(y)).collect();
    }
    let log_z = all.log_z();
    let results = events.iter().zip(accs).map(|(e, a)| finish(e, a, log_z, n, obs)).collect();
    Ok(OracleResult { l: params.l, beta, field_r: r, log_z, configurations: all.count, events: results })
}

fn finish(e: &EventSpec, a: Acc, log_z: f64, n: usize, obs: &Observables) -> EventResult {
    let name = e.to_string();
    if a.count == 0 {
        return EventResult {
            event: name,
            count: 0,
            log_z: f64::NEG_INFINITY,
            probability: 0.0,
            mean_m: f64::NAN,
            site_means: vec![f64::NAN; n],
            pair_means: None,
            pair_table: None,
            histogram: None,
            laplace: Vec::new(),
            laplace_gap: Vec::new(),
            mode_sum: 0,
        };
    }
    let z = a.z;
    let lz = a.log_z();
    EventResult {
        event: name,
        count: a.count,
        log_z: lz,
        probability: (lz - log_z).exp().min(1.0),
        mean_m: a.s / z / n as f64,
        site_means: a.site.iter().map(|x| x / z).collect(),
        pair_means: obs.pairs.then(|| {
            a.pair.chunks(n).map(|row| row.iter().map(|p| (p[0] - p[1] - p[2] + p[3]) / z).collect()).collect()
        }),
        pair_table: obs.pairs.then(|| a.pair.iter().map(|p| p.map(|x| x / z)).collect()),
        histogram: obs.histogram.then(|| a.hist.iter().map(|x| x / z).collect()),
        laplace: obs.laplace_t.iter().zip(&a.lap).map(|(&t, &(sh, s))| (t, sh + s.ln() - lz)).collect(),
        laplace_gap: obs
            .laplace_t
            .iter()
            .zip(&a.cen)
            .map(|(&t, &(ea, eb))| (t, centered_gap(ea / z, eb / z)))
            .collect(),
        mode_sum: a.mode_sum,
    }
}

/// `log(1 + a + b) - b` for `a = mu[expm1(x) - x]`, `b = mu[x]`, without cancellation
/// when both are tiny.
fn centered_gap(a: f64, b: f64) -> f64 {
    let u = a + b;
    let tail = if u.abs() < 1e-4 { u * u * (-0.5 + u / 3.0 - u * u / 4.0) } else { u.ln_1p() - u };
    a + tail
}

fn nonempty(r: &EventResult) -> Result<()> {
    if r.count == 0 {
        Err(Error::EmptyEvent(r.event.clone()))
    } else {
        Ok(())
    }
}

/// Exact `mu[m_Lambda | E]`.
pub fn conditional_magnetization(params: &ModelParams, event: &EventSpec) -> Result<f64> {
    let r = enumerate(params, std::slice::from_ref(event), &Observables::default())?;
    nonempty(&r.events[0])?;
    Ok(r.events[0].mean_m)
}

/// Finite-volume stand-in for the spontaneous magnetization: exact `mu[sigma_0]`.
pub fn finite_volume_m_beta(params: &ModelParams) -> Result<f64> {
    let r = enumerate(params, &[EventSpec::All], &Observables::default())?;
    Ok(r.events[0].site_means[params.l])
}

/// Exact truncated correlation `mu^(r)[sigma_i; sigma_j | E]` for sites `i`, `j` in `[-L, L]`.
pub fn two_point(params: &ModelParams, i: i64, j: i64, event: &EventSpec, field_r: f64) -> Result<f64> {
    let l = params.l as i64;
    for x in [i, j] {
        if x < -l || x > l {
            return Err(Error::SiteOutOfRange { site: x as isize, l: params.l });
        }
    }
    let obs = Observables { field_r, pairs: true, ..Default::default() };
    let r = enumerate(params, std::slice::from_ref(event), &obs)?;
    nonempty(&r.events[0])?;
    Ok(r.events[0].truncated((i + l) as usize, (j + l) as usize).unwrap())
}

/// Which admissible range applies to the Laplace bound of an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LaplaceKind {
    /// Very-small class: `|t| <= zeta_a / (4 a (1-a) (eps_s |Lambda|)^(1-a))`.
    VerySmall,
    /// Single external triangle `T0`: `|t| <= zeta_a 3^(1-a) / (4 a (1-a) |T0|^(1-a))`.
    SingleTriangle,
    /// No admissible range is stated.
    Other,
}

/// Admissible `|t|` for an event, when one is stated.
pub fn laplace_threshold(params: &ModelParams, event: &EventSpec) -> (LaplaceKind, Option<f64>) {
    let a = params.alpha;
    let pre = zeta_alpha(a) / (4.0 * a * (1.0 - a));
    match event {
        EventSpec::VerySmall { .. } => (LaplaceKind::VerySmall, Some(pre / params.eps_s_abs().powf(1.0 - a))),
        EventSpec::Class { externals } if externals.len() == 1 => {
            let m = externals[0].mass() as f64;
            (LaplaceKind::SingleTriangle, Some(pre * 3f64.powf(1.0 - a) / m.powf(1.0 - a)))
        }
        _ => (LaplaceKind::Other, None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceReport {
    pub event: String,
    pub kind: LaplaceKind,
    pub t: f64,
    pub t_star: Option<f64>,
    /// `|t| <= t_star`; `false` when no range is stated.
    pub admissible: bool,
    /// `log mu[e^{beta t sum sigma} | E] - beta t |Lambda| mu[m | E]`, computed centered at the
    /// event's most likely magnetization.
    pub gap: f64,
    /// `beta^2 t^2 |Lambda| e^{-2 beta J} / 2`.
    pub bound: f64,
    pub holds: bool,
}

/// Exact check of the Laplace-transform bound at each `t`.
pub fn laplace_check(params: &ModelParams, event: &EventSpec, ts: &[f64]) -> Result<Vec<LaplaceReport>> {
    let first = enumerate(params, std::slice::from_ref(event), &Observables::default())?;
    nonempty(&first.events[0])?;
    let obs =
        Observables { laplace_t: ts.to_vec(), laplace_center: Some(first.events[0].mode_sum), ..Default::default() };
    let r = enumerate(params, std::slice::from_ref(event), &obs)?;
    let ev = &r.events[0];
    let (kind, t_star) = laplace_threshold(params, event);
    let b = params.beta;
    let n = params.volume() as f64;
    Ok(ev
        .laplace_gap
        .iter()
        .map(|&(t, gap)| {
            let bound = 0.5 * b * b * t * t * n * (-2.0 * b * params.j).exp();
            LaplaceReport {
                event: ev.event.clone(),
                kind,
                t,
                t_star,
                admissible: t_star.is_some_and(|s| t.abs() <= s),
                gap,
                bound,
                holds: gap.abs() <= bound * (1.0 + 1e-9),
            }
        })
        .collect())
}
