//! Metropolis chains for the plus-boundary Gibbs measure, free or restricted to
//! a magnetization window, and the phase-separation experiment built on them.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_triangles, droplet_stats_with, rho_targets, DropletReport, DropletTargets};
use crate::kernel::build_kernel;
use crate::params::{validate_exponents, ModelParams};
use crate::spins::SpinConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    /// Uniform single-site flips, accepted with `min(1, e^{-beta dh})`.
    FreeGlauber,
    /// As free, but flips leaving `|sum sigma - m |Lambda|| < eps0_abs` are rejected.
    WindowRestricted,
    /// Uniform `(-, +)` pair swapped with the Metropolis rule; conserves `sum sigma`.
    FixedExchange,
}

impl std::str::FromStr for Dynamics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free-glauber" | "free" => Ok(Dynamics::FreeGlauber),
            "window-restricted" | "window" => Ok(Dynamics::WindowRestricted),
            "fixed-exchange" | "exchange" => Ok(Dynamics::FixedExchange),
            _ => Err(Error::InvalidSpec(format!("unknown dynamics '{s}'"))),
        }
    }
}

impl std::fmt::Display for Dynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dynamics::FreeGlauber => "free-glauber",
            Dynamics::WindowRestricted => "window-restricted",
            Dynamics::FixedExchange => "fixed-exchange",
        })
    }
}

/// Chain specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub dynamics: Dynamics,
    /// Target magnetization.
    pub m: f64,
    /// Window half-width `eps0 m_beta |Lambda|` in units of `sum sigma`.
    pub eps0_abs: f64,
    pub burn_in: u64,
    pub sweeps: u64,
    /// Sweeps between measurements.
    pub measure_every: u64,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn free(sweeps: u64, seed: u64) -> Self {
        EnsembleSpec {
            dynamics: Dynamics::FreeGlauber,
            m: 0.0,
            eps0_abs: f64::INFINITY,
            burn_in: 0,
            sweeps,
            measure_every: 1,
            seed,
        }
    }

    /// Window-restricted chain at `m` with the window of `params` and `m_beta`.
    pub fn window(params: &ModelParams, m: f64, m_beta: f64, burn_in: u64, sweeps: u64, seed: u64) -> Self {
        EnsembleSpec {
            dynamics: Dynamics::WindowRestricted,
            m,
            eps0_abs: params.eps0() * m_beta * params.volume() as f64,
            burn_in,
            sweeps,
            measure_every: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.m.is_finite() || self.m.abs() > 1.0 {
            return Err(Error::InvalidSpec(format!("target m = {} not in [-1, 1]", self.m)));
        }
        if self.measure_every == 0 {
            return Err(Error::InvalidSpec("measure_every must be positive".into()));
        }
        if self.dynamics == Dynamics::WindowRestricted && !(self.eps0_abs >= 2.0) {
            return Err(Error::InvalidSpec(format!(
                "window half-width {} is below two magnetization steps (2 in units of sum sigma)",
                self.eps0_abs
            )));
        }
        Ok(())
    }

    fn in_window(&self, sum: i64, n: usize) -> bool {
        (sum as f64 - self.m * n as f64).abs() < self.eps0_abs
    }
}

/// Initial condition of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    AllPlus,
    /// Minus block at the left edge with `sum sigma` closest to `m |Lambda|`.
    Cold,
    /// Centered minus block with `sum sigma` closest to `m |Lambda|`.
    Droplet,
}

impl std::str::FromStr for Start {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-plus" => Ok(Start::AllPlus),
            "cold" => Ok(Start::Cold),
            "droplet" => Ok(Start::Droplet),
            _ => Err(Error::InvalidSpec(format!("unknown start '{s}'"))),
        }
    }
}

impl std::fmt::Display for Start {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Start::AllPlus => "all-plus",
            Start::Cold => "cold",
            Start::Droplet => "droplet",
        })
    }
}

/// Spins of a start configuration.
pub fn start_spins(start: Start, m: f64, l: usize) -> Vec<i8> {
    let n = 2 * l + 1;
    let mut s = vec![1i8; n];
    let minus = (((1.0 - m) * n as f64 / 2.0).round().max(0.0) as usize).min(n);
    match start {
        Start::AllPlus => {}
        Start::Cold => s[..minus].iter_mut().for_each(|x| *x = -1),
        Start::Droplet => {
            let lo = (n - minus) / 2;
            s[lo..lo + minus].iter_mut().for_each(|x| *x = -1);
        }
    }
    s
}

/// A running chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub cfg: SpinConfig,
    rng: ChaCha8Rng,
    pub sweeps: u64,
    pub proposed: u64,
    pub accepted: u64,
    /// Indices of `-` and `+` sites, and each site's slot in its list.
    minus: Vec<usize>,
    plus: Vec<usize>,
    slot: Vec<usize>,
}

impl ChainState {
    pub fn new(cfg: SpinConfig, seed: u64) -> Self {
        let mut c = ChainState {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sweeps: 0,
            proposed: 0,
            accepted: 0,
            minus: Vec::new(),
            plus: Vec::new(),
            slot: Vec::new(),
        };
        c.rebuild_lists();
        c
    }

    fn rebuild_lists(&mut self) {
        self.minus.clear();
        self.plus.clear();
        self.slot = vec![0; self.cfg.len()];
        for k in 0..self.cfg.len() {
            let list = if self.cfg.at(k) < 0 { &mut self.minus } else { &mut self.plus };
            self.slot[k] = list.len();
            list.push(k);
        }
    }

    fn move_site(&mut self, k: usize) {
        // called after the flip: k left the list of its old sign
        let (from, to) =
            if self.cfg.at(k) < 0 { (&mut self.plus, &mut self.minus) } else { (&mut self.minus, &mut self.plus) };
        let s = self.slot[k];
        let last = *from.last().unwrap();
        from.swap_remove(s);
        if last != k {
            self.slot[last] = s;
        }
        self.slot[k] = to.len();
        to.push(k);
    }

    fn accept(&mut self, beta: f64, delta: f64) -> bool {
        delta <= 0.0 || self.rng.gen::<f64>() < (-beta * delta).exp()
    }

    /// One proposal; returns whether it was accepted.
    pub fn step(&mut self, spec: &EnsembleSpec, beta: f64) -> bool {
        self.proposed += 1;
        let n = self.cfg.len();
        let ok = match spec.dynamics {
            Dynamics::FreeGlauber | Dynamics::WindowRestricted => {
                let k = self.rng.gen_range(0..n);
                let d = self.cfg.delta_at(k);
                if spec.dynamics == Dynamics::WindowRestricted {
                    let sum = self.cfg.total_spin() - 2 * self.cfg.at(k) as i64;
                    if !spec.in_window(sum, n) {
                        return false;
                    }
                }
                if self.accept(beta, d) {
                    self.cfg.flip_at(k);
                    self.move_site(k);
                    true
                } else {
                    false
                }
            }
            Dynamics::FixedExchange => {
                if self.minus.is_empty() || self.plus.is_empty() {
                    return false;
                }
                let a = self.minus[self.rng.gen_range(0..self.minus.len())];
                let b = self.plus[self.rng.gen_range(0..self.plus.len())];
                let d = self.cfg.pair_delta_at(a, b);
                if self.accept(beta, d) {
                    self.cfg.flip_at(a);
                    self.move_site(a);
                    self.cfg.flip_at(b);
                    self.move_site(b);
                    true
                } else {
                    false
                }
            }
        };
        if ok {
            self.accepted += 1;
        }
        ok
    }

    /// `|Lambda|` proposals.
    pub fn sweep(&mut self, spec: &EnsembleSpec, beta: f64) {
        for _ in 0..self.cfg.len() {
            self.step(spec, beta);
        }
        self.sweeps += 1;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Probability that one proposal moves the chain from `cfg` by flipping array index
/// `k` (free and window dynamics) or swapping `k` with `k2` (exchange).
pub fn transition_probability(cfg: &SpinConfig, spec: &EnsembleSpec, beta: f64, k: usize, k2: Option<usize>) -> f64 {
    let n = cfg.len();
    let metro = |d: f64| (-beta * d).exp().min(1.0);
    match spec.dynamics {
        Dynamics::FreeGlauber => metro(cfg.delta_at(k)) / n as f64,
        Dynamics::WindowRestricted => {
            let sum = cfg.total_spin() - 2 * cfg.at(k) as i64;
            if spec.in_window(sum, n) {
                metro(cfg.delta_at(k)) / n as f64
            } else {
                0.0
            }
        }
        Dynamics::FixedExchange => {
            let Some(b) = k2 else { return 0.0 };
            if cfg.at(k) == cfg.at(b) {
                return 0.0;
            }
            let nm = cfg.spins().iter().filter(|&&s| s < 0).count();
            metro(cfg.pair_delta_at(k, b)) / (nm * (n - nm)) as f64
        }
    }
}

/// Largest relative drift of the cached energy seen at the checkpoints, and
/// refresh of the cache afterwards.
pub const DRIFT_CHECK_SWEEPS: u64 = 100_000;

fn replica_seed(base: u64, r: u64) -> u64 {
    base ^ r
}

fn make_chain(params: &ModelParams, spins: Vec<i8>, seed: u64) -> Result<ChainState> {
    let k = Arc::new(build_kernel(params)?);
    Ok(ChainState::new(SpinConfig::from_spins(spins, k)?, seed))
}

/// Time-and-replica average with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard deviation of the replica means over `sqrt(replicas)`.
    pub stderr: f64,
    pub per_replica: Vec<f64>,
}

impl Estimate {
    pub fn from_replicas(per_replica: Vec<f64>) -> Self {
        let r = per_replica.len() as f64;
        let mean = per_replica.iter().sum::<f64>() / r;
        let var = if per_replica.len() > 1 {
            per_replica.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)
        } else {
            0.0
        };
        Estimate { mean, stderr: (var / r).sqrt(), per_replica }
    }
}

/// `mu[sigma_0]` under free dynamics from all-plus: the finite-volume spontaneous magnetization.
pub fn estimate_m_beta(params: &ModelParams, burn_in: u64, sweeps: u64, replicas: u64, seed: u64) -> Result<Estimate> {
    params.check()?;
    if replicas == 0 || sweeps == 0 {
        return Err(Error::InvalidSpec("replicas and sweeps must be positive".into()));
    }
    let spec = EnsembleSpec::free(sweeps, seed);
    let l = params.l;
    let per: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut ch = make_chain(params, vec![1; 2 * l + 1], replica_seed(seed, r))?;
            for _ in 0..burn_in {
                ch.sweep(&spec, params.beta);
            }
            let mut acc = 0i64;
            for _ in 0..sweeps {
                ch.sweep(&spec, params.beta);
                acc += ch.cfg.at(l) as i64;
            }
            Ok(acc as f64 / sweeps as f64)
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_replicas(per))
}

/// Measurements of one free or restricted chain: magnetization histogram and `sigma_0 sigma_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStats {
    /// Fraction of measurements with `sum sigma = 2k - |Lambda|`, at index `k`.
    pub histogram: Vec<f64>,
    /// Time average of `sigma_0 sigma_j`, by array index `j`.
    pub corr0: Vec<f64>,
    pub acceptance: f64,
    /// Largest cached-energy drift seen at the checkpoints.
    pub max_drift: f64,
    pub measurements: u64,
}

/// Run a chain from `start` and record the magnetization histogram and `sigma_0` correlations
/// after every sweep.
pub fn run_chain_stats(params: &ModelParams, spec: &EnsembleSpec, start: Start) -> Result<ChainStats> {
    params.check()?;
    spec.validate()?;
    let n = params.volume();
    let l = params.l;
    let mut ch = make_chain(params, start_spins(start, spec.m, l), spec.seed)?;
    let mut max_drift: f64 = 0.0;
    for _ in 0..spec.burn_in {
        ch.sweep(spec, params.beta);
    }
    let mut hist = vec![0u64; n + 1];
    let mut corr = vec![0i64; n];
    let mut meas = 0u64;
    for s in 1..=spec.sweeps {
        ch.sweep(spec, params.beta);
        if s % spec.measure_every == 0 {
            let sp = ch.cfg.spins();
            let sum: i64 = sp.iter().map(|&x| x as i64).sum();
            hist[((sum + n as i64) / 2) as usize] += 1;
            let s0 = sp[l] as i64;
            for (c, &x) in corr.iter_mut().zip(sp) {
                *c += s0 * x as i64;
            }
            meas += 1;
        }
        if s % DRIFT_CHECK_SWEEPS == 0 {
            max_drift = max_drift.max(ch.cfg.cache_drift());
            ch.cfg.refresh();
        }
    }
    max_drift = max_drift.max(ch.cfg.cache_drift());
    let m = meas.max(1) as f64;
    Ok(ChainStats {
        histogram: hist.iter().map(|&h| h as f64 / m).collect(),
        corr0: corr.iter().map(|&c| c as f64 / m).collect(),
        acceptance: ch.acceptance_rate(),
        max_drift,
        measurements: meas,
    })
}

/// One replica of the phase-separation experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaRun {
    pub replica: u64,
    pub seed: u64,
    pub start: Start,
    pub reports: Vec<DropletReport>,
    pub freq_b: f64,
    pub freq_s1: f64,
    pub median_largest_fraction: f64,
    /// Mean of the block magnetization inside the largest large droplet, over
    /// measurements where one exists.
    pub mean_block_inside: Option<f64>,
    pub mean_block_outside: Option<f64>,
    pub acceptance: f64,
    pub max_drift: f64,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn mean_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = it.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Run replica `r` of a restricted chain and record a [`DropletReport`] per measurement.
pub fn run_replica(
    params: &ModelParams,
    spec: &EnsembleSpec,
    targets: &DropletTargets,
    start: Start,
    r: u64,
    keep_reports: bool,
) -> Result<ReplicaRun> {
    let seed = replica_seed(spec.seed, r);
    let mut ch = make_chain(params, start_spins(start, spec.m, params.l), seed)?;
    let mut max_drift: f64 = 0.0;
    for s in 1..=spec.burn_in {
        ch.sweep(spec, params.beta);
        if s % DRIFT_CHECK_SWEEPS == 0 {
            max_drift = max_drift.max(ch.cfg.cache_drift());
            ch.cfg.refresh();
        }
    }
    let mut reports = Vec::new();
    let (mut nb, mut ns1, mut cnt) = (0u64, 0u64, 0u64);
    let mut fracs = Vec::new();
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for s in 1..=spec.sweeps {
        ch.sweep(spec, params.beta);
        if s % spec.measure_every == 0 {
            let fam = build_triangles(ch.cfg.spins());
            let rep = droplet_stats_with(ch.cfg.spins(), &fam, params, targets);
            cnt += 1;
            nb += rep.is_b as u64;
            ns1 += rep.is_s1 as u64;
            fracs.push(rep.largest_fraction);
            inside.extend(rep.block_inside);
            outside.extend(rep.block_outside);
            if keep_reports {
                reports.push(rep);
            }
        }
        if s % DRIFT_CHECK_SWEEPS == 0 {
            max_drift = max_drift.max(ch.cfg.cache_drift());
            ch.cfg.refresh();
        }
    }
    max_drift = max_drift.max(ch.cfg.cache_drift());
    let c = cnt.max(1) as f64;
    Ok(ReplicaRun {
        replica: r,
        seed,
        start,
        reports,
        freq_b: nb as f64 / c,
        freq_s1: ns1 as f64 / c,
        median_largest_fraction: median(&mut fracs),
        mean_block_inside: mean_of(inside.into_iter()),
        mean_block_outside: mean_of(outside.into_iter()),
        acceptance: ch.acceptance_rate(),
        max_drift,
    })
}

/// Aggregates of the phase-separation experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub m: f64,
    pub m_beta: f64,
    pub rho_hat: f64,
    pub rho: f64,
    /// Exponent conditions that fail for `params`.
    pub warnings: Vec<String>,
    pub freq_b: Estimate,
    pub freq_s1: Estimate,
    /// Median over all measurements of all replicas.
    pub median_largest_fraction: f64,
    pub block_inside: Option<Estimate>,
    pub block_outside: Option<Estimate>,
    pub replicas: Vec<ReplicaRun>,
}

/// Run `replicas` restricted chains at magnetization `spec.m` from `start` and
/// aggregate the droplet statistics. `m_beta` sets the droplet fraction
/// `rho(m)` and the window center for the events.
pub fn phase_separation_experiment(
    params: &ModelParams,
    spec: &EnsembleSpec,
    m_beta: f64,
    replicas: u64,
    start: Start,
    keep_reports: bool,
) -> Result<ExperimentReport> {
    params.check()?;
    spec.validate()?;
    if spec.dynamics == Dynamics::FreeGlauber {
        return Err(Error::InvalidSpec("phase separation needs window-restricted or fixed-exchange dynamics".into()));
    }
    if replicas == 0 {
        return Err(Error::InvalidSpec("replicas must be positive".into()));
    }
    let rt = rho_targets(spec.m, m_beta, params.l)?;
    let targets = DropletTargets { m: spec.m, m_beta, rho: rt.rho };
    let rep = validate_exponents(params);
    let mut warnings: Vec<String> =
        rep.failures().into_iter().map(|f| format!("exponent condition fails: {f}")).collect();
    if rep.eta_range.is_none() {
        warnings.push("no admissible eta for these exponents".into());
    }
    let runs: Vec<ReplicaRun> = (0..replicas)
        .into_par_iter()
        .map(|r| run_replica(params, spec, &targets, start, r, keep_reports))
        .collect::<Result<_>>()?;
    Ok(aggregate(spec.m, m_beta, rt.rho_hat, rt.rho, warnings, runs))
}

fn aggregate(
    m: f64,
    m_beta: f64,
    rho_hat: f64,
    rho: f64,
    warnings: Vec<String>,
    runs: Vec<ReplicaRun>,
) -> ExperimentReport {
    let mut all: Vec<f64> = runs.iter().flat_map(|r| r.reports.iter().map(|x| x.largest_fraction)).collect();
    let median_largest_fraction = if all.is_empty() {
        median(&mut runs.iter().map(|r| r.median_largest_fraction).collect::<Vec<_>>())
    } else {
        median(&mut all)
    };
    let est = |f: &dyn Fn(&ReplicaRun) -> Option<f64>| {
        let v: Vec<f64> = runs.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| Estimate::from_replicas(v))
    };
    ExperimentReport {
        m,
        m_beta,
        rho_hat,
        rho,
        warnings,
        freq_b: Estimate::from_replicas(runs.iter().map(|r| r.freq_b).collect()),
        freq_s1: Estimate::from_replicas(runs.iter().map(|r| r.freq_s1).collect()),
        median_largest_fraction,
        block_inside: est(&|r| r.mean_block_inside),
        block_outside: est(&|r| r.mean_block_outside),
        replicas: runs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(l: usize, beta: f64, spins: Option<Vec<i8>>) -> (ModelParams, ChainState) {
        let p = ModelParams::new(0.3, 5.0, beta, l).unwrap();
        let s = spins.unwrap_or_else(|| vec![1; 2 * l + 1]);
        let c = make_chain(&p, s, 7).unwrap();
        (p, c)
    }

    #[test]
    fn beta_zero_accepts_everything() {
        let (p, mut c) = chain(6, 0.0, None);
        let spec = EnsembleSpec::free(10, 1);
        for _ in 0..10 {
            c.sweep(&spec, p.beta);
        }
        assert_eq!(c.accepted, c.proposed);
        assert!(c.cfg.cache_drift() < 1e-12);
    }

    #[test]
    fn exchange_on_all_plus_is_stuck() {
        let (p, mut c) = chain(4, 1.0, None);
        let spec = EnsembleSpec { dynamics: Dynamics::FixedExchange, ..EnsembleSpec::free(1, 0) };
        let before = c.cfg.spins().to_vec();
        c.sweep(&spec, p.beta);
        assert_eq!(c.cfg.spins(), &before[..]);
        assert_eq!(c.accepted, 0);
    }

    #[test]
    fn exchange_conserves_sum() {
        let s = start_spins(Start::Cold, 0.2, 10);
        let (_, mut c) = chain(10, 0.3, Some(s));
        let spec = EnsembleSpec { dynamics: Dynamics::FixedExchange, ..EnsembleSpec::free(1, 0) };
        let sum0 = c.cfg.total_spin();
        for _ in 0..200 {
            c.sweep(&spec, 0.3);
            assert_eq!(c.cfg.total_spin(), sum0);
        }
        assert!(c.accepted > 0);
        // the site lists follow the spins
        assert_eq!(c.minus.len() as i64, (21 - sum0) / 2);
        for &k in &c.minus {
            assert_eq!(c.cfg.at(k), -1);
        }
    }

    #[test]
    fn window_is_respected() {
        let p = ModelParams::new(0.3, 5.0, 0.2, 10).unwrap();
        let spec = EnsembleSpec { eps0_abs: 3.0, ..EnsembleSpec::window(&p, 0.0, 1.0, 0, 1, 3) };
        let mut c = make_chain(&p, start_spins(Start::Droplet, 0.0, 10), 3).unwrap();
        for _ in 0..300 {
            c.sweep(&spec, p.beta);
            assert!((c.cfg.total_spin() as f64).abs() < 3.0);
        }
        assert!(c.accepted > 0);
    }

    #[test]
    fn narrow_window_rejected() {
        let p = ModelParams::new(0.3, 5.0, 1.0, 10).unwrap();
        let spec = EnsembleSpec { eps0_abs: 1.5, ..EnsembleSpec::window(&p, 0.0, 1.0, 0, 1, 3) };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn detailed_balance_ratios() {
        let p = ModelParams::new(0.3, 2.0, 0.7, 5).unwrap();
        let k = Arc::new(build_kernel(&p).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dynamics in [Dynamics::FreeGlauber, Dynamics::WindowRestricted, Dynamics::FixedExchange] {
            let spec = EnsembleSpec { dynamics, eps0_abs: 5.0, ..EnsembleSpec::free(1, 0) };
            for _ in 0..200 {
                let s: Vec<i8> = (0..11).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
                let a = SpinConfig::from_spins(s, k.clone()).unwrap();
                let x = rng.gen_range(0..11);
                let y = rng.gen_range(0..11);
                let mut b = a.clone();
                let (fwd, k2) = match dynamics {
                    Dynamics::FixedExchange => {
                        if a.at(x) == a.at(y) {
                            continue;
                        }
                        b.flip_at(x);
                        b.flip_at(y);
                        (transition_probability(&a, &spec, p.beta, x, Some(y)), Some(y))
                    }
                    _ => {
                        b.flip_at(x);
                        (transition_probability(&a, &spec, p.beta, x, None), None)
                    }
                };
                let back = transition_probability(&b, &spec, p.beta, x, k2);
                if dynamics == Dynamics::WindowRestricted
                    && !(spec.in_window(a.total_spin(), 11) && spec.in_window(b.total_spin(), 11))
                {
                    continue;
                }
                let dh = b.energy() - a.energy();
                assert!((fwd / back - (-p.beta * dh).exp()).abs() < 1e-12 * (-p.beta * dh).exp().max(1.0));
            }
        }
    }

    #[test]
    fn deterministic_streams() {
        let p = ModelParams::new(0.3, 5.0, 1.0, 12).unwrap();
        let spec = EnsembleSpec { eps0_abs: 8.0, ..EnsembleSpec::window(&p, 0.0, 1.0, 5, 20, 99) };
        let t = DropletTargets { m: 0.0, m_beta: 1.0, rho: 12.0 / 25.0 };
        let a = run_replica(&p, &spec, &t, Start::Droplet, 2, true).unwrap();
        let b = run_replica(&p, &spec, &t, Start::Droplet, 2, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn m_beta_at_infinite_temperature() {
        let p = ModelParams::new(0.3, 5.0, 0.0, 3).unwrap();
        let e = estimate_m_beta(&p, 10, 2000, 8, 5).unwrap();
        assert!(e.mean.abs() <= 3.0 * e.stderr + 1e-12, "{e:?}");
    }

    #[test]
    fn m_beta_deep_in_the_ordered_phase() {
        let p = ModelParams::new(0.3, 10.0, 2.0, 5).unwrap();
        let e = estimate_m_beta(&p, 0, 500, 2, 5).unwrap();
        assert_eq!(e.mean, 1.0);
    }

    #[test]
    fn starts() {
        assert_eq!(start_spins(Start::Cold, 0.0, 2), vec![-1, -1, -1, 1, 1]);
        assert_eq!(start_spins(Start::Droplet, 0.5, 3), vec![1, 1, -1, -1, 1, 1, 1]);
        assert_eq!(start_spins(Start::AllPlus, 0.0, 1), vec![1, 1, 1]);
    }
}
