//! Triangles: the nested pairing of spin flips, external/large classification
//! and droplet observables.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intervals::{interaction, single_interval_energy, Interval};
use crate::kernel::Kernel;
use crate::params::ModelParams;

/// A pair of spin flips `(i, i+1)` and `(j, j+1)` with `i < j`.
///
/// Flip index `i` sits between sites `i` and `i + 1`. The base is `[i+1, j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Triangle {
    pub i: i64,
    pub j: i64,
}

impl Triangle {
    pub fn new(i: i64, j: i64) -> Self {
        assert!(i < j, "triangle needs i < j, got ({i}, {j})");
        Triangle { i, j }
    }

    /// Triangle whose base is the site interval `[lo, hi]`.
    pub fn from_base(lo: i64, hi: i64) -> Self {
        Triangle::new(lo - 1, hi)
    }

    pub fn mass(&self) -> u64 {
        (self.j - self.i) as u64
    }

    /// Leftmost site of the base.
    pub fn x_minus(&self) -> i64 {
        self.i + 1
    }

    /// Rightmost site of the base.
    pub fn x_plus(&self) -> i64 {
        self.j
    }

    pub fn base(&self) -> (i64, i64) {
        (self.i + 1, self.j)
    }

    /// `{min base - 1, min base, max base, max base + 1}`.
    pub fn sf(&self) -> [i64; 4] {
        [self.i, self.i + 1, self.j, self.j + 1]
    }

    pub fn in_sf(&self, x: i64) -> bool {
        self.sf().contains(&x)
    }

    /// Base of `other` is contained in the base of `self` (and they differ).
    pub fn contains(&self, other: &Triangle) -> bool {
        self != other && self.i <= other.i && other.j <= self.j
    }

    pub fn bases_disjoint(&self, other: &Triangle) -> bool {
        self.j <= other.i || other.j <= self.i
    }

    pub fn base_contains_site(&self, x: i64) -> bool {
        self.i < x && x <= self.j
    }
}

/// Distance between the flip positions of two triangles.
///
/// This is the distance used for the separation properties of triangles and
/// contours; it equals [`sf_distance`] plus one.
pub fn root_distance(a: &Triangle, b: &Triangle) -> u64 {
    let mut d = u64::MAX;
    for x in [a.i, a.j] {
        for y in [b.i, b.j] {
            d = d.min(x.abs_diff(y));
        }
    }
    d
}

/// Set distance between the four-point frames `sf(a)` and `sf(b)`.
pub fn sf_distance(a: &Triangle, b: &Triangle) -> u64 {
    let mut d = u64::MAX;
    for x in a.sf() {
        for y in b.sf() {
            d = d.min(x.abs_diff(y));
        }
    }
    d
}

/// Triangles of one configuration, sorted by left flip, with the nesting forest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriangleFamily {
    pub l: usize,
    triangles: Vec<Triangle>,
    parent: Vec<Option<usize>>,
}

/// One triangle as dumped to JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleRecord {
    pub i: i64,
    pub j: i64,
    pub mass: u64,
    pub external: bool,
    pub parent: Option<usize>,
}

fn nesting_parents(tri: &[Triangle]) -> Vec<Option<usize>> {
    let mut parent = vec![None; tri.len()];
    let mut open: Vec<usize> = Vec::new();
    for (k, t) in tri.iter().enumerate() {
        while let Some(&top) = open.last() {
            if tri[top].j <= t.i {
                open.pop();
            } else {
                break;
            }
        }
        parent[k] = open.last().copied();
        open.push(k);
    }
    parent
}

impl TriangleFamily {
    /// Family from an arbitrary list of triangles; sorts and builds the forest.
    /// Does not check that the list arises from a configuration.
    pub fn from_triangles(l: usize, mut triangles: Vec<Triangle>) -> Self {
        triangles.sort();
        let parent = nesting_parents(&triangles);
        TriangleFamily { l, triangles, parent }
    }

    pub fn empty(l: usize) -> Self {
        TriangleFamily { l, triangles: Vec::new(), parent: Vec::new() }
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k]
    }

    pub fn is_external(&self, k: usize) -> bool {
        self.parent[k].is_none()
    }

    pub fn externals(&self) -> impl Iterator<Item = &Triangle> + '_ {
        self.triangles.iter().zip(&self.parent).filter(|(_, p)| p.is_none()).map(|(t, _)| t)
    }

    pub fn total_mass(&self) -> u64 {
        self.triangles.iter().map(|t| t.mass()).sum()
    }

    /// `sum |T|^alpha`.
    pub fn alpha_norm(&self, alpha: f64) -> f64 {
        self.triangles.iter().map(|t| (t.mass() as f64).powf(alpha)).sum()
    }

    pub fn records(&self) -> Vec<TriangleRecord> {
        self.triangles
            .iter()
            .enumerate()
            .map(|(k, t)| TriangleRecord {
                i: t.i,
                j: t.j,
                mass: t.mass(),
                external: self.parent[k].is_none(),
                parent: self.parent[k],
            })
            .collect()
    }

    /// Whether [`invariant_violations`](Self::invariant_violations) is empty, in
    /// time linear in the total mass instead of quadratic in the family size.
    pub fn invariants_hold(&self) -> bool {
        let t = &self.triangles;
        let mut open: Vec<usize> = Vec::new();
        for (k, x) in t.iter().enumerate() {
            while let Some(&top) = open.last() {
                if t[top].j <= x.i {
                    open.pop();
                } else {
                    break;
                }
            }
            if let Some(&top) = open.last() {
                if x.j > t[top].j || 3 * x.mass() > t[top].mass() {
                    return false;
                }
            }
            open.push(k);
        }
        let (Some(lo), Some(hi)) = (t.iter().map(|x| x.i).min(), t.iter().map(|x| x.j).max()) else {
            return true;
        };
        let mut owner = vec![usize::MAX; (hi - lo + 1) as usize];
        for (k, x) in t.iter().enumerate() {
            for q in [x.i, x.j] {
                let slot = &mut owner[(q - lo) as usize];
                if *slot != usize::MAX {
                    return false;
                }
                *slot = k;
            }
        }
        for (k, x) in t.iter().enumerate() {
            let m = x.mass() as i64;
            for q in [x.i, x.j] {
                for p in (q - m + 1).max(lo)..=(q + m - 1).min(hi) {
                    let o = owner[(p - lo) as usize];
                    if o != usize::MAX && o != k && t[o].mass() as i64 >= m {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// All violated structural properties, as readable messages. Empty means the
    /// family is laminar, pairwise separated by at least the smaller mass (flip
    /// distance), and nested triangles have at most a third of the outer mass.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let t = &self.triangles;
        for a in 0..t.len() {
            for b in (a + 1)..t.len() {
                let (x, y) = (&t[a], &t[b]);
                let laminar = x.bases_disjoint(y) || x.contains(y) || y.contains(x);
                if !laminar {
                    out.push(format!("{x:?} and {y:?} cross"));
                    continue;
                }
                let d = root_distance(x, y);
                if d < x.mass().min(y.mass()) {
                    out.push(format!("{x:?} and {y:?} at distance {d}"));
                }
                for (outer, inner) in [(x, y), (y, x)] {
                    if outer.contains(inner) && 3 * inner.mass() > outer.mass() {
                        out.push(format!("{inner:?} inside {outer:?} exceeds a third"));
                    }
                }
            }
        }
        out
    }
}

/// Spin-flip positions of a configuration under `+` boundary, as flip indices.
pub fn flip_points(spins: &[i8]) -> Vec<i64> {
    let l = (spins.len() / 2) as i64;
    let mut pts = Vec::new();
    let mut prev = 1i8;
    for (k, &s) in spins.iter().enumerate() {
        if s != prev {
            pts.push(k as i64 - l - 1);
        }
        prev = s;
    }
    if prev != 1 {
        pts.push(l);
    }
    pts
}

/// Pair sorted points by repeatedly matching the adjacent pair at minimal gap,
/// leftmost first on ties. Runs in linear time with a stack whose consecutive
/// gaps are strictly decreasing.
pub fn greedy_pairing(points: &[i64]) -> Vec<(i64, i64)> {
    assert!(points.len() % 2 == 0, "odd number of flips");
    let mut stack: Vec<i64> = Vec::with_capacity(points.len());
    let mut pairs = Vec::with_capacity(points.len() / 2);
    for &p in points {
        while stack.len() >= 2 {
            let t = stack[stack.len() - 1];
            let s = stack[stack.len() - 2];
            if t - s <= p - t {
                pairs.push((s, t));
                stack.truncate(stack.len() - 2);
            } else {
                break;
            }
        }
        stack.push(p);
    }
    while stack.len() >= 2 {
        let t = stack.pop().unwrap();
        let s = stack.pop().unwrap();
        pairs.push((s, t));
    }
    pairs
}

/// Triangle family of a spin sequence on `[-L, L]`.
pub fn build_triangles(spins: &[i8]) -> TriangleFamily {
    let l = spins.len() / 2;
    let tri = greedy_pairing(&flip_points(spins)).into_iter().map(|(i, j)| Triangle::new(i, j)).collect();
    TriangleFamily::from_triangles(l, tri)
}

/// Spins encoded by a family; rejects families that are not the triangles of
/// their own configuration.
pub fn reconstruct_spins(family: &TriangleFamily, l: usize) -> Result<Vec<i8>> {
    let li = l as i64;
    let mut pts: Vec<i64> = family.triangles().iter().flat_map(|t| [t.i, t.j]).collect();
    pts.sort_unstable();
    if pts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InconsistentFamily("two triangles share a flip".into()));
    }
    if let (Some(&a), Some(&b)) = (pts.first(), pts.last()) {
        if a < -li - 1 || b > li {
            return Err(Error::InconsistentFamily(format!("flips must lie in [{}, {li}]", -li - 1)));
        }
    }
    let mut s = vec![1i8; 2 * l + 1];
    let mut cur = 1i8;
    let mut p = 0;
    for (k, v) in s.iter_mut().enumerate() {
        let x = k as i64 - li;
        // flip x - 1 sits just left of site x
        while p < pts.len() && pts[p] == x - 1 {
            cur = -cur;
            p += 1;
        }
        *v = cur;
    }
    let back = build_triangles(&s);
    if back.triangles() != family.triangles() {
        return Err(Error::InconsistentFamily("pairing of the flips differs from the family".into()));
    }
    Ok(s)
}

/// External triangles of mass strictly larger than `threshold`.
pub fn external_large(family: &TriangleFamily, threshold: f64) -> Vec<Triangle> {
    family.externals().filter(|t| t.mass() as f64 > threshold).copied().collect()
}

/// `-1` on the bases of `externals`, `+1` elsewhere.
pub fn ground_state_of(externals: &[Triangle], l: usize) -> Result<Vec<i8>> {
    let li = l as i64;
    let mut ext = externals.to_vec();
    ext.sort();
    for (k, t) in ext.iter().enumerate() {
        if t.x_minus() < -li || t.x_plus() > li {
            return Err(Error::IncompatibleExternals(format!("{t:?} leaves the window")));
        }
        if k > 0 && ext[k - 1].j > t.i {
            return Err(Error::IncompatibleExternals(format!("{:?} and {t:?} overlap", ext[k - 1])));
        }
    }
    let mut s = vec![1i8; 2 * l + 1];
    for t in &ext {
        for x in t.x_minus()..=t.x_plus() {
            s[(x + li) as usize] = -1;
        }
    }
    let fam = build_triangles(&s);
    let got: Vec<Triangle> = fam.externals().copied().collect();
    if ext.iter().any(|t| !got.contains(t)) {
        return Err(Error::IncompatibleExternals("the flips of the ground state pair differently".into()));
    }
    Ok(s)
}

/// Whether `externals` is exactly the large-external family of its own ground state.
pub fn is_compatible_external_family(externals: &[Triangle], l: usize, threshold: f64) -> bool {
    match ground_state_of(externals, l) {
        Ok(s) => {
            let mut e = externals.to_vec();
            e.sort();
            external_large(&build_triangles(&s), threshold) == e
        }
        Err(_) => false,
    }
}

/// Droplet fraction targets for a magnetization `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoTargets {
    /// `(1 - m / m_beta) / 2`.
    pub rho_hat: f64,
    /// Largest multiple of `1/|Lambda|` not above `rho_hat`.
    pub rho: f64,
    /// `rho * |Lambda|`.
    pub mass: u64,
}

pub fn rho_targets(m: f64, m_beta: f64, l: usize) -> Result<RhoTargets> {
    if !(m_beta > 0.0 && m_beta <= 1.0) {
        return Err(Error::InvalidParameter { name: "m_beta", reason: format!("{m_beta} not in (0, 1]") });
    }
    if m.abs() > m_beta {
        return Err(Error::MagnetizationOutOfRange { m, m_beta });
    }
    let n = (2 * l + 1) as f64;
    let rho_hat = 0.5 * (1.0 - m / m_beta);
    let mass = (rho_hat * n + 1e-9).floor().max(0.0) as u64;
    Ok(RhoTargets { rho_hat, rho: mass as f64 / n, mass })
}

/// Targets used when classifying a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DropletTargets {
    /// Magnetization at the center of the window.
    pub m: f64,
    pub m_beta: f64,
    /// Droplet fraction for the single-droplet events.
    pub rho: f64,
}

/// Observables of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropletReport {
    pub m_emp: f64,
    /// Masses of the large external triangles, left to right.
    pub external_masses: Vec<u64>,
    pub rho_emp: f64,
    /// Largest external mass over `|Lambda|` (any size, not just large ones).
    pub largest_fraction: f64,
    pub n0: usize,
    pub is_s1: bool,
    pub is_b: bool,
    pub in_window: bool,
    /// Mean spin on the base of the largest external triangle (leftmost on ties).
    pub block_inside: Option<f64>,
    /// Mean spin on the rest of the window.
    pub block_outside: Option<f64>,
}

/// `n0`: number of triangles of `masses` at least `total - 6 eps_c |Lambda|`.
pub fn n0_count(masses: &[u64], eps_c_abs: f64) -> usize {
    let total: u64 = masses.iter().sum();
    masses.iter().filter(|&&m| m as f64 >= total as f64 - 6.0 * eps_c_abs).count()
}

pub fn droplet_stats(spins: &[i8], params: &ModelParams, targets: &DropletTargets) -> DropletReport {
    let family = build_triangles(spins);
    droplet_stats_with(spins, &family, params, targets)
}

/// [`droplet_stats`] with a precomputed triangle family.
pub fn droplet_stats_with(
    spins: &[i8],
    family: &TriangleFamily,
    params: &ModelParams,
    targets: &DropletTargets,
) -> DropletReport {
    let n = spins.len();
    let nf = n as f64;
    let l = (n / 2) as i64;
    let sum: i64 = spins.iter().map(|&s| s as i64).sum();
    let m_emp = sum as f64 / nf;
    let eps_s_abs = params.eps_s() * nf;
    let eps_c = params.eps_c();
    let large = external_large(family, eps_s_abs);
    let external_masses: Vec<u64> = large.iter().map(|t| t.mass()).collect();
    let total: u64 = external_masses.iter().sum();
    let rho_emp = total as f64 / nf;
    let largest_fraction = family.externals().map(|t| t.mass()).max().unwrap_or(0) as f64 / nf;
    let n0 = n0_count(&external_masses, eps_c * nf);
    let tol = 1e-12;
    let is_s1 = !large.is_empty() && (rho_emp - targets.rho).abs() <= eps_c + tol;
    let is_b = is_s1 && n0 == 1;
    let in_window = (m_emp - targets.m).abs() < params.eps0() * targets.m_beta;
    let (block_inside, block_outside) = match family.externals().max_by_key(|t| (t.mass(), std::cmp::Reverse(t.i))) {
        Some(t) => {
            let (lo, hi) = t.base();
            let (lo, hi) = ((lo + l) as usize, (hi + l) as usize);
            let inside: i64 = spins[lo..=hi].iter().map(|&s| s as i64).sum();
            let cnt_in = (hi - lo + 1) as f64;
            let out = if n as f64 > cnt_in { Some((sum - inside) as f64 / (nf - cnt_in)) } else { None };
            (Some(inside as f64 / cnt_in), out)
        }
        None => (None, Some(m_emp)),
    };
    DropletReport {
        m_emp,
        external_masses,
        rho_emp,
        largest_fraction,
        n0,
        is_s1,
        is_b,
        in_window,
        block_inside,
        block_outside,
    }
}

/// Single interval against every other compatible external family of the same mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FragmentationReport {
    pub mass: u64,
    pub window: usize,
    /// Compatible families with at least two intervals.
    pub families: u64,
    pub single_energy: f64,
    /// Lowest energy among them, with its intervals (first one starting at 0).
    pub best_other_energy: f64,
    pub best_other: Vec<Interval>,
    /// `best_other_energy - single_energy`.
    pub gap: f64,
}

impl FragmentationReport {
    pub fn holds(&self) -> bool {
        self.families == 0 || self.gap > 0.0
    }
}

/// Whether minus runs `intervals` (ordered, disjoint) pair into one triangle each.
fn runs_are_external(intervals: &[Interval]) -> bool {
    let pts: Vec<i64> = intervals.iter().flat_map(|iv| [iv.lo - 1, iv.hi]).collect();
    let mut pr = greedy_pairing(&pts);
    pr.sort_unstable();
    pr.iter().zip(intervals).all(|(&(i, j), iv)| i == iv.lo - 1 && j == iv.hi)
}

/// Enumerate, up to translation, every family of two or more mutually external
/// triangles with total mass `mass` whose bases span at most `window` sites, and
/// compare its energy with the single triangle of the same mass.
pub fn fragmentation_check(mass: u64, window: usize, alpha: f64, j: f64) -> Result<FragmentationReport> {
    if mass == 0 || mass as usize > window {
        return Err(Error::InvalidParameter { name: "mass", reason: format!("{mass} not in 1..={window}") });
    }
    let kernel = Kernel::with_range(alpha, j, window + 2);
    let single = single_interval_energy(mass, &kernel);

    struct Best {
        n: u64,
        e: f64,
        fam: Vec<Interval>,
    }
    fn rec(ivs: &mut Vec<Interval>, e: f64, left: u64, window: i64, k: &Kernel, best: &mut Best) {
        if left == 0 {
            if ivs.len() >= 2 && runs_are_external(ivs) {
                best.n += 1;
                if e < best.e {
                    best.e = e;
                    best.fam = ivs.clone();
                }
            }
            return;
        }
        let last = *ivs.last().unwrap();
        for len in 1..=left {
            let min_gap = last.len().min(len) as i64;
            for g in min_gap.. {
                let lo = last.hi + 1 + g;
                let hi = lo + len as i64 - 1;
                let rest = left - len;
                if hi + rest as i64 + (rest > 0) as i64 > window - 1 {
                    break;
                }
                let iv = Interval::new(lo, hi);
                let de = single_interval_energy(len, k) - 2.0 * ivs.iter().map(|a| interaction(*a, iv, k)).sum::<f64>();
                ivs.push(iv);
                rec(ivs, e + de, left - len, window, k, best);
                ivs.pop();
            }
        }
    }
    let per: Vec<Best> = (1..mass)
        .into_par_iter()
        .map(|first| {
            let mut best = Best { n: 0, e: f64::INFINITY, fam: Vec::new() };
            let mut ivs = vec![Interval::new(0, first as i64 - 1)];
            rec(&mut ivs, single_interval_energy(first, &kernel), mass - first, window as i64, &kernel, &mut best);
            best
        })
        .collect();
    let n = per.iter().map(|b| b.n).sum();
    let best =
        per.into_iter().min_by(|a, b| a.e.total_cmp(&b.e)).unwrap_or(Best { n: 0, e: f64::INFINITY, fam: Vec::new() });
    Ok(FragmentationReport {
        mass,
        window,
        families: n,
        single_energy: single,
        best_other_energy: best.e,
        gap: best.e - single,
        best_other: best.fam,
    })
}

/// Result of counting compatible external families of a given total mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyCount {
    pub volume: usize,
    pub mass: u64,
    pub threshold: f64,
    pub count: u64,
    /// Candidates rejected by the round-trip compatibility test.
    pub rejected: u64,
    /// `(2 - gamma) |Lambda|^gamma log |Lambda|` with `gamma` recovered from the threshold.
    pub log_bound: f64,
    pub holds: bool,
}

/// Count families of mutually external triangles in `[-L, L]` with every mass
/// `> eps_s_abs` and total mass `rho |Lambda|`, certifying each one by round trip.
/// The bound uses `gamma = -log(eps_s_abs / |Lambda|) / log |Lambda|`.
pub fn count_external_families(l: usize, rho: f64, eps_s_abs: f64) -> Result<EntropyCount> {
    let n = 2 * l + 1;
    if n > 24 {
        return Err(Error::TooLarge { what: format!("|Lambda| = {n}"), limit: 24 });
    }
    let target = rho * n as f64;
    let mass = target.round();
    if !(0.0..=n as f64).contains(&mass) || (target - mass).abs() > 1e-9 {
        return Err(Error::InfeasibleRho(rho));
    }
    let mass = mass as u64;
    let li = l as i64;
    let mut count = 0u64;
    let mut rejected = 0u64;
    let mut cur: Vec<Triangle> = Vec::new();
    // bases placed left to right starting at site >= `from`
    fn rec(
        from: i64,
        left: u64,
        li: i64,
        thr: f64,
        cur: &mut Vec<Triangle>,
        l: usize,
        count: &mut u64,
        rejected: &mut u64,
    ) {
        if left == 0 {
            if is_compatible_external_family(cur, l, thr) {
                *count += 1;
            } else {
                *rejected += 1;
            }
            return;
        }
        for lo in from..=li {
            for len in 1..=left {
                if len as f64 <= thr {
                    continue;
                }
                let hi = lo + len as i64 - 1;
                if hi > li {
                    break;
                }
                cur.push(Triangle::from_base(lo, hi));
                rec(hi + 1, left - len, li, thr, cur, l, count, rejected);
                cur.pop();
            }
        }
    }
    rec(-li, mass, li, eps_s_abs, &mut cur, l, &mut count, &mut rejected);
    let nf = n as f64;
    let gamma = -(eps_s_abs / nf).ln() / nf.ln();
    let log_bound = (2.0 - gamma) * nf.powf(gamma) * nf.ln();
    let holds = (count as f64).ln() <= log_bound;
    Ok(EntropyCount { volume: n, mass, threshold: eps_s_abs, count, rejected, log_bound, holds })
}
