//! Grouping triangles into contours, contour census and Peierls-type checks.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{build_triangles, greedy_pairing, root_distance, Triangle, TriangleFamily};
use crate::intervals::{family_energy, spins_to_intervals, Interval};
use crate::kernel::Kernel;
use crate::params::{min_separation_constant, zeta_alpha};

/// A group of triangles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Contour {
    triangles: Vec<Triangle>,
}

impl Contour {
    pub fn new(mut triangles: Vec<Triangle>) -> Self {
        assert!(!triangles.is_empty(), "empty contour");
        triangles.sort();
        Contour { triangles }
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    /// `sum |T|`.
    pub fn mass(&self) -> u64 {
        self.triangles.iter().map(|t| t.mass()).sum()
    }

    /// `sum |T|^alpha`.
    pub fn norm_alpha(&self, alpha: f64) -> f64 {
        self.triangles.iter().map(|t| (t.mass() as f64).powf(alpha)).sum()
    }

    /// Leftmost base site.
    pub fn x_minus(&self) -> i64 {
        self.triangles.iter().map(|t| t.x_minus()).min().unwrap()
    }

    /// Smallest flip interval covering every member, as `(min i, max j)`.
    pub fn hull(&self) -> (i64, i64) {
        hull(&self.triangles)
    }

    /// Union of the frames of the members, sorted.
    pub fn sf(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self.triangles.iter().flat_map(|t| t.sf()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Union of the bases, as disjoint site intervals.
    pub fn delta(&self) -> Vec<(i64, i64)> {
        let mut b: Vec<(i64, i64)> = self.triangles.iter().map(|t| t.base()).collect();
        b.sort();
        let mut out: Vec<(i64, i64)> = Vec::new();
        for (lo, hi) in b {
            match out.last_mut() {
                Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        out
    }
}

fn hull(t: &[Triangle]) -> (i64, i64) {
    let lo = t.iter().map(|t| t.i).min().unwrap();
    let hi = t.iter().map(|t| t.j).max().unwrap();
    (lo, hi)
}

/// Distance between two groups of triangles: the smallest flip distance.
pub fn group_distance(a: &[Triangle], b: &[Triangle]) -> u64 {
    let mut d = u64::MAX;
    for x in a {
        for y in b {
            d = d.min(root_distance(x, y));
        }
    }
    d
}

fn bases_meet(a: &[Triangle], b: &[Triangle]) -> bool {
    a.iter().any(|x| b.iter().any(|y| !x.bases_disjoint(y)))
}

/// Whether inner group `a` sits in exactly one triangle of `b` and is disjoint
/// from all the others.
fn nested_ok(a: &[Triangle], b: &[Triangle]) -> bool {
    let (lo, hi) = hull(a);
    let mut inside = 0;
    for t in b {
        if t.i <= lo && hi <= t.j {
            inside += 1;
        } else if !(t.j <= lo || hi <= t.i) {
            return false;
        }
    }
    inside == 1
}

fn mass_of(t: &[Triangle]) -> u64 {
    t.iter().map(|t| t.mass()).sum()
}

/// Whether two groups must be merged: too close, or bases meeting without a
/// clean nesting of one group inside a single triangle of the other.
pub fn groups_conflict(a: &[Triangle], b: &[Triangle], c: f64) -> bool {
    let m = mass_of(a).min(mass_of(b)) as f64;
    if group_distance(a, b) as f64 <= c * m * m * m {
        return true;
    }
    if bases_meet(a, b) {
        let ab = nested_ok(a, b);
        let ba = nested_ok(b, a);
        // exactly one triangle in total contains the other hull
        return ab == ba;
    }
    false
}

/// Contours of a triangle family with the separation constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourFamily {
    pub contours: Vec<Contour>,
    pub c: f64,
    /// `2 pi^2 / (3 alpha (1 - alpha) C)`, filled in when `alpha` is known.
    pub delta: Option<f64>,
}

/// `2 pi^2 / (3 alpha (1 - alpha) C)`.
pub fn delta_for(alpha: f64, c: f64) -> f64 {
    2.0 * PI * PI / (3.0 * alpha * (1.0 - alpha) * c)
}

impl ContourFamily {
    pub fn len(&self) -> usize {
        self.contours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.delta = Some(delta_for(alpha, self.c));
        self
    }

    /// Index of the contour holding `t`.
    pub fn contour_of(&self, t: &Triangle) -> Option<usize> {
        self.contours.iter().position(|g| g.triangles.binary_search(t).is_ok())
    }

    /// Pairs of contours that violate the separation rules.
    pub fn violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.contours.len() {
            for b in (a + 1)..self.contours.len() {
                if groups_conflict(&self.contours[a].triangles, &self.contours[b].triangles, self.c) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// All member triangles, sorted.
    pub fn all_triangles(&self) -> Vec<Triangle> {
        let mut v: Vec<Triangle> = self.contours.iter().flat_map(|g| g.triangles.iter().copied()).collect();
        v.sort();
        v
    }
}

fn merge_to_fixed_point(
    mut groups: Vec<Vec<Triangle>>,
    c: f64,
    mut order: impl FnMut(usize) -> Vec<(usize, usize)>,
) -> Vec<Vec<Triangle>> {
    loop {
        let mut merged = false;
        for (a, b) in order(groups.len()) {
            if groups_conflict(&groups[a], &groups[b], c) {
                let g = std::mem::take(&mut groups[b]);
                groups[a].extend(g);
                groups.swap_remove(b);
                merged = true;
                break;
            }
        }
        if !merged {
            return groups;
        }
    }
}

fn finish(groups: Vec<Vec<Triangle>>, c: f64) -> ContourFamily {
    let mut contours: Vec<Contour> = groups.into_iter().map(Contour::new).collect();
    contours.sort_by_key(|g| g.triangles[0]);
    ContourFamily { contours, c, delta: None }
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n * n / 2);
    for a in 0..n {
        for b in (a + 1)..n {
            v.push((a, b));
        }
    }
    v
}

/// Start from singletons and merge conflicting pairs until none is left.
pub fn group_contours(family: &TriangleFamily, c: f64) -> ContourFamily {
    group_triangles(family.triangles(), c)
}

pub fn group_triangles(triangles: &[Triangle], c: f64) -> ContourFamily {
    let mut groups: Vec<Vec<Triangle>> = triangles.iter().map(|t| vec![*t]).collect();
    loop {
        let mut merged = false;
        let mut a = 0;
        while a < groups.len() {
            let mut b = a + 1;
            while b < groups.len() {
                if groups_conflict(&groups[a], &groups[b], c) {
                    let g = groups.remove(b);
                    groups[a].extend(g);
                    merged = true;
                    // group a grew: look at every other group again
                    b = a + 1;
                } else {
                    b += 1;
                }
            }
            a += 1;
        }
        if !merged {
            return finish(groups, c);
        }
    }
}

/// Same fixed point reached with pairs examined in a random order.
pub fn group_contours_shuffled(family: &TriangleFamily, c: f64, seed: u64) -> ContourFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups: Vec<Vec<Triangle>> = family.triangles().iter().map(|t| vec![*t]).collect();
    groups.shuffle(&mut rng);
    let g = merge_to_fixed_point(groups, c, |n| {
        let mut p = all_pairs(n);
        p.shuffle(&mut rng);
        p
    });
    finish(g, c)
}

/// Whether the triangles form one contour.
pub fn is_single_contour(triangles: &[Triangle], c: f64) -> bool {
    group_triangles(triangles, c).len() == 1
}

/// Check of the summability condition on `C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationConstantCheck {
    pub c: f64,
    /// `sum_M 4M / (C M^3) = 4 zeta(2) / C`.
    pub sum: f64,
    pub summable: bool,
    /// `C > pi^2 / 3`.
    pub above_pi2_over_3: bool,
}

pub fn check_separation_constant(c: f64) -> SeparationConstantCheck {
    let sum = 4.0 * PI * PI / 6.0 / c;
    SeparationConstantCheck { c, sum, summable: sum <= 0.5, above_pi2_over_3: c > PI * PI / 3.0 }
}

/// Dump record for one triangle in a contour family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourRecord {
    pub i: i64,
    pub j: i64,
    pub mass: u64,
    pub external: bool,
    pub parent: Option<usize>,
    pub contour_id: usize,
    pub norm_alpha: f64,
}

pub fn contour_records(family: &TriangleFamily, contours: &ContourFamily, alpha: f64) -> Vec<ContourRecord> {
    family
        .records()
        .into_iter()
        .map(|r| {
            let t = Triangle::new(r.i, r.j);
            let id = contours.contour_of(&t).expect("triangle missing from contours");
            ContourRecord {
                i: r.i,
                j: r.j,
                mass: r.mass,
                external: r.external,
                parent: r.parent,
                contour_id: id,
                norm_alpha: contours.contours[id].norm_alpha(alpha),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Census of single contours with leftmost base site 0.

/// Number of contours of total mass `M` with `x_-(Gamma) = 0`, split by the
/// multiset of member masses (which fixes the alpha-norm).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourCensus {
    pub c: f64,
    /// `by_mass[M]` maps sorted member masses to the number of contours.
    pub by_mass: BTreeMap<u64, BTreeMap<Vec<u64>, u64>>,
    /// Leaves examined by the search, per mass.
    pub leaves: BTreeMap<u64, u64>,
}

impl ContourCensus {
    pub fn count(&self, m: u64) -> u64 {
        self.by_mass.get(&m).map(|x| x.values().sum()).unwrap_or(0)
    }

    /// `sum_Gamma e^{-b ||Gamma||_alpha}` at mass `m`.
    pub fn weighted_sum(&self, m: u64, b: f64, alpha: f64) -> f64 {
        self.by_mass
            .get(&m)
            .map(|x| x.iter().map(|(ms, &n)| n as f64 * (-b * norm_of(ms, alpha)).exp()).sum())
            .unwrap_or(0.0)
    }
}

fn norm_of(masses: &[u64], alpha: f64) -> f64 {
    masses.iter().map(|&m| (m as f64).powf(alpha)).sum()
}

fn pair_ok(a: &Triangle, b: &Triangle) -> bool {
    let laminar = a.bases_disjoint(b) || a.contains(b) || b.contains(a);
    if !laminar {
        return false;
    }
    if root_distance(a, b) < a.mass().min(b.mass()) {
        return false;
    }
    !(a.contains(b) && 3 * b.mass() > a.mass() || b.contains(a) && 3 * a.mass() > b.mass())
}

/// Whether the triangles are exactly the pairing of their own flips.
pub fn is_realizable(tri: &[Triangle]) -> bool {
    let mut pts: Vec<i64> = tri.iter().flat_map(|t| [t.i, t.j]).collect();
    pts.sort_unstable();
    if pts.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    let mut got: Vec<(i64, i64)> = greedy_pairing(&pts);
    got.sort_unstable();
    let mut want: Vec<(i64, i64)> = tri.iter().map(|t| (t.i, t.j)).collect();
    want.sort_unstable();
    got == want
}

/// Whether at most 12 triangles are exactly the pairing of their flips; no allocation.
fn realizable_small(tri: &[Triangle]) -> bool {
    let n = tri.len();
    let mut pts = [0i64; 24];
    for (k, t) in tri.iter().enumerate() {
        pts[2 * k] = t.i;
        pts[2 * k + 1] = t.j;
    }
    let pts = &mut pts[..2 * n];
    pts.sort_unstable();
    let mut stack = [0i64; 24];
    let mut sp = 0usize;
    let mut matched = 0usize;
    let has = |a: i64, b: i64| tri.iter().any(|t| t.i == a && t.j == b);
    for k in 0..2 * n {
        let p = pts[k];
        if k > 0 && pts[k - 1] == p {
            return false;
        }
        while sp >= 2 && stack[sp - 1] - stack[sp - 2] <= p - stack[sp - 1] {
            if !has(stack[sp - 2], stack[sp - 1]) {
                return false;
            }
            matched += 1;
            sp -= 2;
        }
        stack[sp] = p;
        sp += 1;
    }
    while sp >= 2 {
        if !has(stack[sp - 2], stack[sp - 1]) {
            return false;
        }
        matched += 1;
        sp -= 2;
    }
    matched == n
}

struct Pairs {
    n: usize,
    mass: [u64; 16],
    lo: [i64; 16],
    hi: [i64; 16],
    dist: [[u64; 16]; 16],
    meet: [u16; 16],
}

impl Pairs {
    fn new(tri: &[Triangle]) -> Self {
        let n = tri.len();
        let mut p = Pairs { n, mass: [0; 16], lo: [0; 16], hi: [0; 16], dist: [[0; 16]; 16], meet: [0; 16] };
        for a in 0..n {
            p.mass[a] = tri[a].mass();
            p.lo[a] = tri[a].i;
            p.hi[a] = tri[a].j;
            for b in 0..n {
                if a != b {
                    p.dist[a][b] = root_distance(&tri[a], &tri[b]);
                    if !tri[a].bases_disjoint(&tri[b]) {
                        p.meet[a] |= 1 << b;
                    }
                }
            }
        }
        p
    }

    fn mass(&self, g: u16) -> u64 {
        bits(g).map(|k| self.mass[k]).sum()
    }

    fn hull(&self, g: u16) -> (i64, i64) {
        let lo = bits(g).map(|k| self.lo[k]).min().unwrap();
        let hi = bits(g).map(|k| self.hi[k]).max().unwrap();
        (lo, hi)
    }

    fn nested(&self, inner: u16, outer: u16) -> bool {
        let (lo, hi) = self.hull(inner);
        let mut inside = 0;
        for k in bits(outer) {
            if self.lo[k] <= lo && hi <= self.hi[k] {
                inside += 1;
            } else if !(self.hi[k] <= lo || hi <= self.lo[k]) {
                return false;
            }
        }
        inside == 1
    }

    fn conflict(&self, ga: u16, gb: u16, c: f64) -> bool {
        let m = self.mass(ga).min(self.mass(gb)) as f64;
        let lim = c * m * m * m;
        let mut meet = false;
        for a in bits(ga) {
            for b in bits(gb) {
                if self.dist[a][b] as f64 <= lim {
                    return true;
                }
            }
            meet |= self.meet[a] & gb != 0;
        }
        meet && self.nested(ga, gb) == self.nested(gb, ga)
    }
}

fn bits(g: u16) -> impl Iterator<Item = usize> {
    let mut g = g;
    std::iter::from_fn(move || {
        if g == 0 {
            None
        } else {
            let k = g.trailing_zeros() as usize;
            g &= g - 1;
            Some(k)
        }
    })
}

/// [`is_single_contour`] for at most 16 triangles, with bitmask groups.
pub fn single_contour_small(tri: &[Triangle], c: f64) -> bool {
    let n = tri.len();
    assert!(n <= 16);
    if n <= 1 {
        return n == 1;
    }
    let p = Pairs::new(tri);
    let mut groups = [0u16; 16];
    for (k, g) in groups.iter_mut().enumerate().take(n) {
        *g = 1 << k;
    }
    let mut ng = p.n;
    'outer: loop {
        for a in 0..ng {
            for b in (a + 1)..ng {
                if p.conflict(groups[a], groups[b], c) {
                    groups[a] |= groups[b];
                    groups[b] = groups[ng - 1];
                    ng -= 1;
                    if ng == 1 {
                        return true;
                    }
                    continue 'outer;
                }
            }
        }
        return false;
    }
}

/// Depth-first search over single contours with leftmost base site 0 and
/// total mass `m`, starting with a first triangle of mass `first`. Calls
/// `visit` on every contour found and returns the number of leaves examined.
fn search_contours(m: u64, first: u64, c: f64, visit: &mut dyn FnMut(&[Triangle])) -> u64 {
    struct S<'a> {
        c: f64,
        m: u64,
        window: i64,
        placed: Vec<Triangle>,
        /// `reach[k] = C |T_k|^3`.
        reach: Vec<f64>,
        leaves: u64,
        visit: &'a mut dyn FnMut(&[Triangle]),
    }
    // A triangle can only ever join a group through another triangle within
    // C |T|^3 of it or whose base meets its own; `near` marks those that have one.
    fn rec(s: &mut S, pm: u64, max_j: i64, near: u16) {
        let left = s.m - pm;
        if left == 0 {
            s.leaves += 1;
            let n = s.placed.len();
            if (n == 1 || near.count_ones() as usize == n)
                && realizable_small(&s.placed)
                && single_contour_small(&s.placed, s.c)
            {
                (s.visit)(&s.placed);
            }
            return;
        }
        let last_i = s.placed.last().unwrap().i;
        let mm = pm.min(left) as f64;
        let i_max = (max_j + (s.c * mm * mm * mm).floor() as i64).min(s.window);
        let far = max_j + left as i64;
        let n = s.placed.len();
        for i in (last_i + 1)..=i_max {
            // a lonely triangle out of reach of i and everything after it
            if (0..n).any(|k| near >> k & 1 == 0 && (i - s.placed[k].j) as f64 > s.reach[k]) {
                break;
            }
            for len in 1..=left {
                let j = i + len as i64;
                if j > s.window {
                    break;
                }
                let t = Triangle::new(i, j);
                // past max_j + left every flip distance exceeds any mass involved
                if i > far || s.placed.iter().all(|p| pair_ok(p, &t)) {
                    let rt = s.c * (len * len * len) as f64;
                    let mut nr = near;
                    for (k, p) in s.placed.iter().enumerate() {
                        let d = root_distance(p, &t) as f64;
                        let meet = !p.bases_disjoint(&t);
                        if meet || d <= s.reach[k] {
                            nr |= 1 << k;
                        }
                        if meet || d <= rt {
                            nr |= 1 << n;
                        }
                    }
                    s.placed.push(t);
                    s.reach.push(rt);
                    rec(s, pm + len, max_j.max(j), nr);
                    s.placed.pop();
                    s.reach.pop();
                }
            }
        }
    }
    let window = (c * (m * m * m) as f64).floor() as i64 + m as i64;
    let placed = vec![Triangle::new(-1, first as i64 - 1)];
    let reach = vec![c * (first * first * first) as f64];
    let mut s = S { c, m, window, placed, reach, leaves: 0, visit };
    rec(&mut s, first, first as i64 - 1, 0);
    s.leaves
}

fn census_jobs(mass_max: u64) -> Vec<(u64, u64)> {
    // heaviest searches first so the pool stays busy
    let mut v: Vec<(u64, u64)> = (1..=mass_max).flat_map(|m| (1..=m).map(move |f| (m, f))).collect();
    v.sort_by_key(|&(m, f)| (std::cmp::Reverse(m), f));
    v
}

/// Census of all single contours with `x_-(Gamma) = 0` and mass `1..=mass_max`.
///
/// Triangles are placed by increasing left flip inside `[0, C M^3 + M]`. A
/// partial placement whose last external gap exceeds `C min(placed, rest)^3`
/// is abandoned: such a split is already a stable two-contour partition.
pub fn contour_census(mass_max: u64, c: f64) -> ContourCensus {
    census_with_peierls(mass_max, c, None).0
}

/// Census together with the per-contour Peierls instances folded into a
/// [`BoundCheck`] at coupling `j` when `peierls = Some((alpha, j))`.
pub fn census_with_peierls(mass_max: u64, c: f64, peierls: Option<(f64, f64)>) -> (ContourCensus, Option<BoundCheck>) {
    let window = (c * (mass_max.pow(3)) as f64).floor() as usize + mass_max as usize + 4;
    let k0 = peierls.map(|(alpha, _)| Kernel::with_range(alpha, 0.0, window));
    let per: Vec<(u64, BTreeMap<Vec<u64>, u64>, u64, Option<Acc>)> = census_jobs(mass_max)
        .into_par_iter()
        .map(|(m, first)| {
            let mut found: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
            let mut acc = peierls.map(|(alpha, j)| Acc::new(j, alpha));
            let leaves = search_contours(m, first, c, &mut |g: &[Triangle]| {
                let mut ms: Vec<u64> = g.iter().map(|t| t.mass()).collect();
                ms.sort_unstable();
                *found.entry(ms).or_insert(0) += 1;
                if let (Some(a), Some(k)) = (acc.as_mut(), k0.as_ref()) {
                    let inst = AffineInstance {
                        e0: energy0(g, k),
                        flips: flip_count(g),
                        rhs: peierls_constant(a.alpha) * norm_alpha(g, a.alpha),
                    };
                    a.push(&inst);
                }
            });
            (m, found, leaves, acc)
        })
        .collect();
    let mut by_mass: BTreeMap<u64, BTreeMap<Vec<u64>, u64>> = BTreeMap::new();
    let mut leaves: BTreeMap<u64, u64> = BTreeMap::new();
    let mut total: Option<Acc> = None;
    for (m, found, lv, acc) in per {
        let e = by_mass.entry(m).or_default();
        for (k, v) in found {
            *e.entry(k).or_insert(0) += v;
        }
        *leaves.entry(m).or_insert(0) += lv;
        if let Some(a) = acc {
            total = Some(match total {
                None => a,
                Some(t) => t.merge(a),
            });
        }
    }
    let check = total.map(|a| a.finish("contours: H(G) >= zeta_a/(a(1-a)) ||G||_a"));
    (ContourCensus { c, by_mass, leaves }, check)
}

/// Streaming version of [`summarize`].
#[derive(Debug, Clone)]
struct Acc {
    j: f64,
    alpha: f64,
    need: u32,
    impossible: bool,
    worst: f64,
    bad: usize,
    n: usize,
}

impl Acc {
    fn new(j: f64, alpha: f64) -> Self {
        Acc { j, alpha, need: 1, impossible: false, worst: f64::INFINITY, bad: 0, n: 0 }
    }

    fn push(&mut self, x: &AffineInstance) {
        self.n += 1;
        match x.min_j() {
            Some(k) => self.need = self.need.max(k),
            None => self.impossible = true,
        }
        self.worst = self.worst.min(x.e0 + self.j * x.flips as f64 - x.rhs);
        if !x.holds_at(self.j) {
            self.bad += 1;
        }
    }

    fn merge(self, o: Acc) -> Acc {
        Acc {
            j: self.j,
            alpha: self.alpha,
            need: self.need.max(o.need),
            impossible: self.impossible || o.impossible,
            worst: self.worst.min(o.worst),
            bad: self.bad + o.bad,
            n: self.n + o.n,
        }
    }

    fn finish(self, name: &str) -> BoundCheck {
        let min_j = if self.impossible || self.need > 30 { None } else { Some(self.need) };
        BoundCheck { name: name.into(), instances: self.n, violations_at_j: self.bad, min_j, worst_margin: self.worst }
    }
}

/// Outcome of the contour counting inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingReport {
    pub alpha: f64,
    pub b: f64,
    /// Per mass: `(M, count, lhs, rhs, holds, threshold b for this M)`.
    pub rows: Vec<CountingRow>,
    /// Smallest `b` making every row hold.
    pub b_min: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingRow {
    pub m: u64,
    pub count: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub b_threshold: f64,
}

/// `sum_Gamma e^{-b(||Gamma|| - M^alpha)}`, decreasing in `b`.
fn ratio(census: &ContourCensus, m: u64, b: f64, alpha: f64) -> f64 {
    let ma = (m as f64).powf(alpha);
    census
        .by_mass
        .get(&m)
        .map(|x| x.iter().map(|(ms, &n)| n as f64 * (-b * (norm_of(ms, alpha) - ma)).exp()).sum())
        .unwrap_or(0.0)
}

fn threshold_b(census: &ContourCensus, m: u64, alpha: f64) -> f64 {
    if ratio(census, m, 0.0, alpha) <= 2.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while ratio(census, m, hi, alpha) > 2.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(census, m, mid, alpha) > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Evaluate `sum e^{-b ||Gamma||_alpha} <= 2 e^{-b M^alpha}` on a census.
pub fn contour_counting_check(census: &ContourCensus, b: f64, alpha: f64) -> CountingReport {
    let mut rows = Vec::new();
    for &m in census.by_mass.keys() {
        let lhs = census.weighted_sum(m, b, alpha);
        let rhs = 2.0 * (-b * (m as f64).powf(alpha)).exp();
        rows.push(CountingRow {
            m,
            count: census.count(m),
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + 1e-12),
            b_threshold: threshold_b(census, m, alpha),
        });
    }
    let b_min = rows.iter().map(|r| r.b_threshold).fold(0.0, f64::max);
    let holds = rows.iter().all(|r| r.holds);
    CountingReport { alpha, b, rows, b_min, holds }
}

// ---------------------------------------------------------------------------
// Peierls-type energy bounds.
//
// Energies are affine in J: every broken nearest-neighbour bond carries an
// extra J, and the number of broken bonds equals the number of flips. Each
// instance stores (energy at J = 0, flips, right-hand side) so the smallest
// adequate J can be read off directly.

/// One inequality `E0 + J * flips >= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineInstance {
    pub e0: f64,
    pub flips: u64,
    pub rhs: f64,
}

impl AffineInstance {
    pub fn holds_at(&self, j: f64) -> bool {
        self.e0 + j * self.flips as f64 >= self.rhs - 1e-9 * self.rhs.abs().max(1.0)
    }

    /// Smallest integer `J >= 1` that makes the inequality hold; `None` if none does.
    pub fn min_j(&self) -> Option<u32> {
        if self.holds_at(1.0) {
            return Some(1);
        }
        if self.flips == 0 {
            return None;
        }
        let j = ((self.rhs - self.e0) / self.flips as f64).ceil().max(1.0) as u32;
        (j..j + 2).find(|&k| self.holds_at(k as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub instances: usize,
    /// Violations at the configured J.
    pub violations_at_j: usize,
    /// Smallest integer `J` in `1..=30` for which every instance holds.
    pub min_j: Option<u32>,
    /// Smallest `(lhs - rhs)` over instances at the configured J.
    pub worst_margin: f64,
}

/// Fold instances into a [`BoundCheck`] at coupling `j`.
pub fn summarize(name: &str, inst: &[AffineInstance], j: f64) -> BoundCheck {
    let mut need = 1u32;
    let mut impossible = false;
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for x in inst {
        match x.min_j() {
            Some(k) => need = need.max(k),
            None => impossible = true,
        }
        let margin = x.e0 + j * x.flips as f64 - x.rhs;
        worst = worst.min(margin);
        if !x.holds_at(j) {
            bad += 1;
        }
    }
    let min_j = if impossible || need > 30 { None } else { Some(need) };
    BoundCheck { name: name.into(), instances: inst.len(), violations_at_j: bad, min_j, worst_margin: worst }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeierlsReport {
    pub alpha: f64,
    pub j: f64,
    pub c: f64,
    pub delta: f64,
    pub checks: Vec<BoundCheck>,
}

impl PeierlsReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.violations_at_j == 0)
    }

    /// Largest of the per-check minimal J, if every check has one.
    pub fn min_j(&self) -> Option<u32> {
        self.checks.iter().map(|c| c.min_j).try_fold(1, |a, b| b.map(|b| a.max(b)))
    }
}

fn peierls_constant(alpha: f64) -> f64 {
    zeta_alpha(alpha) / (alpha * (1.0 - alpha))
}

fn flip_count(tri: &[Triangle]) -> u64 {
    2 * tri.len() as u64
}

/// Minus intervals of the configuration realizing a set of triangles.
pub fn triangles_to_intervals(tri: &[Triangle]) -> Vec<Interval> {
    let mut pts: Vec<i64> = tri.iter().flat_map(|t| [t.i, t.j]).collect();
    pts.sort_unstable();
    // between consecutive flips p[2k] and p[2k+1] the spins are minus
    pts.chunks(2).map(|w| Interval::new(w[0] + 1, w[1])).collect()
}

/// Energy at `J = 0` of the configuration realizing `tri`.
pub fn energy0(tri: &[Triangle], k0: &Kernel) -> f64 {
    family_energy(&triangles_to_intervals(tri), k0)
}

/// Check (a) on every configuration of `[-L, L]`:
/// `H >= (2 zeta_alpha / (alpha (1 - alpha))) sum |T|^alpha`.
pub fn peierls_exhaustive(l: usize, alpha: f64) -> Vec<AffineInstance> {
    let n = 2 * l + 1;
    assert!(n <= 25, "exhaustive Peierls check limited to |Lambda| <= 25");
    let k0 = Kernel::with_range(alpha, 0.0, 2 * l + 2);
    let kc = 2.0 * peierls_constant(alpha);
    (1u32..(1 << n))
        .into_par_iter()
        .map(|code| {
            let s: Vec<i8> = (0..n).map(|k| if code >> k & 1 == 1 { -1 } else { 1 }).collect();
            let fam = build_triangles(&s);
            let e0 = family_energy(&spins_to_intervals(&s), &k0);
            AffineInstance { e0, flips: flip_count(fam.triangles()), rhs: kc * fam.alpha_norm(alpha) }
        })
        .collect()
}

/// Every single contour with `x_- = 0` and mass `<= mass_max`.
pub fn enumerate_contours(mass_max: u64, c: f64) -> Vec<Vec<Triangle>> {
    let mut out = Vec::new();
    for (m, first) in census_jobs(mass_max) {
        search_contours(m, first, c, &mut |g: &[Triangle]| out.push(g.to_vec()));
    }
    out
}

fn norm_alpha(t: &[Triangle], alpha: f64) -> f64 {
    t.iter().map(|t| (t.mass() as f64).powf(alpha)).sum()
}

/// Random configuration made of a few well-separated clusters of minus spins.
fn clustered_config(rng: &mut ChaCha8Rng, l: usize) -> Vec<i8> {
    let n = 2 * l + 1;
    let mut s = vec![1i8; n];
    let clusters = rng.gen_range(2..=5);
    for _ in 0..clusters {
        let width = rng.gen_range(1..=12usize);
        let start = rng.gen_range(0..n - width);
        let p = rng.gen_range(0.2..0.9);
        for v in &mut s[start..start + width] {
            if rng.gen_bool(p) {
                *v = -1;
            }
        }
    }
    s
}

/// Check (c): `H(Gamma0 u Gammas) - H(Gammas) >= delta ||Gamma0||_alpha` on
/// `samples` pairs drawn from random clustered configurations on `[-L, L]`.
/// A pair is used only when removing `Gamma0` leaves a family that is exactly
/// the pairing of its flips and groups into the remaining contours.
pub fn peierls_pairs(samples: usize, l: usize, c: f64, alpha: f64, seed: u64) -> Vec<AffineInstance> {
    let k0 = Kernel::with_range(alpha, 0.0, 2 * l + 2);
    let delta = delta_for(alpha, c);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    let mut attempts = 0usize;
    while out.len() < samples {
        attempts += 1;
        assert!(attempts < 1000 * samples.max(1), "could not sample compatible contour pairs");
        let s = clustered_config(&mut rng, l);
        let fam = build_triangles(&s);
        let groups = group_contours(&fam, c);
        if groups.len() < 2 {
            continue;
        }
        let pick = rng.gen_range(0..groups.len());
        let g0 = groups.contours[pick].triangles().to_vec();
        let rest: Vec<Triangle> = groups
            .contours
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != pick)
            .flat_map(|(_, g)| g.triangles().iter().copied())
            .collect();
        if !is_realizable(&rest) {
            continue;
        }
        let regroup = group_triangles(&rest, c);
        let mut expect: Vec<Contour> =
            groups.contours.iter().enumerate().filter(|(k, _)| *k != pick).map(|(_, g)| g.clone()).collect();
        expect.sort_by_key(|g| g.triangles()[0]);
        if regroup.contours != expect {
            continue;
        }
        let e_all = family_energy(&spins_to_intervals(&s), &k0);
        let e_rest = energy0(&rest, &k0);
        out.push(AffineInstance { e0: e_all - e_rest, flips: flip_count(&g0), rhs: delta * norm_alpha(&g0, alpha) });
    }
    out
}

/// Run the three Peierls checks at the given `J`.
pub fn verify_peierls(
    alpha: f64,
    j: f64,
    c: f64,
    exhaustive_l: usize,
    contour_mass_max: u64,
    pair_samples: usize,
    seed: u64,
) -> PeierlsReport {
    let a = peierls_exhaustive(exhaustive_l, alpha);
    let (_, b) = census_with_peierls(contour_mass_max, c, Some((alpha, j)));
    let p = peierls_pairs(pair_samples, 60, c, alpha, seed);
    PeierlsReport {
        alpha,
        j,
        c,
        delta: delta_for(alpha, c),
        checks: vec![
            summarize("configurations: H >= 2 zeta_a/(a(1-a)) sum |T|^a", &a, j),
            b.expect("per-contour check requested"),
            summarize("pairs: H(G0 u G) - H(G) >= delta ||G0||_a", &p, j),
        ],
    }
}

/// `4 pi^2 / 3`, re-exported for convenience.
pub fn min_c() -> f64 {
    min_separation_constant()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(tri: Vec<Triangle>) -> TriangleFamily {
        TriangleFamily::from_triangles(100, tri)
    }

    #[test]
    fn separation_constant() {
        assert!((min_c() - 13.1595).abs() < 1e-4);
        assert!(!check_separation_constant(13.0).summable);
        let ok = check_separation_constant(14.0);
        assert!(ok.summable && ok.above_pi2_over_3);
        assert!((check_separation_constant(min_c()).sum - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unit_triangles_near_and_far() {
        let near = group_contours(&fam(vec![Triangle::from_base(0, 0), Triangle::from_base(3, 3)]), 14.0);
        assert_eq!(near.len(), 1);
        let far = group_contours(&fam(vec![Triangle::from_base(0, 0), Triangle::from_base(21, 21)]), 14.0);
        assert_eq!(far.len(), 2);
        assert!(far.violations().is_empty());
    }

    #[test]
    fn single_triangle_contour() {
        let g = group_contours(&fam(vec![Triangle::from_base(2, 6)]), 14.0);
        assert_eq!(g.len(), 1);
        assert!((g.contours[0].norm_alpha(0.3) - 5f64.powf(0.3)).abs() < 1e-15);
        assert_eq!(g.contours[0].x_minus(), 2);
    }

    #[test]
    fn delta_value() {
        let g = group_contours(&fam(vec![]), 14.0).with_alpha(0.3);
        assert_eq!(g.delta, Some(2.0 * PI * PI / (3.0 * 0.3 * 0.7 * 14.0)));
    }

    #[test]
    fn nested_contour_stays_separate() {
        // a unit triangle deep inside a huge one is a separate contour
        let big = Triangle::from_base(0, 299);
        let small = Triangle::from_base(150, 150);
        let g = group_contours(&fam(vec![big, small]), 14.0);
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn census_small_masses() {
        let c = contour_census(2, 14.0);
        assert_eq!(c.count(1), 1);
        // mass 2: one triangle of mass 2, or two unit triangles with flip gap 1..=14
        let two = c.by_mass[&2].clone();
        assert_eq!(two[&vec![2]], 1);
        assert_eq!(two[&vec![1, 1]], 14);
        let r = contour_counting_check(&c, 5.0, 0.3);
        assert!(r.holds);
        assert!((r.rows[0].lhs - (-5.0f64).exp()).abs() < 1e-15);
        let below = contour_counting_check(&c, r.b_min * 0.9, 0.3);
        assert!(!below.holds);
    }

    #[test]
    fn fast_checks_agree_with_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3000 {
            let n = rng.gen_range(1..=6);
            let mut tri = Vec::new();
            for _ in 0..n {
                let i = rng.gen_range(-1..40);
                let len = rng.gen_range(1..6);
                tri.push(Triangle::new(i, i + len));
            }
            tri.sort();
            tri.dedup();
            assert_eq!(realizable_small(&tri), is_realizable(&tri), "{tri:?}");
            if is_realizable(&tri) {
                for c in [2.0, 14.0] {
                    assert_eq!(single_contour_small(&tri, c), is_single_contour(&tri, c), "{tri:?}");
                }
            }
        }
    }

    #[test]
    fn census_visits_match_enumeration() {
        let all = enumerate_contours(4, 14.0);
        let c = contour_census(4, 14.0);
        assert_eq!(all.len() as u64, (1..=4).map(|m| c.count(m)).sum::<u64>());
        for g in all.iter().take(200) {
            assert_eq!(g.iter().map(|t| t.i).min(), Some(-1));
            assert!(is_single_contour(g, 14.0));
        }
    }

    #[test]
    fn affine_instances() {
        let x = AffineInstance { e0: 1.0, flips: 2, rhs: 10.0 };
        assert_eq!(x.min_j(), Some(5));
        assert!(x.holds_at(4.5) && !x.holds_at(4.4));
        let y = AffineInstance { e0: 0.0, flips: 0, rhs: 1.0 };
        assert_eq!(y.min_j(), None);
    }

    #[test]
    fn unit_triangle_peierls_slack() {
        let k = Kernel::with_range(0.3, 10.0, 10);
        let unit = 2.0 * 10.0 + 2.0 * k.zeta();
        let rhs = 2.0 * peierls_constant(0.3);
        assert!((unit - 24.1086).abs() < 1e-3);
        assert!((rhs - 5.12).abs() < 0.01);
        assert!(unit > 4.0 * rhs);
    }

    #[test]
    fn triangles_to_intervals_nested() {
        let tri = vec![Triangle::from_base(0, 6), Triangle::from_base(3, 3)];
        assert_eq!(triangles_to_intervals(&tri), vec![Interval::new(0, 2), Interval::new(4, 6)]);
    }
}
