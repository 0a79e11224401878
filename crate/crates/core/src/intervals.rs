//! Energies of configurations that are `-1` on a union of intervals.
//!
//! With `+` spins outside the window the energy only depends on the intervals
//! themselves, so everything here is in closed form through the cumulative
//! sums of the kernel.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Inclusive integer interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub fn new(lo: i64, hi: i64) -> Self {
        assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn len(&self) -> u64 {
        (self.hi - self.lo + 1) as u64
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[inline]
fn c1(k: &Kernel, n: i64) -> f64 {
    if n <= 0 {
        0.0
    } else {
        k.cumulative(n as usize)
    }
}

#[inline]
fn c2(k: &Kernel, n: i64) -> f64 {
    if n <= 0 {
        0.0
    } else {
        k.cumulative2(n as usize)
    }
}

/// Energy of a single interval of length `len` in a sea of `+`:
/// `2 [sum_{d<=len} d J(d) + len sum_{d>len} J(d)]`.
pub fn single_interval_energy(len: u64, kernel: &Kernel) -> f64 {
    if len == 0 {
        return 0.0;
    }
    let l = len as i64;
    // sum_{d=1}^{l} d J(d) = l C1(l) - C2(l-1)
    let first = l as f64 * c1(kernel, l) - c2(kernel, l - 1);
    2.0 * (first + l as f64 * kernel.coupling_tail(len + 1))
}

/// `W(I, I') = sum_{x in I} sum_{y in I'} J(x - y)` for disjoint intervals.
pub fn interaction(a: Interval, b: Interval, kernel: &Kernel) -> f64 {
    let (a, b) = if a.hi < b.lo { (a, b) } else { (b, a) };
    assert!(a.hi < b.lo, "intervals overlap");
    c2(kernel, b.hi - a.lo) - c2(kernel, b.hi - a.hi - 1) - c2(kernel, b.lo - 1 - a.lo) + c2(kernel, b.lo - a.hi - 2)
}

/// Energy of a family of intervals, with its decomposition into single-interval
/// energies and pairwise interactions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalEnergy {
    pub total: f64,
    pub singles: Vec<f64>,
    /// `(i, j, W(I_i, I_j))` for `i < j`.
    pub cross: Vec<(usize, usize, f64)>,
}

/// Check that intervals are ordered, disjoint and inside `[-l, l]`.
pub fn validate_intervals(intervals: &[Interval], l: usize) -> Result<()> {
    let l = l as i64;
    for (k, iv) in intervals.iter().enumerate() {
        if iv.lo > iv.hi {
            return Err(Error::BadIntervals(format!("interval {k} is empty: [{}, {}]", iv.lo, iv.hi)));
        }
        if iv.lo < -l || iv.hi > l {
            return Err(Error::BadIntervals(format!("interval {k} = [{}, {}] leaves [-{l}, {l}]", iv.lo, iv.hi)));
        }
        if k > 0 && intervals[k - 1].hi >= iv.lo {
            return Err(Error::BadIntervals(format!("intervals {} and {k} overlap or are unordered", k - 1)));
        }
    }
    Ok(())
}

/// Energy of the configuration that is `-1` exactly on the union of `intervals`.
pub fn interval_family_energy(intervals: &[Interval], kernel: &Kernel, l: usize) -> Result<IntervalEnergy> {
    validate_intervals(intervals, l)?;
    let singles: Vec<f64> = intervals.iter().map(|iv| single_interval_energy(iv.len(), kernel)).collect();
    let mut cross = Vec::new();
    let mut total: f64 = singles.iter().sum();
    for i in 0..intervals.len() {
        for j in (i + 1)..intervals.len() {
            let w = interaction(intervals[i], intervals[j], kernel);
            total -= 2.0 * w;
            cross.push((i, j, w));
        }
    }
    Ok(IntervalEnergy { total, singles, cross })
}

/// Total energy only, skipping the bookkeeping.
pub fn family_energy(intervals: &[Interval], kernel: &Kernel) -> f64 {
    let mut total = 0.0;
    for (i, a) in intervals.iter().enumerate() {
        total += single_interval_energy(a.len(), kernel);
        for b in &intervals[i + 1..] {
            total -= 2.0 * interaction(*a, *b, kernel);
        }
    }
    total
}

/// Energy drop from merging all intervals into one of the same total length:
/// `h(I_1, ..., I_k) - h(I*)`.
pub fn merge_gain(intervals: &[Interval], kernel: &Kernel) -> f64 {
    let total: u64 = intervals.iter().map(|iv| iv.len()).sum();
    family_energy(intervals, kernel) - single_interval_energy(total, kernel)
}

/// Spin sequence on `[-l, l]` that is `-1` on the intervals.
pub fn intervals_to_spins(intervals: &[Interval], l: usize) -> Result<Vec<i8>> {
    validate_intervals(intervals, l)?;
    let mut s = vec![1i8; 2 * l + 1];
    for iv in intervals {
        for x in iv.lo..=iv.hi {
            s[(x + l as i64) as usize] = -1;
        }
    }
    Ok(s)
}

/// Maximal minus runs of a spin sequence on `[-l, l]`.
pub fn spins_to_intervals(spins: &[i8]) -> Vec<Interval> {
    let l = (spins.len() / 2) as i64;
    let mut out = Vec::new();
    let mut start = None;
    for (k, &s) in spins.iter().enumerate() {
        let x = k as i64 - l;
        match (s < 0, start) {
            (true, None) => start = Some(x),
            (false, Some(a)) => {
                out.push(Interval::new(a, x - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push(Interval::new(a, l));
    }
    out
}

/// The two sides of the single-triangle energy sandwich for a triangle of mass `len`:
/// `2 len^a/(a(1-a)) - 2/a` and `2 len^a/(a(1-a)) - 2(1 - 1/a)`.
pub fn single_triangle_bounds(len: u64, alpha: f64) -> (f64, f64) {
    let main = 2.0 * (len as f64).powf(alpha) / (alpha * (1.0 - alpha));
    (main - 2.0 / alpha, main - 2.0 * (1.0 - 1.0 / alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spins::hamiltonian;

    #[test]
    fn single_interval_matches_hamiltonian() {
        let l = 12;
        let k = Kernel::with_range(0.3, 10.0, 2 * l + 2);
        for len in 1..=9u64 {
            let iv = Interval::new(-3, -3 + len as i64 - 1);
            let s = intervals_to_spins(&[iv], l).unwrap();
            let h = hamiltonian(&s, &k);
            assert!((single_interval_energy(len, &k) - h).abs() < 1e-10, "len={len}");
        }
    }

    #[test]
    fn unit_interval_is_unit_triangle() {
        let k = Kernel::with_range(0.3, 10.0, 10);
        assert!((single_interval_energy(1, &k) - (20.0 + 2.0 * k.zeta())).abs() < 1e-12);
    }

    #[test]
    fn two_units_cross_term() {
        let k = Kernel::with_range(0.3, 10.0, 30);
        for d in 2..10i64 {
            let e = interval_family_energy(&[Interval::new(-5, -5), Interval::new(-5 + d, -5 + d)], &k, 10).unwrap();
            let unit = single_interval_energy(1, &k);
            assert!((e.total - (2.0 * unit - 2.0 * k.coupling(d))).abs() < 1e-12);
            assert!((e.cross[0].2 - k.coupling(d)).abs() < 1e-13);
        }
    }

    #[test]
    fn interaction_by_direct_sum() {
        let k = Kernel::with_range(0.4, 3.0, 60);
        let a = Interval::new(-7, -2);
        let b = Interval::new(3, 11);
        let mut direct = 0.0;
        for x in a.lo..=a.hi {
            for y in b.lo..=b.hi {
                direct += k.coupling(x - y);
            }
        }
        assert!((interaction(a, b, &k) - direct).abs() < 1e-12);
        assert!((interaction(b, a, &k) - direct).abs() < 1e-12);
    }

    #[test]
    fn rejects_overlap_and_window() {
        let k = Kernel::with_range(0.3, 10.0, 30);
        assert!(interval_family_energy(&[Interval::new(0, 3), Interval::new(3, 4)], &k, 10).is_err());
        assert!(interval_family_energy(&[Interval::new(0, 11)], &k, 10).is_err());
        assert!(interval_family_energy(&[Interval::new(4, 5), Interval::new(0, 1)], &k, 10).is_err());
    }

    #[test]
    fn merging_two_units() {
        let k = Kernel::with_range(0.3, 10.0, 40);
        let g = merge_gain(&[Interval::new(0, 0), Interval::new(3, 3)], &k);
        let direct = 2.0 * single_interval_energy(1, &k) - 2.0 * k.coupling(3) - single_interval_energy(2, &k);
        assert!((g - direct).abs() < 1e-12 && g > 0.0);
        assert_eq!(merge_gain(&[Interval::new(0, 4)], &k), 0.0);
    }

    #[test]
    fn round_trip_runs() {
        let ivs = vec![Interval::new(-6, -4), Interval::new(0, 0), Interval::new(3, 6)];
        let s = intervals_to_spins(&ivs, 6).unwrap();
        assert_eq!(spins_to_intervals(&s), ivs);
    }

    #[test]
    fn sandwich_with_pure_power_law() {
        let k = Kernel::with_range(0.3, 0.0, 2100);
        for len in 1..=1000u64 {
            let h = single_interval_energy(len, &k);
            let (lo, hi) = single_triangle_bounds(len, 0.3);
            assert!(lo <= h && h <= hi, "len={len}: {lo} <= {h} <= {hi}");
        }
    }
}
