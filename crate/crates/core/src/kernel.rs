//! Pair couplings `J(n)` and their tails.

use crate::error::Result;
use crate::params::ModelParams;

/// `sum_{n >= k} n^-s` for `s > 1`, `k >= 1`, accurate to ~1e-14 relative.
///
/// Direct summation up to a cutoff, then an Euler-Maclaurin remainder.
pub fn power_tail(s: f64, k: u64) -> f64 {
    assert!(s > 1.0 && k >= 1);
    const CUT: u64 = 32;
    let n0 = k.max(CUT);
    let mut head = 0.0;
    // small terms first
    for n in (k..n0).rev() {
        head += (n as f64).powf(-s);
    }
    let n = n0 as f64;
    let p = n.powf(-s);
    let mut rem = n.powf(1.0 - s) / (s - 1.0) + 0.5 * p;
    rem += s * p / n / 12.0;
    rem -= s * (s + 1.0) * (s + 2.0) * p / n.powi(3) / 720.0;
    rem += s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * p / n.powi(5) / 30240.0;
    rem -= s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * (s + 5.0) * (s + 6.0) * p / n.powi(7) / 1209600.0;
    head + rem
}

/// Riemann zeta for `s > 1`.
pub fn zeta(s: f64) -> f64 {
    power_tail(s, 1)
}

/// Pair couplings `J(0) = 0`, `J(1) = J + 1`, `J(n) = |n|^(alpha - 2)`,
/// memoized up to a window, together with the pure power-law tails
/// `tail(k) = sum_{n >= k} n^(alpha - 2)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    alpha: f64,
    j: f64,
    /// `couplings[n] = J(n)` for `0 <= n <= max_n`.
    couplings: Vec<f64>,
    /// `tails[k] = tail(k)` for `1 <= k <= max_n + 2`; index 0 unused.
    tails: Vec<f64>,
    /// `cum1[k] = sum_{d=1}^{k} J(d)`.
    cum1: Vec<f64>,
    /// `cum2[k] = sum_{d=1}^{k} cum1[d]`.
    cum2: Vec<f64>,
}

/// Kernel sized for the window of `params` (distances up to `2L + 1`).
pub fn build_kernel(params: &ModelParams) -> Result<Kernel> {
    params.check()?;
    Ok(Kernel::with_range(params.alpha, params.j, 2 * params.l + 2))
}

impl Kernel {
    /// Kernel memoized for distances `0..=max_n`. Callers are expected to have
    /// validated `alpha` and `j` through [`ModelParams`].
    pub fn with_range(alpha: f64, j: f64, max_n: usize) -> Self {
        let s = 2.0 - alpha;
        let max_n = max_n.max(2);
        let mut couplings = Vec::with_capacity(max_n + 1);
        couplings.push(0.0);
        couplings.push(j + 1.0);
        for n in 2..=max_n {
            couplings.push((n as f64).powf(-s));
        }
        let kmax = max_n + 2;
        let mut tails = vec![0.0; kmax + 1];
        tails[kmax] = power_tail(s, kmax as u64);
        for k in (1..kmax).rev() {
            tails[k] = tails[k + 1] + (k as f64).powf(-s);
        }
        let mut cum1 = vec![0.0; max_n + 1];
        let mut cum2 = vec![0.0; max_n + 1];
        for d in 1..=max_n {
            cum1[d] = cum1[d - 1] + couplings[d];
            cum2[d] = cum2[d - 1] + cum1[d];
        }
        Kernel { alpha, j, couplings, tails, cum1, cum2 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn j(&self) -> f64 {
        self.j
    }

    pub fn max_distance(&self) -> usize {
        self.couplings.len() - 1
    }

    /// `J(n)`, symmetric in `n`.
    #[inline]
    pub fn coupling(&self, n: i64) -> f64 {
        let n = n.unsigned_abs() as usize;
        match self.couplings.get(n) {
            Some(&v) => v,
            None => (n as f64).powf(self.alpha - 2.0),
        }
    }

    /// Memoized couplings `J(0..=max_distance)`.
    #[inline]
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// `sum_{n >= k} n^(alpha - 2)` (pure power law, `k >= 1`).
    pub fn tail(&self, k: u64) -> f64 {
        assert!(k >= 1, "tail index starts at 1");
        match self.tails.get(k as usize) {
            Some(&v) => v,
            None => power_tail(2.0 - self.alpha, k),
        }
    }

    /// `sum_{n >= k} J(n)`, which differs from [`Kernel::tail`] by `J` when `k = 1`.
    pub fn coupling_tail(&self, k: u64) -> f64 {
        if k <= 1 {
            self.tail(1) + self.j
        } else {
            self.tail(k)
        }
    }

    /// `zeta(2 - alpha)`.
    pub fn zeta(&self) -> f64 {
        self.tail(1)
    }

    /// Total coupling of one site to the rest of the line, `2J + 2 zeta(2 - alpha)`.
    pub fn total_coupling(&self) -> f64 {
        2.0 * self.coupling_tail(1)
    }

    /// `sum_{d=1}^{k} J(d)`.
    pub fn cumulative(&self, k: usize) -> f64 {
        match self.cum1.get(k) {
            Some(&v) => v,
            None => {
                let m = self.cum1.len() - 1;
                self.cum1[m] + ((m + 1)..=k).map(|d| self.coupling(d as i64)).sum::<f64>()
            }
        }
    }

    /// `sum_{d=1}^{k} sum_{e=1}^{d} J(e)`.
    pub fn cumulative2(&self, k: usize) -> f64 {
        match self.cum2.get(k) {
            Some(&v) => v,
            None => {
                let m = self.cum2.len() - 1;
                let (mut c1, mut c2) = (self.cum1[m], self.cum2[m]);
                for d in (m + 1)..=k {
                    c1 += self.coupling(d as i64);
                    c2 += c1;
                }
                c2
            }
        }
    }

    /// Couplings of site `i` to the `+` region outside `[-l, l]`.
    pub fn boundary_field(&self, l: usize, i: isize) -> f64 {
        let l = l as i64;
        let i = i as i64;
        self.coupling_tail((l + 1 - i) as u64) + self.coupling_tail((l + 1 + i) as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_tail(s: f64, k: u64) -> f64 {
        // direct summation to 10^6 plus the integral bound midpoint for the rest
        let cut = 1_000_000u64;
        let mut acc = 0.0;
        for n in (k..cut).rev() {
            acc += (n as f64).powf(-s);
        }
        let c = cut as f64;
        acc + c.powf(1.0 - s) / (s - 1.0) + 0.5 * c.powf(-s)
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
        assert!((zeta(1.7) - 2.054288756837750).abs() < 1e-12);
        assert!((zeta(1.9) - 1.749746435125060).abs() < 1e-12);
        assert!((zeta(1.5) - 2.612375348685488).abs() < 1e-12);
    }

    #[test]
    fn tail_matches_brute_force() {
        for &(s, k) in &[(1.7, 1u64), (1.7, 3), (1.5, 10), (1.9, 57)] {
            let b = brute_tail(s, k);
            assert!((power_tail(s, k) - b).abs() < 1e-11, "s={s} k={k}");
        }
    }

    #[test]
    fn kernel_values() {
        let k = Kernel::with_range(0.3, 10.0, 20);
        assert_eq!(k.coupling(0), 0.0);
        assert_eq!(k.coupling(1), 11.0);
        assert_eq!(k.coupling(-1), 11.0);
        assert!((k.coupling(3) - 3f64.powf(-1.7)).abs() < 1e-15);
        assert_eq!(k.coupling(-7), k.coupling(7));
        assert!((k.tail(1) - 2.0543).abs() < 1e-4);
        for t in 1..30 {
            assert!(k.tail(t) > k.tail(t + 1));
        }
        // memo and direct evaluation agree past the window
        assert!((k.coupling(50) - 50f64.powf(-1.7)).abs() < 1e-18);
        assert!((k.tail(40) - power_tail(1.7, 40)).abs() < 1e-13);
    }

    #[test]
    fn cumulative_sums() {
        let k = Kernel::with_range(0.3, 5.0, 30);
        let direct: f64 = (1..=12).map(|d| k.coupling(d)).sum();
        assert!((k.cumulative(12) - direct).abs() < 1e-12);
        let direct2: f64 = (1..=12).map(|d| (1..=d).map(|e| k.coupling(e)).sum::<f64>()).sum();
        assert!((k.cumulative2(12) - direct2).abs() < 1e-12);
        assert!((k.cumulative2(100) - (1..=100).map(|d| k.cumulative(d)).sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn boundary_field_of_edge_site() {
        let k = Kernel::with_range(0.3, 10.0, 10);
        // site L sees L+1 at distance 1
        let b = k.boundary_field(2, 2);
        assert!((b - (11.0 + k.tail(2) + k.tail(5))).abs() < 1e-12);
        let b0 = k.boundary_field(2, 0);
        assert!((b0 - 2.0 * k.tail(3)).abs() < 1e-12);
    }
}
