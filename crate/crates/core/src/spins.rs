//! Spin configurations on `[-L, L]` with `+` boundary and cached local fields.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Spins on `Lambda = [-L, L]` with all sites outside fixed to `+1`.
///
/// `fields[k]` caches `sum_{j != i} J(i-j) s_j + b_i` where `b_i` is the coupling
/// of site `i` to the plus region outside the window, so that flipping site `i`
/// costs `s_i * fields[k]`.
#[derive(Clone)]
pub struct SpinConfig {
    l: usize,
    kernel: Arc<Kernel>,
    spins: Vec<i8>,
    fields: Vec<f64>,
    energy: f64,
}

impl fmt::Debug for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpinConfig")
            .field("l", &self.l)
            .field("spins", &self.to_line())
            .field("energy", &self.energy)
            .finish()
    }
}

impl PartialEq for SpinConfig {
    fn eq(&self, other: &Self) -> bool {
        self.l == other.l && self.spins == other.spins
    }
}

impl Eq for SpinConfig {}

fn check_kernel(kernel: &Kernel, l: usize) -> Result<()> {
    if kernel.max_distance() < 2 * l {
        return Err(Error::InvalidParameter {
            name: "kernel",
            reason: format!("memoized range {} shorter than 2L = {}", kernel.max_distance(), 2 * l),
        });
    }
    Ok(())
}

/// Boundary fields `b_i` for every site of the window, left to right.
pub fn boundary_fields(kernel: &Kernel, l: usize) -> Vec<f64> {
    let li = l as isize;
    (-li..=li).map(|i| kernel.boundary_field(l, i)).collect()
}

/// Energy of a spin sequence computed from scratch by the double sum.
pub fn hamiltonian(spins: &[i8], kernel: &Kernel) -> f64 {
    let n = spins.len();
    assert!(n % 2 == 1, "window length must be odd");
    let l = n / 2;
    let mut pair = 0.0;
    for a in 0..n {
        if spins[a] > 0 {
            continue;
        }
        // each disagreeing pair is counted once, from its minus end
        for b in 0..n {
            if b != a && spins[b] > 0 {
                pair += kernel.coupling(a as i64 - b as i64);
            }
        }
    }
    let mut bnd = 0.0;
    for (k, &s) in spins.iter().enumerate() {
        if s < 0 {
            bnd += kernel.boundary_field(l, k as isize - l as isize);
        }
    }
    pair + bnd
}

/// The double-sum part of the energy only, symmetric under a global flip.
pub fn bulk_energy(spins: &[i8], kernel: &Kernel) -> f64 {
    let n = spins.len();
    let mut e = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            if spins[a] != spins[b] {
                e += kernel.coupling(a as i64 - b as i64);
            }
        }
    }
    e
}

/// Parse a line of `+`/`-` characters; surrounding whitespace is ignored.
pub fn parse_spin_line(line: &str) -> Result<Vec<i8>> {
    line.trim()
        .chars()
        .map(|c| match c {
            '+' => Ok(1),
            '-' => Ok(-1),
            other => Err(Error::BadSpinChar(other)),
        })
        .collect()
}

pub fn format_spins(spins: &[i8]) -> String {
    spins.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
}

impl SpinConfig {
    /// All-plus configuration. The kernel must cover distances up to `2L`.
    pub fn all_plus(l: usize, kernel: Arc<Kernel>) -> Result<Self> {
        check_kernel(&kernel, l)?;
        let n = 2 * l + 1;
        let total = kernel.total_coupling();
        Ok(SpinConfig { l, spins: vec![1; n], fields: vec![total; n], energy: 0.0, kernel })
    }

    pub fn from_spins(spins: Vec<i8>, kernel: Arc<Kernel>) -> Result<Self> {
        if spins.len() % 2 == 0 {
            return Err(Error::LengthMismatch { got: spins.len(), expected: spins.len() + 1 });
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter { name: "spins", reason: "values must be +1 or -1".into() });
        }
        let l = spins.len() / 2;
        check_kernel(&kernel, l)?;
        let fields = Self::compute_fields(&spins, &kernel);
        let energy = hamiltonian(&spins, &kernel);
        Ok(SpinConfig { l, spins, fields, energy, kernel })
    }

    /// Configuration equal to `-1` on the listed sites (in `[-L, L]`), `+1` elsewhere.
    pub fn from_minus_sites(l: usize, sites: &[isize], kernel: Arc<Kernel>) -> Result<Self> {
        let mut s = vec![1i8; 2 * l + 1];
        for &x in sites {
            if x.unsigned_abs() > l {
                return Err(Error::SiteOutOfRange { site: x, l });
            }
            s[(x + l as isize) as usize] = -1;
        }
        Self::from_spins(s, kernel)
    }

    pub fn parse(line: &str, kernel: Arc<Kernel>) -> Result<Self> {
        Self::from_spins(parse_spin_line(line)?, kernel)
    }

    fn compute_fields(spins: &[i8], kernel: &Kernel) -> Vec<f64> {
        let n = spins.len();
        let l = n / 2;
        let mut f = boundary_fields(kernel, l);
        for a in 0..n {
            let mut acc = 0.0;
            for b in 0..n {
                if b != a {
                    acc += kernel.coupling(a as i64 - b as i64) * spins[b] as f64;
                }
            }
            f[a] += acc;
        }
        f
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn kernel(&self) -> &Arc<Kernel> {
        &self.kernel
    }

    /// Spins left to right, index 0 is site `-L`.
    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    /// Cached energy.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    fn index(&self, site: isize) -> Result<usize> {
        if site.unsigned_abs() > self.l {
            return Err(Error::SiteOutOfRange { site, l: self.l });
        }
        Ok((site + self.l as isize) as usize)
    }

    pub fn get(&self, site: isize) -> Result<i8> {
        Ok(self.spins[self.index(site)?])
    }

    /// Spin at array index `k` (site `k - L`).
    #[inline]
    pub fn at(&self, k: usize) -> i8 {
        self.spins[k]
    }

    pub fn to_line(&self) -> String {
        format_spins(&self.spins)
    }

    /// Energy change of flipping `site`.
    pub fn flip_delta(&self, site: isize) -> Result<f64> {
        Ok(self.delta_at(self.index(site)?))
    }

    /// Energy change of flipping array index `k`; O(1).
    #[inline]
    pub fn delta_at(&self, k: usize) -> f64 {
        self.spins[k] as f64 * self.fields[k]
    }

    /// Energy change of flipping the two distinct indices `a` and `b` together.
    #[inline]
    pub fn pair_delta_at(&self, a: usize, b: usize) -> f64 {
        let sa = self.spins[a] as f64;
        let sb = self.spins[b] as f64;
        sa * self.fields[a] + sb * self.fields[b] - 2.0 * self.kernel.coupling(a as i64 - b as i64) * sa * sb
    }

    /// Flip `site`, update every cached field, and return the energy change.
    pub fn flip(&mut self, site: isize) -> Result<f64> {
        let k = self.index(site)?;
        Ok(self.flip_at(k))
    }

    /// Flip array index `k`; O(|Lambda|).
    pub fn flip_at(&mut self, k: usize) -> f64 {
        let d = self.delta_at(k);
        let s_new = -self.spins[k];
        self.spins[k] = s_new;
        self.energy += d;
        let c = 2.0 * s_new as f64;
        let cp = self.kernel.couplings();
        let (left, rest) = self.fields.split_at_mut(k);
        // left[k - 1 - t] is at distance t + 1
        for (t, f) in left.iter_mut().rev().enumerate() {
            *f += c * cp[t + 1];
        }
        for (t, f) in rest[1..].iter_mut().enumerate() {
            *f += c * cp[t + 1];
        }
        d
    }

    /// Recompute fields and energy from scratch.
    pub fn refresh(&mut self) {
        self.fields = Self::compute_fields(&self.spins, &self.kernel);
        self.energy = hamiltonian(&self.spins, &self.kernel);
    }

    /// Relative deviation of the cached energy and fields from a fresh computation.
    pub fn cache_drift(&self) -> f64 {
        let e = hamiltonian(&self.spins, &self.kernel);
        let scale = e.abs().max(1.0);
        let mut worst = (self.energy - e).abs() / scale;
        let f = Self::compute_fields(&self.spins, &self.kernel);
        for (a, b) in self.fields.iter().zip(&f) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
        worst
    }

    /// Sum of spins.
    pub fn total_spin(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }

    pub fn empirical_magnetization(&self) -> f64 {
        empirical_magnetization(&self.spins)
    }

    /// Maximal runs of `-1` as inclusive site intervals, left to right.
    pub fn minus_intervals(&self) -> Vec<(isize, isize)> {
        let l = self.l as isize;
        let mut out = Vec::new();
        let mut start: Option<isize> = None;
        for (k, &s) in self.spins.iter().enumerate() {
            let x = k as isize - l;
            match (s < 0, start) {
                (true, None) => start = Some(x),
                (false, Some(a)) => {
                    out.push((a, x - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(a) = start {
            out.push((a, l));
        }
        out
    }
}

/// `(1/|Lambda|) sum_i s_i`.
pub fn empirical_magnetization(spins: &[i8]) -> f64 {
    spins.iter().map(|&s| s as i64).sum::<i64>() as f64 / spins.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kern(l: usize) -> Arc<Kernel> {
        Arc::new(Kernel::with_range(0.3, 10.0, 2 * l + 2))
    }

    #[test]
    fn all_plus_has_zero_energy() {
        for l in 1..6 {
            let s = SpinConfig::all_plus(l, kern(l)).unwrap();
            assert_eq!(s.energy(), 0.0);
            assert_eq!(hamiltonian(s.spins(), s.kernel()), 0.0);
            assert!(s.cache_drift() < 1e-12);
        }
    }

    #[test]
    fn single_minus_at_origin() {
        let k = kern(2);
        let s = SpinConfig::from_minus_sites(2, &[0], k.clone()).unwrap();
        let expect = 2.0 * 11.0 + 2.0 * 2f64.powf(-1.7) + 2.0 * k.tail(3);
        assert!((s.energy() - expect).abs() < 1e-12);
        // equals the infinite-volume unit triangle energy
        assert!((s.energy() - (20.0 + 2.0 * k.zeta())).abs() < 1e-12);
    }

    #[test]
    fn flip_delta_matches_energy_difference() {
        let k = kern(2);
        let mut s = SpinConfig::all_plus(2, k.clone()).unwrap();
        let d = s.flip_delta(0).unwrap();
        let single = SpinConfig::from_minus_sites(2, &[0], k).unwrap();
        assert!((d - single.energy()).abs() < 1e-12);
        let d1 = s.flip(0).unwrap();
        let d2 = s.flip(0).unwrap();
        assert!((d1 + d2).abs() < 1e-12);
        assert!((d2 + single.energy()).abs() < 1e-12);
        assert!(s.flip(3).is_err());
    }

    #[test]
    fn pair_delta_matches_two_flips() {
        let k = kern(4);
        let mut s = SpinConfig::parse("+--+-+++-", k).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                if a == b {
                    continue;
                }
                let pd = s.pair_delta_at(a, b);
                let e0 = s.energy();
                s.flip_at(a);
                s.flip_at(b);
                assert!((s.energy() - e0 - pd).abs() < 1e-10);
                s.flip_at(b);
                s.flip_at(a);
            }
        }
    }

    #[test]
    fn magnetization_examples() {
        let k = kern(2);
        assert_eq!(SpinConfig::parse("+++++", k.clone()).unwrap().empirical_magnetization(), 1.0);
        assert!((SpinConfig::parse("+-+-+", k.clone()).unwrap().empirical_magnetization() - 0.2).abs() < 1e-15);
        assert_eq!(SpinConfig::parse("-----", k).unwrap().empirical_magnetization(), -1.0);
    }

    #[test]
    fn parse_rejects_garbage() {
        let k = kern(2);
        assert_eq!(SpinConfig::parse("++x++", k.clone()).unwrap_err(), Error::BadSpinChar('x'));
        assert!(SpinConfig::parse("++++", k).is_err());
    }

    #[test]
    fn minus_intervals_listing() {
        let k = kern(4);
        let s = SpinConfig::parse("--++-+---", k).unwrap();
        assert_eq!(s.minus_intervals(), vec![(-4, -3), (0, 0), (2, 4)]);
    }
}
