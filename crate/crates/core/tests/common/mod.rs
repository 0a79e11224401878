//! Brute-force reference for small windows, written without the library's kernel or enumerator.

#![allow(dead_code)]

pub struct Brute {
    pub l: usize,
    /// `J(n)` for `n < 2l + 1`
    pub j: Vec<f64>,
    /// couplings of each site to the plus region outside the window
    pub h: Vec<f64>,
}

/// `sum_{n >= k} n^(alpha - 2)` by direct summation to 2^21 and the integral of the rest.
fn tail(s: f64, k: usize) -> f64 {
    const N: usize = 1 << 21;
    let mut acc = 0.0;
    for n in (k..N).rev() {
        acc += (n as f64).powf(-s);
    }
    let n = N as f64;
    acc + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
}

impl Brute {
    pub fn new(alpha: f64, big_j: f64, l: usize) -> Self {
        let s = 2.0 - alpha;
        let n = 2 * l + 1;
        let mut j: Vec<f64> = (0..n).map(|d| if d == 0 { 0.0 } else { (d as f64).powf(-s) }).collect();
        if n > 1 {
            j[1] += big_j;
        }
        let far = tail(s, n + 1);
        // t[k] = sum_{d >= k} J(d), k = 1..=n
        let mut t = vec![0.0; n + 2];
        t[n + 1] = far;
        for k in (1..=n).rev() {
            t[k] = t[k + 1] + (k as f64).powf(-s);
        }
        t[1] += big_j;
        let h = (0..n).map(|x| t[x + 1] + t[n - x]).collect();
        Brute { l, j, h }
    }

    pub fn n(&self) -> usize {
        2 * self.l + 1
    }

    pub fn spins(&self, code: u32) -> Vec<i8> {
        (0..self.n()).map(|k| if code >> k & 1 == 1 { -1 } else { 1 }).collect()
    }

    pub fn energy(&self, s: &[i8]) -> f64 {
        let mut e = 0.0;
        for a in 0..s.len() {
            if s[a] < 0 {
                e += self.h[a];
            }
            for b in a + 1..s.len() {
                if s[a] != s[b] {
                    e += self.j[b - a];
                }
            }
        }
        e
    }

    /// Normalized Gibbs weights over all `2^n` configurations, restricted to `keep`.
    pub fn weights(&self, beta: f64, keep: impl Fn(&[i8]) -> bool) -> (f64, Vec<(Vec<i8>, f64)>) {
        let all: Vec<(Vec<i8>, f64)> = (0..1u32 << self.n())
            .map(|c| self.spins(c))
            .filter(|s| keep(s))
            .map(|s| {
                let e = self.energy(&s);
                (s, -beta * e)
            })
            .collect();
        // log-sum-exp with the largest term split off, so that log Z near 0 keeps its digits
        let (arg, top) =
            all.iter()
                .enumerate()
                .map(|(k, x)| (k, x.1))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let rest: f64 = all.iter().enumerate().filter(|&(k, _)| k != arg).map(|(_, x)| (x.1 - top).exp()).sum();
        let log_z = top + rest.ln_1p();
        (log_z, all.into_iter().map(|(s, w)| (s, (w - log_z).exp())).collect())
    }
}

pub fn sum(s: &[i8]) -> i64 {
    s.iter().map(|&x| x as i64).sum()
}

pub fn histogram(n: usize, w: &[(Vec<i8>, f64)]) -> Vec<f64> {
    let mut h = vec![0.0; n + 1];
    for (s, p) in w {
        h[((sum(s) + n as i64) / 2) as usize] += p;
    }
    h
}

pub fn corr(i: usize, w: &[(Vec<i8>, f64)]) -> Vec<f64> {
    let n = w[0].0.len();
    (0..n).map(|j| w.iter().map(|(s, p)| (s[i] * s[j]) as f64 * p).sum()).collect()
}
