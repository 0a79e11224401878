//! Inputs shared by the benchmarks in `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent fair spins on `2l + 1` sites.
pub fn random_spins(l: usize, seed: u64) -> Vec<i8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2 * l + 1).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
}

/// A few minus blocks in a plus sea, closer to low-temperature configurations.
pub fn sparse_spins(l: usize, blocks: usize, seed: u64) -> Vec<i8> {
    let n = 2 * l + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = vec![1i8; n];
    for _ in 0..blocks {
        let len = rng.gen_range(1..=n / (4 * blocks).max(1) + 1);
        let at = rng.gen_range(0..n - len);
        s[at..at + len].iter_mut().for_each(|x| *x = -1);
    }
    s
}
