//! Seeded randomness shared by probes and Monte Carlo runs.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; spreads nearby integers over the full range.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of `stream`, derived from a master seed. Independent
/// of how work is split across threads.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(master ^ mix(stream)).wrapping_add(index))
}

pub fn rng_for(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}

/// Uniform sample from the probability simplex of dimension `x`.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, x: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..x)
        .map(|_| {
            let u: f64 = rng.random();
            -(1.0 - u).ln()
        })
        .collect();
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|e| *e /= sum);
    v
}

/// Random row-stochastic matrix with rows drawn uniformly from the simplex.
pub fn sample_stochastic<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let row = sample_simplex(rng, cols);
        for c in 0..cols {
            m[(r, c)] = row[c];
        }
    }
    m
}

/// Index drawn from a discrete distribution by inverse CDF on `u ∈ [0,1)`.
pub fn inverse_cdf<'a>(probs: impl IntoIterator<Item = &'a f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}
