//! Deterministic reductions, seeded randomness and log-space helpers.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Fixed partition width for parallel sums. Partition boundaries never
/// depend on the worker count, so results are bit-identical across pools.
pub const CHUNK: usize = 1024;

/// `Σ_{i<len} f(i)`, summed in fixed-size chunks in parallel and then
/// reduced left to right in chunk order.
pub fn ordered_par_sum<F>(len: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let partials: Vec<Complex64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            (lo..hi).fold(Complex64::new(0.0, 0.0), |acc, i| acc + f(i))
        })
        .collect();
    partials
        .into_iter()
        .fold(Complex64::new(0.0, 0.0), |acc, v| acc + v)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `z^k` by binary powering.
pub fn cpow(z: Complex64, mut k: u32) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut b = z;
    while k > 0 {
        if k & 1 == 1 {
            acc *= b;
        }
        b *= b;
        k >>= 1;
    }
    acc
}

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Natural log of the largest bound still compared in linear space.
pub const LINEAR_COMPARE_LN: f64 = 690.775_527_898_213_7; // ln(1e300)

/// `value ≤ e^{ln_bound}` with a relative slack, switching to logarithms
/// when the bound is beyond 1e300.
pub fn within_bound(value: f64, ln_bound: f64, rel_slack: f64) -> bool {
    if ln_bound <= LINEAR_COMPARE_LN {
        value <= ln_bound.exp() * (1.0 + rel_slack)
    } else {
        value <= 0.0 || value.ln() <= ln_bound + rel_slack.ln_1p()
    }
}
