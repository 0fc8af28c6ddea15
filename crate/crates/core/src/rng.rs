//! Seed derivation and samplers.
//!
//! Every stochastic routine takes an explicit `u64` seed. Independent streams
//! are derived by hashing the seed together with integer tags, so a draw for
//! entry `k` never depends on how many draws other entries made.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SntdRng = ChaCha8Rng;

/// Purpose tags mixed into derived seeds.
pub mod tag {
    pub const MASK: u64 = 0x6d61_736b;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const CORE: u64 = 0x636f_7265;
    pub const FACTOR: u64 = 0x6661_6374;
    pub const SUPPORT: u64 = 0x7370_7274;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a base seed with a sequence of tags into a child seed.
pub fn hash64(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |h, &p| splitmix64(h ^ splitmix64(p)))
}

pub fn rng_from(seed: u64) -> SntdRng {
    SntdRng::seed_from_u64(seed)
}

/// Generator dedicated to one tensor entry.
pub fn entry_rng(seed: u64, purpose: u64, index: usize) -> SntdRng {
    rng_from(hash64(seed, &[purpose, index as u64]))
}

/// Uniform draw in `[0, 1)` that is a pure function of `(seed, purpose, index)`.
pub fn entry_uniform(seed: u64, purpose: u64, index: usize) -> f64 {
    let h = hash64(seed, &[purpose, index as u64]);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Zero-mean Laplace draw with scale `b` by inversion.
pub fn laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    // u in (-1/2, 1/2)
    let u: f64 = loop {
        let u = rng.random::<f64>() - 0.5;
        if u != -0.5 {
            break u;
        }
    };
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Poisson draw: sequential inversion below rate 30, Hörmann's PTRS
/// transformed rejection above.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u64 {
    debug_assert!(rate > 0.0 && rate.is_finite());
    if rate < 30.0 {
        poisson_inversion(rng, rate)
    } else {
        poisson_ptrs(rng, rate)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-rate).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= rate / k as f64;
        cdf += p;
        // numerical tail: cdf may saturate below 1
        if p < f64::MIN_POSITIVE && cdf < u {
            break;
        }
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u64 {
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = (v * inv_alpha / (a / (us * us) + b)).ln();
        let rhs = -rate + k * loglam - ln_factorial(k);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `ln(k!)` via Stirling's series (exact table for small `k`).
fn ln_factorial(k: f64) -> f64 {
    if k < 10.0 {
        let mut acc = 0.0;
        let mut i = 2.0;
        while i <= k {
            acc += f64::ln(i);
            i += 1.0;
        }
        return acc;
    }
    let n = k + 1.0;
    (n - 0.5) * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * n) - 1.0 / (360.0 * n * n * n)
        + 1.0 / (1260.0 * n.powi(5))
}
