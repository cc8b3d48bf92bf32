//! Seeded sampling of analytic test data.
//!
//! All randomness flows through `SplitMix64` (64-bit state, splitmix
//! finalizer), so a seed pins every generated coefficient on every platform.
//! Per-item streams come from [`derive_seed`], which keeps parallel batches
//! independent of scheduling order.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::scale::{ScaleIndex, ScaledSeries, SeriesKind};

pub fn seeded(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Seed of the `index`-th independent stream under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut mix = SplitMix64::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    mix.next_u64()
}

/// Random series with `|c_m| <= decay^|m|`. Taylor series start at degree
/// `first_degree` (use 1 for germs vanishing at the origin).
pub fn random_series(rng: &mut impl Rng, kind: SeriesKind, order: usize, decay: f64, first_degree: usize) -> ScaledSeries {
    let mut x = ScaledSeries::zeros(kind, order);
    for m in x.indices().collect::<Vec<_>>() {
        if kind == SeriesKind::Taylor && (m as usize) < first_degree {
            continue;
        }
        let r = decay.powi(m.unsigned_abs() as i32);
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = rng.random_range(-1.0..1.0);
        x.set(m, Complex64::new(re, im) * (r / std::f64::consts::SQRT_2));
    }
    x
}

/// `x` rescaled so that `|x|_s = target`. Zero stays zero.
pub fn rescale_to(x: &ScaledSeries, target: f64, s: ScaleIndex) -> ScaledSeries {
    let n = x.norm(s);
    if n == 0.0 {
        return x.clone();
    }
    x.scale_real(target / n)
}
