//! Deterministic pseudo-random streams and the seed-derivation scheme.
//!
//! Every stochastic step in the library draws from a [`RandomStream`], a
//! SplitMix64 generator. All randomness for one training job flows from a
//! single master seed through [`child_seed`] and [`partition_seed`], so a
//! run is reproducible bit for bit from its configuration alone.
//!
//! Draw-order contract (relied on by the file-format and replay tests):
//! uniform doubles take the top 53 bits of each 64-bit output; standard
//! normals are produced in Box-Muller pairs, each pair consuming exactly two
//! uniforms, and an odd request discards the second member of the final
//! pair; matrices are filled row-major.

use crate::error::{Error, Result};
use ndarray::Array2;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

/// Domain tag folded into fold/run child seeds.
const CHILD_DOMAIN: u64 = 0xC2B2_AE3D_27D4_EB4F;
/// Domain tag folded into the fold-partition seed, keeping the shuffle
/// stream disjoint from every per-job stream.
const PARTITION_DOMAIN: u64 = 0xA55A_5A5A_F0F0_0F0F;

/// SplitMix64 output finalizer, also used on its own as a 64-bit mixer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// Derives the seed for the stream owned by one (fold, run) job.
///
/// Injective in `(fold, run)` for a fixed master seed: the pair is packed
/// into disjoint bit ranges and the surrounding maps are bijections on u64.
pub fn child_seed(master: u64, fold: u16, run: u16) -> u64 {
    let packed = ((fold as u64) << 16) | run as u64;
    mix64(mix64(master) ^ CHILD_DOMAIN ^ packed)
}

/// Derives the seed for the fold-assignment shuffle stream.
pub fn partition_seed(master: u64) -> u64 {
    mix64(mix64(master) ^ PARTITION_DOMAIN)
}

/// Parameters of a Half-Cauchy distribution.
///
/// Sampling uses the inverse CDF `location + scale * tan(pi * u / 2)` on a
/// uniform `u` in (0, 1); the support is `[location, +inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfCauchyParams {
    pub location: f64,
    pub scale: f64,
}

impl Default for HalfCauchyParams {
    fn default() -> Self {
        Self {
            location: 0.0,
            scale: 1.0,
        }
    }
}

#[inline]
fn half_cauchy_value(u: f64, params: &HalfCauchyParams) -> f64 {
    params.location + params.scale * (std::f64::consts::FRAC_PI_2 * u).tan()
}

/// A deterministic SplitMix64 stream that remembers the seed it grew from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    state: u64,
    origin: u64,
}

/// Creates a stream positioned at the start of the sequence for `seed`.
pub fn seeded_stream(seed: u64) -> RandomStream {
    RandomStream::new(seed)
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            origin: seed,
        }
    }

    /// The seed this stream started from.
    pub fn origin(&self) -> u64 {
        self.origin
    }

    /// Rewinds the stream to its origin; subsequent draws replay exactly.
    pub fn reset(&mut self) {
        self.state = self.origin;
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in the open interval `(0, 1)`.
    ///
    /// Rejects the single representable zero, so it may in principle consume
    /// more than one 64-bit output; the rejection probability is 2^-53.
    #[inline]
    pub fn next_open_unit(&mut self) -> f64 {
        loop {
            let u = self.next_f64();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// One Box-Muller pair of independent standard normals.
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_open_unit();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        (radius * angle.cos(), radius * angle.sin())
    }

    /// `n` standard normal draws; an odd `n` discards the second member of
    /// the final Box-Muller pair.
    pub fn standard_normals(&mut self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        while out.len() + 2 <= n {
            let (a, b) = self.standard_normal_pair();
            out.push(a);
            out.push(b);
        }
        if out.len() < n {
            let (a, _) = self.standard_normal_pair();
            out.push(a);
        }
        out
    }

    /// `rows x cols` matrix of standard normals, filled row-major.
    pub fn standard_normal_matrix(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        let data = self.standard_normals(rows * cols);
        Array2::from_shape_vec((rows, cols), data)
            .expect("length rows*cols matches the requested shape")
    }

    /// `n` Half-Cauchy draws; every output is strictly above `location`.
    pub fn half_cauchy(&mut self, params: &HalfCauchyParams, n: usize) -> Result<Vec<f64>> {
        if params.scale.is_nan() || params.scale <= 0.0 {
            return Err(Error::InvalidArgument {
                name: "HalfCauchyParams.scale",
                reason: format!("must be positive, got {}", params.scale),
            });
        }
        Ok((0..n)
            .map(|_| half_cauchy_value(self.next_open_unit(), params))
            .collect())
    }

    /// Fisher-Yates shuffle of `items`, consuming one bounded draw per swap.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.bounded(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Uniform draw in `[0, bound)` by rejection, avoiding modulo bias.
    fn bounded(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % bound;
            }
        }
    }
}

/// `n` standard normal draws from `stream`.
pub fn sample_standard_normal(stream: &mut RandomStream, n: usize) -> Vec<f64> {
    stream.standard_normals(n)
}

/// `n` Half-Cauchy draws from `stream`.
pub fn sample_half_cauchy(
    stream: &mut RandomStream,
    params: &HalfCauchyParams,
    n: usize,
) -> Result<Vec<f64>> {
    stream.half_cauchy(params, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::HashSet;

    #[test]
    fn matches_splitmix64_reference_vectors() {
        let mut s = seeded_stream(0);
        assert_eq!(s.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(s.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(s.next_u64(), 0x06C4_5D18_8009_454F);

        let mut s1 = seeded_stream(1);
        assert_eq!(s1.next_u64(), 0x910A_2DEC_8902_5CC1);
    }

    #[test]
    fn different_seeds_diverge_immediately() {
        let a = seeded_stream(0).next_u64();
        let b = seeded_stream(1).next_u64();
        assert_ne!(a, b);
    }

    #[test]
    fn reset_replays_the_sequence() {
        let mut s = seeded_stream(42);
        let first: Vec<u64> = (0..100).map(|_| s.next_u64()).collect();
        s.reset();
        let second: Vec<u64> = (0..100).map(|_| s.next_u64()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn uniform_draws_stay_in_the_half_open_unit_interval() {
        let mut s = seeded_stream(7);
        for _ in 0..10_000 {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u), "{u} outside [0, 1)");
        }
    }

    #[test]
    fn child_seeds_are_distinct_across_folds_runs_and_masters() {
        let mut seen = HashSet::new();
        for master in [0u64, 1, 42, u64::MAX] {
            for fold in 0..8u16 {
                for run in 0..8u16 {
                    assert!(
                        seen.insert(child_seed(master, fold, run)),
                        "collision at master={master} fold={fold} run={run}"
                    );
                }
            }
            assert!(seen.insert(partition_seed(master)));
        }
    }

    #[test]
    fn derived_streams_have_distinct_first_outputs() {
        let mut firsts = HashSet::new();
        for fold in 0..4u16 {
            for run in 0..4u16 {
                let mut s = seeded_stream(child_seed(42, fold, run));
                assert!(firsts.insert(s.next_u64()));
            }
        }
    }

    #[test]
    fn seed_derivation_matches_frozen_references() {
        assert_eq!(child_seed(0, 0, 0), 0x6885_0AC7_4E2E_5A26);
        assert_eq!(child_seed(42, 0, 0), 0x9F08_8071_9C6A_F22F);
        assert_eq!(child_seed(42, 1, 2), 0x5EAC_5B16_4A8E_3F39);
        assert_eq!(child_seed(42, 2, 1), 0xF0CB_962C_B5EC_DBF9);
        assert_eq!(partition_seed(42), 0xFFBD_ADCF_6B8A_3528);
    }

    #[test]
    fn normal_moments_match_the_standard_distribution() {
        let mut s = seeded_stream(2024);
        let n = 100_000;
        let draws = s.standard_normals(n);
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn odd_normal_requests_discard_the_pair_remainder() {
        let mut a = seeded_stream(5);
        let mut b = seeded_stream(5);
        let five = a.standard_normals(5);
        let six = b.standard_normals(6);
        assert_eq!(five.as_slice(), &six[..5]);
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn half_cauchy_quantile_transform_hits_known_points() {
        let params = HalfCauchyParams::default();
        assert_relative_eq!(
            half_cauchy_value(0.75, &params),
            1.0 + 2f64.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(half_cauchy_value(0.5, &params), 1.0, max_relative = 1e-12);
        let shifted = HalfCauchyParams {
            location: 3.0,
            scale: 2.0,
        };
        assert_relative_eq!(half_cauchy_value(0.5, &shifted), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn half_cauchy_draws_are_strictly_positive() {
        let mut s = seeded_stream(11);
        let draws = s
            .half_cauchy(&HalfCauchyParams::default(), 100_000)
            .unwrap();
        assert!(draws.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn half_cauchy_median_sits_at_the_scale() {
        let mut s = seeded_stream(13);
        let draws = s
            .half_cauchy(&HalfCauchyParams::default(), 100_000)
            .unwrap();
        let below_one = draws.iter().filter(|&&x| x <= 1.0).count() as f64;
        let ecdf = below_one / draws.len() as f64;
        assert!((0.49..=0.51).contains(&ecdf), "ECDF at 1.0 was {ecdf}");
    }

    #[test]
    fn half_cauchy_rejects_nonpositive_scale() {
        let mut s = seeded_stream(1);
        let bad = HalfCauchyParams {
            location: 0.0,
            scale: 0.0,
        };
        assert!(s.half_cauchy(&bad, 1).is_err());
    }

    #[test]
    fn matrix_fill_is_row_major() {
        let mut a = seeded_stream(9);
        let mut b = seeded_stream(9);
        let m = a.standard_normal_matrix(3, 4);
        let flat = b.standard_normals(12);
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(m[[r, c]], flat[r * 4 + c]);
            }
        }
    }

    #[test]
    fn shuffle_is_a_permutation_and_replays_under_reset() {
        let mut s = seeded_stream(123);
        let mut items: Vec<usize> = (0..50).collect();
        s.shuffle(&mut items);
        let mut sorted = items.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());

        s.reset();
        let mut again: Vec<usize> = (0..50).collect();
        s.shuffle(&mut again);
        assert_eq!(items, again);
    }
}
