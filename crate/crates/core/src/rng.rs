//! Counter-based random streams.
//!
//! Every random number in the crate is a pure function of a [`StreamKey`]:
//! the experiment seed and stream id form the 128-bit Philox key and the
//! counter is the low word of the 256-bit Philox counter. Replaying a
//! simulation, running it on a different number of workers, or running it at
//! a perturbed parameter with the same keys reproduces the same underlying
//! uniforms. Samplers consume a fixed number of uniforms per call so that the
//! draw layout never depends on the values drawn.

use std::f64::consts::PI;

const PHILOX_M0: u64 = 0xD2E7_470E_E14C_6C93;
const PHILOX_M1: u64 = 0xCA5A_8263_9512_1157;
const PHILOX_W0: u64 = 0x9E37_79B9_7F4A_7C15;
const PHILOX_W1: u64 = 0xBB67_AE85_84CA_A73B;
const PHILOX_ROUNDS: usize = 10;

#[inline(always)]
fn mulhilo(a: u64, b: u64) -> (u64, u64) {
    let p = (a as u128) * (b as u128);
    ((p >> 64) as u64, p as u64)
}

/// Philox4x64-10 block function.
#[inline]
pub fn philox4x64(counter: [u64; 4], key: [u64; 2]) -> [u64; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..PHILOX_ROUNDS {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// What a stream is used for. Occupies the top 16 bits of a stream id so that
/// per-particle or per-step indices never collide across purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum Purpose {
    Generic = 0,
    RteInitial = 1,
    RteScatter = 2,
    DsmcInitial = 3,
    DsmcPairs = 4,
    DsmcCollide = 5,
    Estimator = 6,
    FiniteDifference = 7,
    Repeat = 8,
}

const INDEX_BITS: u32 = 48;
const INDEX_MASK: u64 = (1 << INDEX_BITS) - 1;

/// Address of one random block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StreamKey {
    pub experiment_seed: u64,
    pub stream_id: u64,
    pub counter: u64,
}

impl StreamKey {
    pub const fn new(experiment_seed: u64, stream_id: u64, counter: u64) -> Self {
        Self { experiment_seed, stream_id, counter }
    }

    /// Key for `index` within the stream family reserved for `purpose`.
    pub fn for_purpose(experiment_seed: u64, purpose: Purpose, index: u64, counter: u64) -> Self {
        debug_assert!(index <= INDEX_MASK, "stream index exceeds 48 bits");
        let stream_id = ((purpose as u64) << INDEX_BITS) | (index & INDEX_MASK);
        Self::new(experiment_seed, stream_id, counter)
    }

    pub fn with_counter(self, counter: u64) -> Self {
        Self { counter, ..self }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    /// Same stream, counter advanced by `n`.
    pub fn advance(self, n: u64) -> Self {
        self.with_counter(self.counter.wrapping_add(n))
    }

    /// Four raw 64-bit words addressed by this key.
    #[inline]
    pub fn block(&self) -> [u64; 4] {
        philox4x64([self.counter, 0, 0, 0], [self.experiment_seed, self.stream_id])
    }

    /// Four uniforms in `[0, 1)` addressed by this key.
    #[inline]
    pub fn uniforms(&self) -> [f64; 4] {
        self.block().map(bits_to_unit)
    }
}

/// Seed of an independent repeat of an experiment.
pub fn derive_seed(experiment_seed: u64, repeat: u64) -> u64 {
    StreamKey::for_purpose(experiment_seed, Purpose::Repeat, 0, repeat).block()[0]
}

/// Maps the top 53 bits of a word to `[0, 1)`.
#[inline(always)]
pub fn bits_to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A uniform draw in `[0, 1)`.
#[inline]
pub fn uniform01(key: StreamKey) -> f64 {
    bits_to_unit(key.block()[0])
}

/// Uniform point on the unit sphere built from two uniforms: inverse CDF on the
/// polar cosine and a uniform azimuth.
#[inline]
pub fn unit_sphere_from_uniforms(u_cos: f64, u_phi: f64) -> [f64; 3] {
    let z = 1.0 - 2.0 * u_cos;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = (2.0 * PI * u_phi).sin_cos();
    [r * c, r * s, z]
}

/// Uniform direction on S².
#[inline]
pub fn sample_unit_sphere(key: StreamKey) -> [f64; 3] {
    let u = key.uniforms();
    unit_sphere_from_uniforms(u[0], u[1])
}

/// Box–Muller pair from two uniforms in `[0, 1)`.
#[inline]
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let radius = (-2.0 * (1.0 - u1).ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (radius * c, radius * s)
}

/// Three i.i.d. standard normals from one block (two Box–Muller pairs, the
/// fourth normal is discarded).
#[inline]
pub fn sample_standard_normal3(key: StreamKey) -> [f64; 3] {
    let u = key.uniforms();
    let (a, b) = box_muller(u[0], u[1]);
    let (c, _) = box_muller(u[2], u[3]);
    [a, b, c]
}

/// Uniform integer in `0..n` from a uniform in `[0, 1)`.
#[inline]
pub fn index_from_unit(u: f64, n: usize) -> usize {
    ((u * n as f64) as usize).min(n.saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from the Random123 known-answer file and numpy's Philox.
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x64([0; 4], [0; 2]),
            [0x16554d9eca36314c, 0xdb20fe9d672d0fdc, 0xd7e772cee186176b, 0x7e68b68aec7ba23b]
        );
        assert_eq!(
            philox4x64([1, 0, 0, 0], [0, 0]),
            [0x02f4ba6408e4d89b, 0x3dd62b0b9ca8c5b2, 0x1c8667a55d902e79, 0x907d7a052fd5b4dc]
        );
        assert_eq!(
            philox4x64([5, 7, 0, 0], [0x0123456789abcdef, 0xfedcba9876543210]),
            [0x7e71d2cea5290aae, 0x8644e50c74672e75, 0x4d3cbd7232b2f4ef, 0x4c960cbbe35e1141]
        );
    }

    #[test]
    fn same_key_same_value() {
        let key = StreamKey::new(42, 7, 1234);
        assert_eq!(uniform01(key).to_bits(), uniform01(key).to_bits());
        assert_eq!(sample_unit_sphere(key), sample_unit_sphere(key));
    }

    #[test]
    fn unit_interval_bounds() {
        assert_eq!(bits_to_unit(0), 0.0);
        assert!(bits_to_unit(u64::MAX) < 1.0);
    }

    #[test]
    fn purposes_do_not_collide() {
        let a = StreamKey::for_purpose(1, Purpose::RteScatter, 5, 0);
        let b = StreamKey::for_purpose(1, Purpose::RteInitial, 5, 0);
        assert_ne!(a.stream_id, b.stream_id);
        assert_ne!(a.block(), b.block());
    }

    #[test]
    fn sphere_poles_and_equator() {
        let p = unit_sphere_from_uniforms(0.0, 0.3);
        assert_eq!(p[2], 1.0);
        let e = unit_sphere_from_uniforms(0.5, 0.0);
        assert!((e[0] - 1.0).abs() < 1e-15 && e[2].abs() < 1e-15);
    }

    #[test]
    fn index_from_unit_stays_in_range() {
        assert_eq!(index_from_unit(0.0, 5), 0);
        assert_eq!(index_from_unit(0.999_999_999_999, 5), 4);
    }
}
