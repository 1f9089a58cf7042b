//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream. The 256-bit key is derived from
//! `(master_seed, replication, restart)` and the 64-bit stream selector packs
//! `(particle, stage, lane)`, so the draws of any particle at any stage can be
//! produced independently of every other particle, in any order, on any
//! thread, with the same result.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Particle index reserved for the selection draws of a splitting stage.
pub const SELECTION_PARTICLE: u32 = u32::MAX;

const MAX_STAGE: u32 = 1 << 24;

/// Identifies one pseudo-random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replication: u64,
    pub particle: u32,
    pub stage: u32,
    /// Restart attempt after ensemble extinction; 0 for the first attempt.
    pub restart: u32,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        SeedSpec {
            master_seed,
            ..Default::default()
        }
    }

    pub fn with_replication(self, replication: u64) -> Self {
        SeedSpec {
            replication,
            ..self
        }
    }

    pub fn with_particle(self, particle: u32) -> Self {
        SeedSpec { particle, ..self }
    }

    pub fn with_stage(self, stage: u32) -> Self {
        assert!(stage < MAX_STAGE, "stage index {stage} out of range");
        SeedSpec { stage, ..self }
    }

    pub fn with_restart(self, restart: u32) -> Self {
        SeedSpec { restart, ..self }
    }

    /// Main stream of this id.
    pub fn rng(&self) -> SimRng {
        self.lane(0)
    }

    /// Auxiliary stream `lane` of this id. Samplers that need several
    /// independent sources (e.g. one per clock family) take one lane each.
    pub fn lane(&self, lane: u8) -> SimRng {
        let mut h = splitmix64(self.master_seed);
        h = splitmix64(h ^ self.replication.wrapping_mul(0xD1B5_4A32_D192_ED03));
        h = splitmix64(h ^ u64::from(self.restart).wrapping_mul(0xAEF1_7502_108E_F2D9));
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            h = splitmix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(
            (u64::from(self.particle) << 32) | (u64::from(self.stage) << 8) | u64::from(lane),
        );
        SimRng { inner }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A positioned ChaCha8 stream with the handful of draws the samplers use.
#[derive(Clone, Debug)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    /// Uniform on `(0, 1)`.
    #[inline]
    pub fn open_unit(&mut self) -> f64 {
        self.inner.sample(Open01)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Exponential variate by inversion, `-ln(U) / rate`. A zero rate gives
    /// `+inf` (the clock never rings).
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        let e = -self.open_unit().ln();
        if rate > 0.0 {
            e / rate
        } else {
            f64::INFINITY
        }
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(spec: SeedSpec) -> Vec<u64> {
        let mut r = spec.rng();
        (0..8).map(|_| r.next_u64()).collect()
    }

    #[test]
    fn identical_ids_are_bit_identical() {
        let s = SeedSpec::new(7)
            .with_replication(3)
            .with_particle(11)
            .with_stage(2);
        assert_eq!(draws(s), draws(s));
    }

    #[test]
    fn each_coordinate_changes_the_stream() {
        let base = SeedSpec::new(7)
            .with_replication(3)
            .with_particle(11)
            .with_stage(2);
        let reference = draws(base);
        for other in [
            SeedSpec {
                master_seed: 8,
                ..base
            },
            base.with_replication(4),
            base.with_particle(12),
            base.with_stage(3),
            base.with_restart(1),
        ] {
            assert_ne!(reference, draws(other), "{other:?}");
        }
        let mut lane1 = base.lane(1);
        let l1: Vec<u64> = (0..8).map(|_| lane1.next_u64()).collect();
        assert_ne!(reference, l1);
    }

    #[test]
    fn exponential_mean() {
        let mut r = SeedSpec::new(1).rng();
        let m = 200_000;
        let mean = (0..m).map(|_| r.exponential(4.0)).sum::<f64>() / m as f64;
        // sd of the mean = 0.25 / sqrt(m)
        assert!(
            (mean - 0.25).abs() < 4.0 * 0.25 / (m as f64).sqrt(),
            "{mean}"
        );
        assert_eq!(r.exponential(0.0), f64::INFINITY);
    }

    #[test]
    fn open_unit_never_zero() {
        let mut r = SeedSpec::new(2).rng();
        assert!((0..100_000).all(|_| {
            let u = r.open_unit();
            u > 0.0 && u < 1.0
        }));
    }
}
