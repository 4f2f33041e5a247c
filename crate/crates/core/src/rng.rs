//! Seeded random streams.
//!
//! Every experiment seed fans out into independent ChaCha streams, one per
//! consumer, so that changing how many draws one consumer makes never
//! perturbs another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::vector::ParamVector;

pub type SimRng = ChaCha8Rng;

/// Named substreams of a single experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Data = 1,
    Assignment = 2,
    Perturbation = 3,
    Adversary = 4,
    Probe = 5,
    Init = 6,
    /// Start vectors for power iteration.
    PowerStart = 7,
    Trial = 8,
}

pub fn substream(seed: u64, stream: Stream) -> SimRng {
    substream_raw(seed, stream as u64)
}

pub fn substream_raw(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ParamVector {
    ParamVector::from((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>())
}

/// Uniform sample from the solid ball of the given radius centred at the
/// origin: Gaussian direction, radius scaled by `U^(1/d)`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> ParamVector {
    loop {
        let dir = standard_normal_vec(rng, dim);
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let rho = radius * u.powf(1.0 / dim as f64);
        return dir.scale(rho / norm);
    }
}
