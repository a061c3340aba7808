//! Seeded, chunked random sampling shared by the Monte Carlo oracles.
//!
//! Work is split into fixed-size chunks, each with its own ChaCha stream
//! derived from the seed, and chunk results are returned in chunk order so
//! that reductions do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub(crate) const CHUNK: u64 = 1 << 16;

pub(crate) fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `work(rng, count)` over chunks covering `samples` draws.
pub(crate) fn chunked<T, F>(samples: u64, seed: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            let mut rng = chunk_rng(seed, c);
            work(&mut rng, count)
        })
        .collect()
}

/// Uniform direction on the unit sphere, written into `out`.
pub(crate) fn unit_vector(rng: &mut impl Rng, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for x in out.iter_mut() {
            *x = StandardNormal.sample(rng);
            norm2 += *x * *x;
        }
        if norm2 > 1e-300 {
            let inv = norm2.sqrt().recip();
            out.iter_mut().for_each(|x| *x *= inv);
            return;
        }
    }
}

/// Uniform point in the ball of radius `r` about `center`.
pub(crate) fn point_in_ball(rng: &mut impl Rng, center: &[f64], r: f64, out: &mut [f64]) {
    unit_vector(rng, out);
    let u: f64 = rng.random();
    let rho = r * u.powf(1.0 / center.len() as f64);
    for (x, c) in out.iter_mut().zip(center) {
        *x = c + rho * *x;
    }
}
