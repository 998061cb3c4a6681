//! Counter-based random streams: sample `i` of a run keyed by `seed` always
//! sees the same numbers, whatever order the samples are evaluated in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::systems::Point;

/// Independent generator for sample `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point of `[0, 1)²`.
pub fn uniform_point<R: Rng + ?Sized>(rng: &mut R) -> Point {
    Point::new(rng.random::<f64>(), rng.random::<f64>())
}

/// Uniform on `[-r, r]`.
pub fn symmetric<R: Rng + ?Sized>(rng: &mut R, r: f64) -> f64 {
    r * (2.0 * rng.random::<f64>() - 1.0)
}
