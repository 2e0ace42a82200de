//! Seeded sampling helpers shared by the experiment and geometry code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::stream::mix64;
use crate::Vector;

/// A reproducible generator for substream `stream` of `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(stream)));
    rng.set_stream(stream);
    rng
}

/// Uniform direction on the unit sphere in `R^d`.
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    loop {
        let v = Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let n = v.norm();
        if n > 1e-300 {
            return v / n;
        }
    }
}

/// Uniform point in the open ball `B(center, radius)`.
pub fn uniform_ball<R: Rng + ?Sized>(rng: &mut R, center: &Vector, radius: f64) -> Vector {
    let d = center.len();
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    center + unit_sphere(rng, d) * r
}
