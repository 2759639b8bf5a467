//! Seeded sample points in the sector of the first bump.

use std::f64::consts::PI;

use rand::Rng;

use ringbump::geometry::{sector_membership, BumpConfiguration};

/// `n` points of sector 1 with `|y'| < 2R` (and `|y3| < R` when `N = 3`),
/// uniform in area over the planar part.
pub fn sector_samples<R: Rng>(config: &BumpConfiguration, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let half = PI / config.k as f64;
    let r_max = 2.0 * config.radius;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let t = rng.gen_range(-half..half);
        let r = rng.gen::<f64>().sqrt() * r_max;
        let mut y = vec![r * t.cos(), r * t.sin()];
        if config.dim == 3 {
            y.push(rng.gen_range(-config.radius..config.radius));
        }
        if sector_membership(&y, config) == 0 {
            out.push(y);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use ringbump::geometry::bump_centers;

    #[test]
    fn samples_lie_in_sector_one_and_repeat() {
        let cfg = bump_centers(12, 10.0, 2);
        let a = sector_samples(&cfg, 200, &mut ChaCha8Rng::seed_from_u64(3));
        let b = sector_samples(&cfg, 200, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!(a.iter().all(|y| sector_membership(y, &cfg) == 0));
        let cfg3 = bump_centers(6, 5.0, 3);
        let c = sector_samples(&cfg3, 50, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(c.iter().all(|y| y.len() == 3));
    }
}
