//! Seeded random streams and low-discrepancy point sets on balls and annuli.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Derives an independent stream seed from a base seed and a stream tag
/// (splitmix64 finalizer over the combined word).
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, stream))
}

/// Uniformly distributed unit vector.
pub fn random_direction<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = crate::linalg::norm(&v);
        if len > 1e-12 {
            return v.into_iter().map(|c| c / len).collect();
        }
    }
}

/// Uniform sample from the ball of radius `radius` centred at the origin.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    let dir = random_direction(rng, n);
    let s = radius * rng.gen::<f64>().powf(1.0 / n as f64);
    dir.into_iter().map(|c| c * s).collect()
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton sequence in `[0,1)^d` with a seeded Cranley-Patterson rotation.
#[derive(Clone, Debug)]
pub struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 || dim > PRIMES.len() {
            return Err(Error::param(format!("Halton dimension must lie in 1..={}, got {dim}", PRIMES.len())));
        }
        let mut r = rng(seed, 0x4A17);
        let shift = (0..dim).map(|_| r.gen::<f64>()).collect();
        Ok(Self { shift, index: 1 })
    }

    pub fn next_into(&mut self, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let v = radical_inverse(self.index, PRIMES[j]) + self.shift[j];
            *o = v - v.floor();
        }
        self.index += 1;
    }
}

/// `count` quasi-random points uniformly covering the closed unit ball,
/// obtained by rejection from the enclosing cube.
pub fn unit_ball_points(n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut h = Halton::new(n, seed)?;
    let mut p = vec![0.0; n];
    let mut out = Vec::with_capacity(count);
    let max_draws = count.saturating_mul(1usize << n.min(20)).saturating_mul(8) + 1000;
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > max_draws {
            return Err(Error::Resource(format!("ball sampling in dimension {n} exceeded {max_draws} draws")));
        }
        h.next_into(&mut p);
        let q: Vec<f64> = p.iter().map(|c| 2.0 * c - 1.0).collect();
        if crate::linalg::norm(&q) <= 1.0 {
            out.push(q);
        }
    }
    Ok(out)
}

/// Points in the ball `‖x − center‖ ≤ radius`: interior quasi-random points
/// plus a tenth of the budget on the bounding sphere.
pub fn ball_points(center: &[f64], radius: f64, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = center.len();
    let sphere = count / 10;
    let unit = unit_ball_points(n, count, seed)?;
    let mut out = Vec::with_capacity(count);
    for (i, p) in unit.iter().enumerate() {
        let scale = if i < sphere {
            let len = crate::linalg::norm(p);
            if len < 1e-12 {
                radius
            } else {
                radius / len
            }
        } else {
            radius
        };
        out.push(center.iter().zip(p).map(|(c, x)| c + scale * x).collect());
    }
    Ok(out)
}

/// Points in the annulus `inner ≤ ‖x‖ ≤ outer`: interior points uniform in
/// volume plus a tenth of the budget on each bounding sphere.
pub fn annulus_points(n: usize, inner: f64, outer: f64, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(inner >= 0.0 && inner < outer) {
        return Err(Error::config(format!("empty annulus: inner {inner} ≥ outer {outer}")));
    }
    let unit = unit_ball_points(n, count, seed)?;
    let sphere = count / 10;
    let dn = n as f64;
    let (a, b) = (inner.powf(dn), outer.powf(dn));
    let mut out = Vec::with_capacity(count);
    for (i, p) in unit.iter().enumerate() {
        let len = crate::linalg::norm(p);
        if len < 1e-12 {
            continue;
        }
        let rho = if i < sphere {
            inner
        } else if i < 2 * sphere {
            outer
        } else {
            (a + (b - a) * len.powf(dn)).powf(1.0 / dn)
        };
        out.push(p.iter().map(|x| x / len * rho).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn ball_and_annulus_points_respect_radii() {
        let c = [1.0, -2.0, 0.5];
        for p in ball_points(&c, 0.7, 500, 3).unwrap() {
            assert!(crate::linalg::dist(&p, &c) <= 0.7 + 1e-12);
        }
        let pts = annulus_points(4, 0.2, 1.5, 500, 9).unwrap();
        assert!(pts.len() >= 499);
        for p in &pts {
            let r = crate::linalg::norm(p);
            assert!((0.2 - 1e-12..=1.5 + 1e-12).contains(&r));
        }
        assert!(annulus_points(2, 1.0, 1.0, 10, 0).is_err());
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        assert_eq!(stream_seed(5, 1), stream_seed(5, 1));
        assert_ne!(stream_seed(5, 1), stream_seed(5, 2));
        assert_ne!(stream_seed(5, 1), stream_seed(6, 1));
    }
}
