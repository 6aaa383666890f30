//! Deterministic low-discrepancy samples (Halton sequences).

use crate::linalg::{Vector, MAX_DIM};

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// Point `index` of the `dim`-dimensional Halton sequence in `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim).map(|d| radical_inverse(index, PRIMES[d])).collect()
}

/// `count` unit directions in `R^n`, spread by rejection from Halton points
/// in `[−1,1]^n`. Deterministic for given `(n, count)`.
pub fn unit_directions(n: usize, count: usize) -> Vec<Vector> {
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    while out.len() < count {
        let mut u = [0.0; MAX_DIM];
        for (d, ud) in u.iter_mut().enumerate().take(n) {
            *ud = 2.0 * radical_inverse(index, PRIMES[d]) - 1.0;
        }
        index += 1;
        let r = u[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > 0.05 && r <= 1.0 {
            for ud in u.iter_mut().take(n) {
                *ud /= r;
            }
            out.push(u);
        }
    }
    out
}
