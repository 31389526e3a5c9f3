#![allow(dead_code)]

use gauss_quad::GaussLegendre;

/// Composite Gauss–Legendre from the `gauss-quad` crate: `pieces` equal panels of 20 nodes.
pub fn oracle_integral<F: Fn(f64) -> f64>(lo: f64, hi: f64, pieces: usize, f: F) -> f64 {
    let gl = GaussLegendre::new(20).unwrap();
    let h = (hi - lo) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let a = lo + k as f64 * h;
            gl.integrate(a, a + h, &f)
        })
        .sum()
}

/// Deterministic pseudo-random numbers in [0, 1) for probe points.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}
