use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Matrix, Scalar};

/// Clamp applied to uniforms before the double log of the Gumbel transform.
pub const GUMBEL_EPS: f64 = 1e-12;

/// Seeded generator backed by ChaCha8.
///
/// ChaCha output is defined by the algorithm, not the platform, so a seed
/// reproduces the same draw sequence bit for bit everywhere. Child streams
/// from [`Rng::derive`] are independent generators keyed by `(seed, tag)`.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn seed_from(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A new generator whose seed mixes this generator's seed with `tag`.
    /// Does not advance `self`.
    pub fn derive(&self, tag: u64) -> Self {
        Self::seed_from(mix(self.seed ^ mix(tag.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn uniform_matrix<T: Scalar>(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix<T> {
        Matrix::from_fn(rows, cols, |_, _| T::from(self.uniform_range(lo, hi)).unwrap())
    }

    pub fn normal_matrix<T: Scalar>(&mut self, rows: usize, cols: usize, std: f64) -> Matrix<T> {
        Matrix::from_fn(rows, cols, |_, _| T::from(std * self.normal()).unwrap())
    }

    /// Standard Gumbel noise, filled row-major.
    pub fn gumbel_matrix<T: Scalar>(&mut self, rows: usize, cols: usize) -> Matrix<T> {
        Matrix::from_fn(rows, cols, |_, _| T::from(gumbel_from_uniform(self.uniform())).unwrap())
    }

    pub fn shuffle<E>(&mut self, items: &mut [E]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }

    /// `count` distinct indices from `0..n`, in draw order.
    pub fn sample_distinct(&mut self, n: usize, count: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, count).into_vec()
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// `-ln(-ln(u))` with `u` clamped into `[ε, 1-ε]`.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(GUMBEL_EPS, 1.0 - GUMBEL_EPS);
    -(-u.ln()).ln()
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gumbel_fixed_points() {
        assert!(gumbel_from_uniform((-1.0f64).exp()).abs() < 1e-15);
        let u = (-std::f64::consts::E).exp();
        assert!((gumbel_from_uniform(u) + 1.0).abs() < 1e-12);
        assert!(gumbel_from_uniform(0.0).is_finite());
        assert!(gumbel_from_uniform(1.0).is_finite());
    }

    #[test]
    fn gumbel_mean_is_euler_mascheroni() {
        let mut rng = Rng::seed_from(2024);
        let n = 100_000;
        let g = rng.gumbel_matrix::<f64>(n, 1);
        let mean = g.sum() / n as f64;
        assert!((mean - 0.577_215_664_9).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn same_seed_same_stream() {
        let a = Rng::seed_from(11).uniform_matrix::<f32>(4, 4, -1.0, 1.0);
        let b = Rng::seed_from(11).uniform_matrix::<f32>(4, 4, -1.0, 1.0);
        assert_eq!(a.as_slice(), b.as_slice());
        let c = Rng::seed_from(12).uniform_matrix::<f32>(4, 4, -1.0, 1.0);
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn derived_streams_differ_by_tag() {
        let base = Rng::seed_from(5);
        let mut a = base.derive(1);
        let mut b = base.derive(2);
        let mut a2 = base.derive(1);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_eq!(x, a2.next_u64());
    }
}
