//! Seeded random streams.
//!
//! Every run derives a handful of labelled substreams from one 64-bit seed.
//! ChaCha8 is counter based, so the same seed and stream give the same
//! numbers on every platform and independent streams never overlap.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Labelled substreams. The discriminant is the ChaCha stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Data = 2,
    Latent = 3,
    Eval = 4,
    Snapshot = 5,
    Test = 6,
}

#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

/// Serializable generator position; see [`Rng::state`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
    pub spare_normal: Option<u64>,
}

impl Rng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        Self::with_stream_id(seed, stream as u64)
    }

    pub fn with_stream_id(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng {
            inner,
            spare_normal: None,
        }
    }

    /// An independent child stream, for parallel work inside one run.
    pub fn substream(&self, child: u64) -> Self {
        let parent = self.inner.get_stream();
        let mut inner = ChaCha8Rng::from_seed(self.inner.get_seed());
        inner.set_stream(parent.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (child + 1) << 32);
        Rng {
            inner,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize % n.max(1)
    }

    /// Two independent standard normals from one Box–Muller transform.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        // 1 - u lies in (0, 1], so the log is finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        (radius * angle.cos(), radius * angle.sin())
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let (a, b) = self.normal_pair();
        self.spare_normal = Some(b);
        a
    }

    /// Draws an index according to `weights` (assumed to sum to 1).
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        weights.len() - 1
    }

    pub fn state(&self) -> RngState {
        RngState {
            seed: self.inner.get_seed(),
            stream: self.inner.get_stream(),
            word_pos: self.inner.get_word_pos(),
            spare_normal: self.spare_normal.map(f64::to_bits),
        }
    }

    pub fn from_state(state: &RngState) -> Self {
        let mut inner = ChaCha8Rng::from_seed(state.seed);
        inner.set_stream(state.stream);
        inner.set_word_pos(state.word_pos);
        Rng {
            inner,
            spare_normal: state.spare_normal.map(f64::from_bits),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42, Stream::Data);
        let mut b = Rng::new(42, Stream::Data);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = Rng::new(42, Stream::Data);
        let mut b = Rng::new(42, Stream::Latent);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn state_round_trip_resumes_exactly() {
        let mut a = Rng::new(7, Stream::Eval);
        a.normal();
        a.uniform();
        let saved = a.state();
        let mut b = Rng::from_state(&saved);
        for _ in 0..10 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = Rng::new(1, Stream::Test);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
