//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha20 keystream
//! addressed by `(seed, purpose, replica)`. ChaCha20 is a counter-mode
//! generator, so the `i`-th Gaussian of a stream can be produced without
//! generating the first `i - 1`, and results do not depend on how work is
//! scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// What a stream is used for. Distinct purposes never share keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Environment = 1,
    OuNoise = 2,
    Perturbation = 3,
    Sampler = 4,
    Trial = 5,
    Initial = 6,
}

/// Address of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub replica: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose, replica: u64) -> Self {
        Self {
            seed,
            purpose,
            replica,
        }
    }

    /// Derive a child key, e.g. one stream per (replica, grid point).
    pub fn child(self, salt: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(salt.wrapping_add(0x9e37_79b9_7f4a_7c15))),
            ..self
        }
    }

    /// Sequential generator positioned at the start of the stream.
    pub fn rng(self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::from_seed(self.key_bytes());
        rng.set_stream(self.replica);
        rng
    }

    /// The `index`-th standard normal of this stream (random access).
    pub fn normal_at(self, index: u64) -> f64 {
        let mut rng = self.rng();
        rng.set_word_pos(WORDS_PER_NORMAL * index as u128);
        normal_from_words(rng.random(), rng.random())
    }

    /// Fill `out` with normals `0..out.len()`; identical to calling
    /// [`StreamKey::normal_at`] for every index.
    pub fn fill_normals(self, out: &mut [f64]) {
        let mut rng = self.rng();
        for x in out.iter_mut() {
            *x = normal_from_words(rng.random(), rng.random());
        }
    }

    pub fn normals(self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        self.fill_normals(&mut v);
        v
    }

    fn key_bytes(self) -> [u8; 32] {
        let mut state = self.seed ^ (self.purpose as u64).wrapping_mul(0xd6e8_feb8_6659_fd93);
        let mut out = [0u8; 32];
        for chunk in out.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        out
    }
}

// Two u64 draws per normal = four 32-bit keystream words.
const WORDS_PER_NORMAL: u128 = 4;

/// Box-Muller on two raw words; uses the cosine branch only so that each
/// normal owns a fixed block of keystream.
fn normal_from_words(a: u64, b: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) + 1) as f64 * SCALE; // (0, 1]
    let u2 = (b >> 11) as f64 * SCALE; // [0, 1)
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_access_matches_sequential() {
        let key = StreamKey::new(17, Purpose::Environment, 3);
        let seq = key.normals(50);
        for (i, &x) in seq.iter().enumerate() {
            assert_eq!(x.to_bits(), key.normal_at(i as u64).to_bits());
        }
    }

    #[test]
    fn purposes_and_replicas_are_distinct() {
        let a = StreamKey::new(1, Purpose::Environment, 0).normals(4);
        let b = StreamKey::new(1, Purpose::OuNoise, 0).normals(4);
        let c = StreamKey::new(1, Purpose::Environment, 1).normals(4);
        let d = StreamKey::new(1, Purpose::Environment, 0).child(5).normals(4);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn normals_are_finite() {
        let v = StreamKey::new(99, Purpose::Trial, 7).normals(100_000);
        assert!(v.iter().all(|x| x.is_finite()));
    }
}
