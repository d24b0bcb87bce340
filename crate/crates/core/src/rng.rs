//! Per-sample random streams derived from a global seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

/// Stream keyed by `(seed, task, scene_id, index)`. Streams for distinct keys
/// are independent, so adding tasks or scenes leaves existing ones intact.
pub fn stream(seed: u64, task: &str, scene_id: &str, index: u64) -> Stream {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((task.len() as u64).to_le_bytes());
    h.update(task.as_bytes());
    h.update((scene_id.len() as u64).to_le_bytes());
    h.update(scene_id.as_bytes());
    h.update(index.to_le_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Integer count with expectation exactly `total * fraction`: floor plus a
/// Bernoulli draw on the fractional part.
pub fn randomized_round(total: usize, fraction: f64, rng: &mut impl Rng) -> usize {
    let exact = total as f64 * fraction;
    let base = exact.floor();
    let extra = usize::from(rng.gen_bool((exact - base).clamp(0.0, 1.0)));
    (base as usize + extra).min(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_keyed() {
        let a: u64 = stream(7, "hope", "s0", 0).gen();
        let b: u64 = stream(7, "hope", "s0", 0).gen();
        let c: u64 = stream(7, "hope", "s0", 1).gen();
        let d: u64 = stream(7, "hroc", "s0", 0).gen();
        // length prefixes keep ("ab","c") and ("a","bc") apart
        let e: u64 = stream(7, "ab", "c", 0).gen();
        let f: u64 = stream(7, "a", "bc", 0).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(e, f);
    }

    #[test]
    fn randomized_round_mean() {
        let mut rng = stream(1, "t", "s", 0);
        let n = 20_000;
        let sum: usize = (0..n).map(|_| randomized_round(3, 0.5, &mut rng)).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 1.5).abs() < 0.03, "{mean}");
        assert_eq!(randomized_round(4, 0.5, &mut rng), 2);
        assert_eq!(randomized_round(4, 1.0, &mut rng), 4);
    }
}
