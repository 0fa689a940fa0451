//! Seed derivation and random streams.
//!
//! Every random quantity in the crate flows from one 64-bit seed. A labelled
//! child key is derived with SHA-256 over `seed (little endian) || label`, and
//! work is partitioned into fixed-size chunks whose ChaCha20 stream id is the
//! chunk index. The chunk layout never depends on the thread count, so serial
//! and parallel runs produce identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::qspin::UnitVector;

/// Name reported in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9), SHA-256 labelled seed derivation, stream = chunk index";

/// Trials per independently seeded chunk.
pub const CHUNK_TRIALS: u64 = 1 << 14;

pub fn child_key(seed: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&out);
    key
}

/// Deterministic 64-bit child seed, for handing a sub-seed to another subsystem.
pub fn child_seed(seed: u64, label: &str) -> u64 {
    let key = child_key(seed, label);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}

pub fn stream(seed: u64, label: &str, stream_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::from_seed(child_key(seed, label));
    rng.set_stream(stream_id);
    rng
}

/// Split `m` trials into `(chunk_index, first_trial, len)` triples.
pub fn chunks(m: u64) -> impl Iterator<Item = (u64, u64, u64)> + Clone {
    let n = m.div_ceil(CHUNK_TRIALS);
    (0..n).map(move |c| {
        let start = c * CHUNK_TRIALS;
        (c, start, CHUNK_TRIALS.min(m - start))
    })
}

/// Area-uniform direction: z ~ U[-1, 1], phi ~ U[0, 2pi).
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> UnitVector {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    UnitVector::from_z_phi(z, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn chacha20_zero_key_matches_published_keystream() {
        // RFC 7539 test vector: all-zero key and nonce, block 0.
        let mut rng = ChaCha20Rng::from_seed([0u8; 32]);
        assert_eq!(rng.next_u32(), 0xade0_b876);
        assert_eq!(rng.next_u32(), 0x903d_f1a0);
        assert_eq!(rng.next_u32(), 0xe56a_5d40);
        assert_eq!(rng.next_u32(), 0x28bd_8653);
    }

    #[test]
    fn child_keys_depend_on_seed_and_label() {
        assert_eq!(child_key(7, "a"), child_key(7, "a"));
        assert_ne!(child_key(7, "a"), child_key(8, "a"));
        assert_ne!(child_key(7, "a"), child_key(7, "b"));
    }

    #[test]
    fn chunks_cover_range() {
        let m = 3 * CHUNK_TRIALS + 5;
        let v: Vec<_> = chunks(m).collect();
        assert_eq!(v.len(), 4);
        assert_eq!(v[3], (3, 3 * CHUNK_TRIALS, 5));
        assert_eq!(v.iter().map(|c| c.2).sum::<u64>(), m);
        assert_eq!(chunks(0).count(), 0);
    }

    #[test]
    fn uniform_direction_moments() {
        let mut rng = stream(1, "moments", 0);
        let n = 200_000;
        let (mut sz, mut sz2, mut sx) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let u = uniform_direction(&mut rng);
            sz += u.z;
            sz2 += u.z * u.z;
            sx += u.x;
        }
        let n = n as f64;
        assert!((sz / n).abs() < 5.0 * (1.0f64 / 3.0 / n).sqrt());
        assert!((sx / n).abs() < 5.0 * (1.0f64 / 3.0 / n).sqrt());
        assert!((sz2 / n - 1.0 / 3.0).abs() < 5e-3);
    }
}
