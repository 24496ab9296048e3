//! Small shared helpers: config fingerprints and decorrelated RNG substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Fingerprint of a serializable config, stable across runs.
pub fn config_fingerprint<T: Serialize>(value: &T) -> u64 {
    let json = serde_json::to_string(value).expect("config serializes");
    fnv1a64(json.as_bytes())
}

/// RNG substream domains, kept distinct so draws never alias.
#[derive(Debug, Clone, Copy)]
pub enum RngDomain {
    Event = 1,
    StreamNoise = 2,
    HeraldTimes = 3,
    Bootstrap = 4,
}

/// Counter-based substream: deterministic regardless of evaluation order.
pub fn substream_rng(seed: u64, domain: RngDomain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) ^ index);
    rng
}
