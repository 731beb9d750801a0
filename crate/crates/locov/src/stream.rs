//! Deterministic random substreams.
//!
//! Every stochastic component draws from a ChaCha stream keyed by
//! `(seed, domain, index)`. Same key, same stream, always — so trials can run
//! in any order (or in parallel) and still produce bit-identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent random stream from a master seed, a domain tag and
/// a per-unit index (e.g. a trial id).
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
