//! Deterministic random-number streams and the parallel/sequential execution
//! switch.
//!
//! Every stochastic component of the crate draws from a `ChaCha8` stream whose
//! seed is derived from the master seed plus a path of integer tags (domain,
//! chain, individual, iteration, ...) through a SplitMix64 mix. Work items
//! therefore own independent streams, and results are bit-identical no matter
//! how the work is scheduled — with or without the `parallel` feature.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream-domain tags; kept distinct so the same (seed, index) pair never
/// feeds two different purposes.
pub mod domain {
    pub const SSTEP: u64 = 1;
    pub const GENERATE: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const IMPORTANCE: u64 = 4;
    pub const REPLICATE: u64 = 5;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` and a tag path.
pub fn stream_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = mix(master ^ GOLDEN);
    for &t in tags {
        s = mix(s.wrapping_add(GOLDEN).wrapping_add(t));
    }
    s
}

/// RNG for the stream identified by `(master, tags)`.
pub fn stream_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, tags))
}

/// Map `f` over `0..n`, collecting results in index order. Runs on the rayon
/// pool when the `parallel` feature is enabled, sequentially otherwise; the
/// output is identical either way.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
