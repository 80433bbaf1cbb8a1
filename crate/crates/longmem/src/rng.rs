//! Counter-based random streams.
//!
//! Every parallel unit of work (window replica, fBM replica, tau draw)
//! gets its own ChaCha stream derived from the master seed and a
//! `(domain, index)` pair, so results are independent of thread count and
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Namespaces for derived streams, so replica indices never collide
/// across pipeline stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Window-path replicas (importance sampled).
    Window = 1,
    /// Window-path replicas (plain rejection sampling).
    Rejection = 2,
    /// Fractional Brownian motion / hitting-time replicas.
    Fbm = 3,
    /// Noise self-checks and miscellaneous draws.
    Aux = 4,
}

/// Derive the stream for one unit of work.
pub fn stream(master_seed: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    debug_assert!(
        index < (1u64 << 56),
        "stream index overflows the domain tag"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((domain as u64) << 56) | index);
    rng
}
