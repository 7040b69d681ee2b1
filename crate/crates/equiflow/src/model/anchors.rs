//! Uniform anchor sampling without replacement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelError;

/// Draw `m` distinct indices from 0..n, uniform without replacement,
/// deterministic given the seed (partial Fisher-Yates). The same anchors are
/// reused by every block of a forward pass.
pub fn sample_anchors(n: usize, m: usize, seed: u64) -> Result<Vec<usize>, ModelError> {
    if m == 0 || m > n {
        return Err(ModelError::TooManyAnchors { requested: m, available: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(m);
    Ok(pool)
}
