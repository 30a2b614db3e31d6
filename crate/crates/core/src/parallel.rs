//! Deterministic parallel execution over numbered blocks.
//!
//! Work is split into blocks whose boundaries depend only on the problem
//! size. Each block draws from its own ChaCha stream keyed by
//! `(seed, block index)`, and results come back in block order, so the
//! merged output does not depend on the number of worker threads.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BRANCHSTOP_THREADS";

/// Worker count: `BRANCHSTOP_THREADS` when set to a positive integer,
/// otherwise the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count())
            .thread_name(|i| format!("branchstop-{i}"))
            .build()
            .expect("thread pool")
    })
}

/// Runs `job(block)` for every block in `0..blocks` and returns the
/// results in block order.
pub fn run_blocks<T, F>(blocks: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    pool().install(|| (0..blocks).into_par_iter().map(&job).collect())
}

/// Splits `total` items into consecutive `(start, len)` blocks of at most
/// `block_size` items.
pub fn partition(total: u64, block_size: u64) -> Vec<(u64, u64)> {
    let block_size = block_size.max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start < total {
        let len = block_size.min(total - start);
        out.push((start, len));
        start += len;
    }
    out
}

/// The random stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn blocks_come_back_in_order() {
        let out = run_blocks(100, |b| b * 2);
        assert_eq!(out, (0..100).map(|b| b * 2).collect::<Vec<_>>());
    }

    #[test]
    fn partition_covers_total() {
        assert_eq!(partition(10, 4), vec![(0, 4), (4, 4), (8, 2)]);
        assert!(partition(0, 4).is_empty());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng(42, 3).random();
        let b: u64 = stream_rng(42, 3).random();
        let c: u64 = stream_rng(42, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
