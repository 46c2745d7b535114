//! Deterministic work splitting over a fixed-size thread pool.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rayon::ThreadPool;

fn pool(workers: usize) -> Arc<ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS.get_or_init(Default::default).lock().expect("pool registry");
    pools
        .entry(workers)
        .or_insert_with(|| {
            Arc::new(rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool"))
        })
        .clone()
}

/// Split `lo..=hi` into contiguous chunks and map them on `workers` threads.
/// Results come back in range order, so any order-sensitive merge is
/// independent of the worker count.
pub fn map_range<T, F>(workers: usize, lo: i64, hi: i64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(i64, i64) -> T + Sync + Send,
{
    if lo > hi {
        return Vec::new();
    }
    let len = (hi - lo + 1) as u64;
    let pieces = ((workers.max(1) * 4) as u64).min(len).max(1);
    let bounds: Vec<(i64, i64)> = (0..pieces)
        .map(|k| {
            let a = lo + (len * k / pieces) as i64;
            let b = lo + (len * (k + 1) / pieces) as i64 - 1;
            (a, b)
        })
        .collect();
    if workers <= 1 {
        return bounds.into_iter().map(|(a, b)| f(a, b)).collect();
    }
    pool(workers).install(|| bounds.into_par_iter().map(|(a, b)| f(a, b)).collect())
}

/// Map a slice on `workers` threads, keeping input order.
pub fn map_slice<I, T, F>(workers: usize, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    pool(workers).install(|| items.par_iter().map(f).collect())
}
