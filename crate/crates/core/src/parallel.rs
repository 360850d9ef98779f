//! Thread-count-parameterised work partitioning.
//!
//! Work is split into contiguous blocks, one per thread, and every
//! reduction uses a fixed block size that does not depend on the thread
//! count, so results are bitwise identical for any number of threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Block length for reductions.
pub const REDUCE_BLOCK: usize = 2048;

fn pool(threads: usize) -> Arc<ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let pools = POOLS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = pools.lock().unwrap();
    guard
        .entry(threads)
        .or_insert_with(|| {
            Arc::new(
                ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .thread_name(move |i| format!("sigmin-{threads}-{i}"))
                    .build()
                    .expect("failed to build thread pool"),
            )
        })
        .clone()
}

/// Number of hardware threads available to this process.
pub fn available_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Fills `out` (`rows` consecutive chunks of `width` items) by calling
/// `f(row, chunk)`, splitting rows into one contiguous block per thread.
pub fn par_rows<T, F>(threads: usize, out: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    if width == 0 || out.is_empty() {
        return;
    }
    let rows = out.len() / width;
    if threads <= 1 || rows < 2 {
        for (i, chunk) in out.chunks_mut(width).enumerate() {
            f(i, chunk);
        }
        return;
    }
    let per = rows.div_ceil(threads);
    pool(threads).install(|| {
        out.par_chunks_mut(per * width).enumerate().for_each(|(b, block)| {
            for (k, chunk) in block.chunks_mut(width).enumerate() {
                f(b * per + k, chunk);
            }
        });
    });
}

/// Maps `f` over `0..n`, contiguous blocks per thread, preserving order.
pub fn par_map<T, F>(threads: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if threads <= 1 || n < 2 {
        return (0..n).map(f).collect();
    }
    let per = n.div_ceil(threads);
    pool(threads).install(|| {
        (0..threads)
            .into_par_iter()
            .map(|b| {
                let end = ((b + 1) * per).min(n);
                (b * per..end).map(&f).collect::<Vec<T>>()
            })
            .collect::<Vec<Vec<T>>>()
            .into_iter()
            .flatten()
            .collect()
    })
}

/// Sum of `f(range)` over fixed blocks of [`REDUCE_BLOCK`] indices; the
/// partial sums are added in block order.
pub fn blocked_sum<F>(threads: usize, n: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync,
{
    let nblocks = n.div_ceil(REDUCE_BLOCK);
    let partials = par_map(threads, nblocks, |b| f(b * REDUCE_BLOCK..((b + 1) * REDUCE_BLOCK).min(n)));
    partials.iter().sum()
}

pub fn dot(threads: usize, a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    blocked_sum(threads, a.len(), |r| a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum())
}

pub fn norm2(threads: usize, a: &[f64]) -> f64 {
    dot(threads, a, a).sqrt()
}

/// `y[i] = f(i, y[i])` elementwise, partitioned over threads.
pub fn par_update<F>(threads: usize, y: &mut [f64], f: F)
where
    F: Fn(usize, f64) -> f64 + Sync,
{
    if threads <= 1 || y.len() < 4 * REDUCE_BLOCK {
        for (i, v) in y.iter_mut().enumerate() {
            *v = f(i, *v);
        }
        return;
    }
    par_rows(threads, y, REDUCE_BLOCK, |b, chunk| {
        let base = b * REDUCE_BLOCK;
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = f(base + k, *v);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reductions_independent_of_thread_count() {
        let a: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 - 0.37).collect();
        let b: Vec<f64> = (0..10_000).map(|i| ((i * 104729) % 997) as f64 * 1e-2).collect();
        let d1 = dot(1, &a, &b);
        for t in [2, 3, 4, 7] {
            assert_eq!(dot(t, &a, &b).to_bits(), d1.to_bits());
        }
    }

    #[test]
    fn par_map_preserves_order() {
        for t in [1, 2, 5] {
            assert_eq!(par_map(t, 11, |i| i * i), (0..11).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn par_rows_visits_every_row() {
        let mut out = vec![0usize; 21];
        par_rows(4, &mut out, 3, |i, chunk| chunk.iter_mut().for_each(|v| *v = i));
        assert_eq!(out, (0..21).map(|k| k / 3).collect::<Vec<_>>());
    }
}
