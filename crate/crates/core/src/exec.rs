//! Chunked map/reduce used by every corpus-wide computation.
//!
//! Work is cut into fixed-size chunks of consecutive items. Each chunk is
//! mapped to a partial result, and partials come back in chunk order, so the
//! caller's left fold over them is the same reduction tree whatever the
//! execution strategy or thread count. Sequential and parallel runs are
//! therefore bitwise identical.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Items per chunk in corpus-level map/reduce passes.
pub const DEFAULT_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls back
    /// to the sequential path.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

fn chunk_ranges(len: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..len.div_ceil(chunk)).map(|c| c * chunk..((c + 1) * chunk).min(len)).collect()
}

/// Maps `f` over consecutive index ranges covering `0..len`. Results are in
/// range order.
pub fn map_ranges<R, F>(exec: Execution, len: usize, chunk: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync + Send,
{
    let ranges = chunk_ranges(len, chunk);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return ranges.into_par_iter().map(f).collect();
    }
    let _ = exec;
    ranges.into_iter().map(f).collect()
}

/// Same as [`map_ranges`] over slice chunks; `f` also receives the offset of
/// the chunk's first item.
pub fn map_chunks<T, R, F>(exec: Execution, items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &[T]) -> R + Sync + Send,
{
    map_ranges(exec, items.len(), chunk, |r| f(r.start, &items[r]))
}

/// Element-wise map preserving order.
pub fn map_items<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Runs `f` with parallel work spread over `workers` threads (0 = one per
/// core). Results do not depend on the count.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => return pool.install(f),
            Err(e) => log::warn!("could not start {workers} worker threads ({e}); using the default pool"),
        }
    }
    let _ = workers;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_exactly() {
        let r = chunk_ranges(10, 4);
        assert_eq!(r, vec![0..4, 4..8, 8..10]);
        assert!(chunk_ranges(0, 4).is_empty());
    }

    #[test]
    fn both_modes_agree_bitwise() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 0.5)).collect();
        let fold = |exec| {
            map_chunks(exec, &xs, 7, |_, c| c.iter().sum::<f64>())
                .into_iter()
                .fold(0.0, |a, b| a + b)
        };
        assert_eq!(fold(Execution::Sequential).to_bits(), fold(Execution::Parallel).to_bits());
    }
}
