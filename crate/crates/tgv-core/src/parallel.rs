//! Opt-in data parallelism for column-wise kernels.
//!
//! The worker count is process-global and defaults to 1 so results and
//! timings are reproducible unless a caller opts in. Every parallel kernel
//! writes disjoint output columns and reads shared immutable input, so the
//! computed bytes are identical for any worker count.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Sets the worker count used by column-parallel kernels (minimum 1).
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

/// Currently configured worker count.
pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// Fills a column-major buffer of `n_cols` columns, each `n_rows` long.
/// `fill` receives the column index and the column slice; it must depend on
/// nothing but those, so dispatch order cannot change the result.
pub(crate) fn fill_columns<F>(n_rows: usize, n_cols: usize, fill: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let mut data = vec![0.0; n_rows * n_cols];
    if n_rows == 0 || n_cols == 0 {
        return data;
    }
    let workers = threads().min(n_cols);
    if workers <= 1 {
        for (c, col) in data.chunks_mut(n_rows).enumerate() {
            fill(c, col);
        }
        return data;
    }
    let mut cols: Vec<(usize, &mut [f64])> = data.chunks_mut(n_rows).enumerate().collect();
    let per_worker = cols.len().div_ceil(workers);
    let fill = &fill;
    std::thread::scope(|scope| {
        while !cols.is_empty() {
            let take = per_worker.min(cols.len());
            let group: Vec<(usize, &mut [f64])> = cols.drain(..take).collect();
            scope.spawn(move || {
                for (c, col) in group {
                    fill(c, col);
                }
            });
        }
    });
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_is_independent_of_worker_count() {
        let fill = |c: usize, out: &mut [f64]| {
            for (i, v) in out.iter_mut().enumerate() {
                *v = (c * 31 + i) as f64 * 0.5;
            }
        };
        let sequential = fill_columns(17, 9, fill);
        set_threads(4);
        let parallel = fill_columns(17, 9, fill);
        set_threads(1);
        assert_eq!(sequential, parallel);
    }
}
