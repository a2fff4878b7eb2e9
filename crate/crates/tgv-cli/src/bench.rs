//! Micro-benchmark comparing the per-layer derivative cost of the two field
//! shapes. At order n the top layer holds `2^{n-1}` columns in the direct
//! shape but only `n` in the compact shape, so the width ratio grows
//! geometrically while the arithmetic per column stays comparable.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tgv_core::grid::{Coeffs, Grid};
use tgv_core::operators::{compact_sym_derivative, direct_sym_derivative, lift_compact_to_direct};
use tgv_core::{Result, TgvError};

/// Largest order the benchmark will exercise; the direct derivative output at
/// the top layer has `2^n` columns.
pub const MAX_BENCH_ORDER: usize = 8;

/// Applications timed per measurement batch.
const BATCH: usize = 10;

/// Shape and timing facts for the top layer at one order.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub order: usize,
    pub compact_cols: usize,
    pub direct_cols: usize,
    /// Bytes held by the compact layer (`n_pixels * cols * 8`).
    pub compact_bytes: usize,
    /// Bytes held by the direct layer.
    pub direct_bytes: usize,
    /// Exact column ratio `2^{n-1} / n` of the two shapes.
    pub width_ratio: f64,
    /// Best per-application time for the compact derivative, in seconds.
    pub compact_secs: f64,
    /// Best per-application time for the direct derivative, in seconds.
    pub direct_secs: f64,
    pub time_ratio: f64,
}

fn best_batch_secs(mut apply: impl FnMut(), reps: usize) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..reps {
        let start = Instant::now();
        for _ in 0..BATCH {
            apply();
        }
        best = best.min(start.elapsed().as_secs_f64());
    }
    best / BATCH as f64
}

/// Times the top-layer derivative of both shapes for orders `1..=max_order`
/// on a `size x size` grid, taking the best of `reps` batches.
pub fn run(max_order: usize, size: usize, reps: usize) -> Result<Vec<BenchRow>> {
    if max_order == 0 || max_order > MAX_BENCH_ORDER {
        return Err(TgvError::InvalidArgument(format!(
            "benchmark orders must lie in 1..={MAX_BENCH_ORDER}, got {max_order}"
        )));
    }
    if reps == 0 {
        return Err(TgvError::InvalidArgument(
            "at least one repetition is required".into(),
        ));
    }
    let grid = Grid::new(size, size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut rows = Vec::with_capacity(max_order);
    for n in 1..=max_order {
        let k = n - 1;
        let data: Vec<f64> = (0..grid.n_pixels() * (k + 1))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let compact = Coeffs::from_flat(grid, k + 1, data)?;
        let direct = lift_compact_to_direct(&compact, k)?;

        let compact_secs = best_batch_secs(
            || {
                black_box(compact_sym_derivative(black_box(&compact), k).expect("valid shape"));
            },
            reps,
        );
        let direct_secs = best_batch_secs(
            || {
                black_box(direct_sym_derivative(black_box(&direct), k).expect("valid shape"));
            },
            reps,
        );

        rows.push(BenchRow {
            order: n,
            compact_cols: k + 1,
            direct_cols: 1 << k,
            compact_bytes: grid.n_pixels() * (k + 1) * std::mem::size_of::<f64>(),
            direct_bytes: grid.n_pixels() * (1 << k) * std::mem::size_of::<f64>(),
            width_ratio: (1u64 << k) as f64 / (k + 1) as f64,
            compact_secs,
            direct_secs,
            time_ratio: direct_secs / compact_secs,
        });
    }
    Ok(rows)
}
