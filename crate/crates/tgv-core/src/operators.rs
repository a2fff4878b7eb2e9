//! The symmetrizing column projector, the orthonormal scaling matrices, the
//! symmetrized derivative in both field shapes, and the maps translating
//! between the shapes.
//!
//! A *direct* field of order k has `2^k` columns indexed by k-bit codes; the
//! projector averages columns whose codes are permutations of one another,
//! i.e. share a bit sum. A *compact* field of order k keeps one column per
//! bit sum, `k + 1` in total. `lift_compact_to_direct` spreads compact
//! columns over their orbits with weights that preserve row norms, so the
//! scaled derivative of a compact field and the projected derivative of its
//! lift have identical row norms column group by column group.

use crate::combinatorics::{binom_f64, Permutation};
use crate::error::{Result, TgvError};
use crate::grid::{iterated_derivative, iterated_derivative_adjoint, Coeffs, Grid};
use crate::parallel;

/// Practical cap on the order of direct fields (`2^k` columns).
pub const MAX_DIRECT_ORDER: usize = 12;

/// Relative tolerance for the orbit-wise symmetry check in
/// [`project_direct_to_compact`].
pub const SYMMETRY_SPREAD_TOL: f64 = 1e-10;

fn check_direct_shape(p: &Coeffs, k: usize) -> Result<()> {
    if k > MAX_DIRECT_ORDER {
        return Err(TgvError::CapacityExceeded(format!(
            "direct order {k} exceeds the supported maximum {MAX_DIRECT_ORDER}"
        )));
    }
    if p.n_cols() != 1usize << k {
        return Err(TgvError::ShapeMismatch(format!(
            "direct field of order {k} needs {} columns, found {}",
            1usize << k,
            p.n_cols()
        )));
    }
    Ok(())
}

fn check_compact_shape(p: &Coeffs, k: usize) -> Result<()> {
    if p.n_cols() != k + 1 {
        return Err(TgvError::ShapeMismatch(format!(
            "compact field of order {k} needs {} columns, found {}",
            k + 1,
            p.n_cols()
        )));
    }
    Ok(())
}

/// Per-bit-sum mean columns of a direct field: entry `s` is the average of
/// all columns whose index has `s` set bits.
fn orbit_means(p: &Coeffs, k: usize) -> Vec<Vec<f64>> {
    let n = p.n_pixels();
    let mut means = vec![vec![0.0; n]; k + 1];
    for j in 0..p.n_cols() {
        let s = (j as u64).count_ones() as usize;
        for (acc, v) in means[s].iter_mut().zip(p.col(j)) {
            *acc += v;
        }
    }
    for (s, mean) in means.iter_mut().enumerate() {
        let size = binom_f64(k, s as isize);
        for v in mean.iter_mut() {
            *v /= size;
        }
    }
    means
}

/// Projects a direct field of order `k` onto its symmetric range: every
/// column is replaced by the mean of the columns sharing its bit sum. All
/// members of an orbit occur with equal multiplicity in the underlying
/// permutation average, so the plain orbit mean is exact. Idempotent and
/// self-adjoint.
pub fn pi_project(p: &Coeffs, k: usize) -> Result<Coeffs> {
    check_direct_shape(p, k)?;
    let means = orbit_means(p, k);
    let n = p.n_pixels();
    let data = parallel::fill_columns(n, p.n_cols(), |j, out| {
        out.copy_from_slice(&means[(j as u64).count_ones() as usize]);
    });
    Ok(Coeffs::from_raw(p.grid(), p.n_cols(), data))
}

/// Reference route for the projector: column `j` of the output averages the
/// columns selected by applying every permutation in `perms` to `j`'s bit
/// code. The gathered indices are summed in sorted order, so the result is
/// bitwise independent of how `perms` is ordered. Costs `k!` column reads per
/// output column; [`pi_project`] is the production route and is tested
/// against this one.
pub fn pi_project_with_permutations(
    p: &Coeffs,
    k: usize,
    perms: &[Permutation],
) -> Result<Coeffs> {
    check_direct_shape(p, k)?;
    if k == 0 {
        return Err(TgvError::InvalidArgument(
            "permutation route needs order at least 1".into(),
        ));
    }
    let expected = (1..=k as u128).product::<u128>();
    if perms.len() as u128 != expected || perms.iter().any(|q| q.degree() != k) {
        return Err(TgvError::InvalidArgument(format!(
            "expected all {expected} permutations of degree {k}"
        )));
    }
    let n = p.n_pixels();
    let mut indices: Vec<Vec<usize>> = Vec::with_capacity(p.n_cols());
    for j in 0..p.n_cols() {
        let code = crate::combinatorics::binary_code(j, k)?;
        let mut idx = Vec::with_capacity(perms.len());
        for perm in perms {
            let moved = crate::combinatorics::apply_permutation(perm, code.bits())?;
            idx.push(crate::combinatorics::binary_decode(&moved)?);
        }
        idx.sort_unstable();
        indices.push(idx);
    }
    let scale = 1.0 / perms.len() as f64;
    let data = parallel::fill_columns(n, p.n_cols(), |j, out| {
        for &m in &indices[j] {
            for (acc, v) in out.iter_mut().zip(p.col(m)) {
                *acc += v;
            }
        }
        for v in out.iter_mut() {
            *v *= scale;
        }
    });
    Ok(Coeffs::from_raw(p.grid(), p.n_cols(), data))
}

/// The orthonormal column scaling applied after a derivative step on compact
/// fields. For order k it is a `(2k + 2) x (k + 2)` matrix with exactly one
/// nonzero per row: rows `2r` and `2r - 1` both feed column `r`, carrying the
/// x and y difference of neighbouring input columns with square-root binomial
/// ratios as weights. Columns are orthonormal, which makes the adjoint a
/// right inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingMatrix {
    order: usize,
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl ScalingMatrix {
    pub fn new(order: usize) -> Self {
        let n_rows = 2 * order + 2;
        let n_cols = order + 2;
        let mut entries = vec![0.0; n_rows * n_cols];
        for r in 0..=order {
            // x-difference of input column r contributes to output column r.
            entries[2 * r * n_cols + r] =
                (binom_f64(order, r as isize) / binom_f64(order + 1, r as isize)).sqrt();
        }
        for r in 1..=order + 1 {
            // y-difference of input column r-1 contributes to output column r.
            entries[(2 * r - 1) * n_cols + r] =
                (binom_f64(order, r as isize - 1) / binom_f64(order + 1, r as isize)).sqrt();
        }
        Self {
            order,
            n_rows,
            n_cols,
            entries,
        }
    }

    /// Wraps explicit row-major entries of the right shape. Intended for
    /// verification harnesses that need to perturb a matrix; no orthogonality
    /// is checked here.
    pub fn from_entries(order: usize, entries: Vec<f64>) -> Result<Self> {
        let n_rows = 2 * order + 2;
        let n_cols = order + 2;
        if entries.len() != n_rows * n_cols {
            return Err(TgvError::ShapeMismatch(format!(
                "order-{order} scaling matrix needs {} entries, found {}",
                n_rows * n_cols,
                entries.len()
            )));
        }
        Ok(Self {
            order,
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n_cols + col]
    }

    /// Right-multiplies a coefficient stack by the matrix:
    /// output column `c` is the weighted sum of input columns over rows with
    /// a nonzero in column `c`.
    pub fn apply(&self, z: &Coeffs) -> Result<Coeffs> {
        if z.n_cols() != self.n_rows {
            return Err(TgvError::ShapeMismatch(format!(
                "scaling of order {} expects {} columns, found {}",
                self.order,
                self.n_rows,
                z.n_cols()
            )));
        }
        let n = z.n_pixels();
        let data = parallel::fill_columns(n, self.n_cols, |c, out| {
            for r in 0..self.n_rows {
                let w = self.entry(r, c);
                if w != 0.0 {
                    for (acc, v) in out.iter_mut().zip(z.col(r)) {
                        *acc += w * v;
                    }
                }
            }
        });
        Ok(Coeffs::from_raw(z.grid(), self.n_cols, data))
    }

    /// Right-multiplies by the transpose; with orthonormal columns this
    /// satisfies `apply(apply_adjoint(q)) == q`.
    pub fn apply_adjoint(&self, q: &Coeffs) -> Result<Coeffs> {
        if q.n_cols() != self.n_cols {
            return Err(TgvError::ShapeMismatch(format!(
                "scaling adjoint of order {} expects {} columns, found {}",
                self.order,
                self.n_cols,
                q.n_cols()
            )));
        }
        let n = q.n_pixels();
        let data = parallel::fill_columns(n, self.n_rows, |r, out| {
            for c in 0..self.n_cols {
                let w = self.entry(r, c);
                if w != 0.0 {
                    for (acc, v) in out.iter_mut().zip(q.col(c)) {
                        *acc += w * v;
                    }
                }
            }
        });
        Ok(Coeffs::from_raw(q.grid(), self.n_rows, data))
    }
}

/// Applies the order-`k` scaling matrix to a `2k + 2` column stack.
pub fn apply_scaling(z: &Coeffs, k: usize) -> Result<Coeffs> {
    ScalingMatrix::new(k).apply(z)
}

/// Applies the transpose of the order-`k` scaling matrix.
pub fn apply_scaling_adjoint(q: &Coeffs, k: usize) -> Result<Coeffs> {
    ScalingMatrix::new(k).apply_adjoint(q)
}

/// Symmetrized derivative of a compact order-`k` field: both differences of
/// every column, recombined by the scaling matrix into `k + 2` columns. For
/// k = 1 the columns are `dx p0`, `(dy p0 + dx p1) / sqrt(2)`, `dy p1`.
pub fn compact_sym_derivative(p: &Coeffs, k: usize) -> Result<Coeffs> {
    check_compact_shape(p, k)?;
    ScalingMatrix::new(k).apply(&iterated_derivative(p))
}

/// Adjoint of [`compact_sym_derivative`].
pub fn compact_sym_derivative_adjoint(q: &Coeffs, k: usize) -> Result<Coeffs> {
    if q.n_cols() != k + 2 {
        return Err(TgvError::ShapeMismatch(format!(
            "adjoint of the order-{k} compact derivative expects {} columns, found {}",
            k + 2,
            q.n_cols()
        )));
    }
    iterated_derivative_adjoint(&ScalingMatrix::new(k).apply_adjoint(q)?)
}

/// Symmetrized derivative of a direct order-`k` field: both differences of
/// every column, projected onto the symmetric range at order `k + 1`.
pub fn direct_sym_derivative(u: &Coeffs, k: usize) -> Result<Coeffs> {
    check_direct_shape(u, k)?;
    if k + 1 > MAX_DIRECT_ORDER {
        return Err(TgvError::CapacityExceeded(format!(
            "derivative of a direct order-{k} field exceeds the maximum order {MAX_DIRECT_ORDER}"
        )));
    }
    pi_project(&iterated_derivative(u), k + 1)
}

/// Adjoint of [`direct_sym_derivative`].
pub fn direct_sym_derivative_adjoint(z: &Coeffs, k: usize) -> Result<Coeffs> {
    check_direct_shape(z, k + 1)?;
    iterated_derivative_adjoint(&pi_project(z, k + 1)?)
}

/// Expands a compact order-`k` field to the direct shape: column `j` of the
/// result is compact column `s = bit_sum(j)` divided by `sqrt(binom(k, s))`,
/// which preserves row norms orbit by orbit. For k = 2, `[a, b, c]` becomes
/// `[a, b / sqrt(2), b / sqrt(2), c]`.
pub fn lift_compact_to_direct(p: &Coeffs, k: usize) -> Result<Coeffs> {
    check_compact_shape(p, k)?;
    if k > MAX_DIRECT_ORDER {
        return Err(TgvError::CapacityExceeded(format!(
            "direct order {k} exceeds the supported maximum {MAX_DIRECT_ORDER}"
        )));
    }
    let weights: Vec<f64> = (0..=k)
        .map(|s| 1.0 / binom_f64(k, s as isize).sqrt())
        .collect();
    let n = p.n_pixels();
    let data = parallel::fill_columns(n, 1usize << k, |j, out| {
        let s = (j as u64).count_ones() as usize;
        let w = weights[s];
        for (acc, v) in out.iter_mut().zip(p.col(s)) {
            *acc = w * v;
        }
    });
    Ok(Coeffs::from_raw(p.grid(), 1usize << k, data))
}

/// Largest deviation of any column from its orbit mean, relative to the
/// field's largest magnitude. Zero exactly on the projector's range.
pub fn symmetry_spread(u: &Coeffs, k: usize) -> Result<f64> {
    check_direct_shape(u, k)?;
    let scale = u.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let means = orbit_means(u, k);
    let mut dev: f64 = 0.0;
    for j in 0..u.n_cols() {
        let mean = &means[(j as u64).count_ones() as usize];
        for (v, m) in u.col(j).iter().zip(mean) {
            dev = dev.max((v - m).abs());
        }
    }
    Ok(dev / scale)
}

/// Collapses a symmetric direct field back to the compact shape, inverting
/// [`lift_compact_to_direct`]: compact column `s` is `sqrt(binom(k, s))`
/// times the orbit mean. Errors when the orbit-wise symmetry spread exceeds
/// [`SYMMETRY_SPREAD_TOL`].
pub fn project_direct_to_compact(u: &Coeffs, k: usize) -> Result<Coeffs> {
    let spread = symmetry_spread(u, k)?;
    if spread > SYMMETRY_SPREAD_TOL {
        return Err(TgvError::InconsistentInput(format!(
            "columns within one orbit disagree (relative spread {spread:.3e})"
        )));
    }
    let means = orbit_means(u, k);
    let n = u.n_pixels();
    let data = parallel::fill_columns(n, k + 1, |s, out| {
        let w = binom_f64(k, s as isize).sqrt();
        for (acc, v) in out.iter_mut().zip(&means[s]) {
            *acc = w * v;
        }
    });
    Ok(Coeffs::from_raw(u.grid(), k + 1, data))
}

/// A compact-shape derivative layer: order `k` with `k + 1` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactField {
    order: usize,
    coeffs: Coeffs,
}

impl CompactField {
    pub fn new(order: usize, coeffs: Coeffs) -> Result<Self> {
        check_compact_shape(&coeffs, order)?;
        Ok(Self { order, coeffs })
    }

    pub fn zeros(grid: Grid, order: usize) -> Self {
        Self {
            order,
            coeffs: Coeffs::zeros(grid, order + 1),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &Coeffs {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Coeffs {
        self.coeffs
    }
}

/// A direct-shape derivative layer: order `k` with `2^k` columns, produced by
/// projection so the columns stay in the symmetric range.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectField {
    order: usize,
    coeffs: Coeffs,
}

impl DirectField {
    pub fn new(order: usize, coeffs: Coeffs) -> Result<Self> {
        check_direct_shape(&coeffs, order)?;
        Ok(Self { order, coeffs })
    }

    pub fn zeros(grid: Grid, order: usize) -> Self {
        Self {
            order,
            coeffs: Coeffs::zeros(grid, 1 << order),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &Coeffs {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Coeffs {
        self.coeffs
    }
}
