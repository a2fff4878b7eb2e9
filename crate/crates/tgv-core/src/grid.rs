//! Pixel grids, scanned images, and stacks of scanned coefficient images,
//! plus the periodic first differences along both axes.
//!
//! Pixels are scanned row by row: pixel `(row, col)` of a `width x height`
//! grid sits at linear index `row * width + col`. Differences wrap around the
//! grid edges, so every operator here is a circular convolution and any two
//! of them commute exactly.

use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use crate::error::{Result, TgvError};
use crate::parallel;

/// Rectangular grid dimensions shared by all columns of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    width: usize,
    height: usize,
}

impl Grid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(TgvError::InvalidArgument(format!(
                "grid dimensions must be positive, got {width} x {height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Linear index of pixel `(row, col)` in scan order.
    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }
}

/// A single scanned image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    grid: Grid,
    data: Vec<f64>,
}

impl Image {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_pixels() {
            return Err(TgvError::ShapeMismatch(format!(
                "image data length {} does not match {} x {} grid",
                data.len(),
                grid.width(),
                grid.height()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.n_pixels()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.n_pixels()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.grid.index(row, col)]
    }

    pub fn to_coeffs(&self) -> Coeffs {
        Coeffs {
            grid: self.grid,
            cols: 1,
            data: self.data.clone(),
        }
    }
}

/// A stack of scanned images sharing one grid, stored column-major so each
/// column is a contiguous scanned image. Row `i` collects pixel `i`'s
/// coefficients across all columns; mixed norms and proximal maps act on
/// those rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Coeffs {
    grid: Grid,
    cols: usize,
    data: Vec<f64>,
}

impl Coeffs {
    pub fn zeros(grid: Grid, cols: usize) -> Self {
        Self {
            grid,
            cols,
            data: vec![0.0; grid.n_pixels() * cols],
        }
    }

    /// Wraps a column-major buffer of `cols` scanned images.
    pub fn from_flat(grid: Grid, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_pixels() * cols {
            return Err(TgvError::ShapeMismatch(format!(
                "buffer length {} does not hold {cols} columns of {} pixels",
                data.len(),
                grid.n_pixels()
            )));
        }
        Ok(Self { grid, cols, data })
    }

    pub fn from_image(image: &Image) -> Self {
        image.to_coeffs()
    }

    pub(crate) fn from_raw(grid: Grid, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.n_pixels() * cols);
        Self { grid, cols, data }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn n_pixels(&self) -> usize {
        self.grid.n_pixels()
    }

    /// Column `j` as a contiguous scanned image.
    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        let n = self.grid.n_pixels();
        &self.data[j * n..(j + 1) * n]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.grid.n_pixels();
        &mut self.data[j * n..(j + 1) * n]
    }

    /// Full column-major buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Entry at pixel `i`, column `j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.grid.n_pixels() + i]
    }

    /// The single column as an image; errors when more than one is present.
    pub fn to_image(&self) -> Result<Image> {
        if self.cols != 1 {
            return Err(TgvError::ShapeMismatch(format!(
                "expected a single column, found {}",
                self.cols
            )));
        }
        Image::new(self.grid, self.data.clone())
    }

    pub fn frobenius_dot(&self, other: &Coeffs) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Coeffs) {
        debug_assert_eq!(self.data.len(), x.data.len());
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }
}

macro_rules! check_same_shape {
    ($a:expr, $b:expr) => {
        debug_assert_eq!($a.grid, $b.grid, "coefficient grids differ");
        debug_assert_eq!($a.cols, $b.cols, "coefficient column counts differ");
    };
}

impl Add for &Coeffs {
    type Output = Coeffs;

    fn add(self, rhs: &Coeffs) -> Coeffs {
        check_same_shape!(self, rhs);
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Coeffs::from_raw(self.grid, self.cols, data)
    }
}

impl Sub for &Coeffs {
    type Output = Coeffs;

    fn sub(self, rhs: &Coeffs) -> Coeffs {
        check_same_shape!(self, rhs);
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Coeffs::from_raw(self.grid, self.cols, data)
    }
}

impl Mul<f64> for &Coeffs {
    type Output = Coeffs;

    fn mul(self, rhs: f64) -> Coeffs {
        let data = self.data.iter().map(|a| a * rhs).collect();
        Coeffs::from_raw(self.grid, self.cols, data)
    }
}

impl AddAssign<&Coeffs> for Coeffs {
    fn add_assign(&mut self, rhs: &Coeffs) {
        check_same_shape!(self, rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Coeffs> for Coeffs {
    fn sub_assign(&mut self, rhs: &Coeffs) {
        check_same_shape!(self, rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// Forward difference along x with wrap: `out(r, c) = in(r, c+1) - in(r, c)`,
/// column arithmetic mod width.
pub(crate) fn dx_slice(grid: Grid, src: &[f64], dst: &mut [f64]) {
    let (w, h) = (grid.width(), grid.height());
    for r in 0..h {
        let base = r * w;
        for c in 0..w - 1 {
            dst[base + c] = src[base + c + 1] - src[base + c];
        }
        dst[base + w - 1] = src[base] - src[base + w - 1];
    }
}

/// Forward difference along y with wrap: `out(r, c) = in(r+1, c) - in(r, c)`,
/// row arithmetic mod height.
pub(crate) fn dy_slice(grid: Grid, src: &[f64], dst: &mut [f64]) {
    let (w, h) = (grid.width(), grid.height());
    for r in 0..h {
        let next = if r + 1 == h { 0 } else { (r + 1) * w };
        let base = r * w;
        for c in 0..w {
            dst[base + c] = src[next + c] - src[base + c];
        }
    }
}

/// Adjoint of [`dx_slice`]: `out(r, c) = in(r, c-1) - in(r, c)` with wrap.
pub(crate) fn dx_adjoint_slice(grid: Grid, src: &[f64], dst: &mut [f64]) {
    let (w, h) = (grid.width(), grid.height());
    for r in 0..h {
        let base = r * w;
        dst[base] = src[base + w - 1] - src[base];
        for c in 1..w {
            dst[base + c] = src[base + c - 1] - src[base + c];
        }
    }
}

/// Adjoint of [`dy_slice`], accumulated: `out(r, c) += in(r-1, c) - in(r, c)`.
pub(crate) fn dy_adjoint_add_slice(grid: Grid, src: &[f64], dst: &mut [f64]) {
    let (w, h) = (grid.width(), grid.height());
    for r in 0..h {
        let prev = if r == 0 { (h - 1) * w } else { (r - 1) * w };
        let base = r * w;
        for c in 0..w {
            dst[base + c] += src[prev + c] - src[base + c];
        }
    }
}

fn map_image(image: &Image, f: impl Fn(Grid, &[f64], &mut [f64])) -> Image {
    let mut out = vec![0.0; image.data.len()];
    f(image.grid, &image.data, &mut out);
    Image {
        grid: image.grid,
        data: out,
    }
}

/// Periodic forward difference along x.
pub fn dx(image: &Image) -> Image {
    map_image(image, dx_slice)
}

/// Periodic forward difference along y.
pub fn dy(image: &Image) -> Image {
    map_image(image, dy_slice)
}

/// Adjoint of [`dx`] under the unweighted pixel inner product.
pub fn dx_adjoint(image: &Image) -> Image {
    map_image(image, dx_adjoint_slice)
}

/// Adjoint of [`dy`] under the unweighted pixel inner product.
pub fn dy_adjoint(image: &Image) -> Image {
    map_image(image, |g, s, d| {
        dy_adjoint_add_slice(g, s, d);
    })
}

/// Stacks both differences of every column: input column `j` becomes output
/// columns `2j` (x difference) and `2j + 1` (y difference), so an `m`-column
/// stack grows to `2m` columns.
pub fn iterated_derivative(y: &Coeffs) -> Coeffs {
    let n = y.n_pixels();
    let grid = y.grid();
    let data = parallel::fill_columns(n, 2 * y.n_cols(), |c, out| {
        let src = y.col(c / 2);
        if c % 2 == 0 {
            dx_slice(grid, src, out);
        } else {
            dy_slice(grid, src, out);
        }
    });
    Coeffs::from_raw(grid, 2 * y.n_cols(), data)
}

/// Adjoint of [`iterated_derivative`]: output column `j` gathers the adjoint
/// differences of input columns `2j` and `2j + 1`. Errors on an odd column
/// count.
pub fn iterated_derivative_adjoint(z: &Coeffs) -> Result<Coeffs> {
    if z.n_cols() % 2 != 0 {
        return Err(TgvError::ShapeMismatch(format!(
            "derivative adjoint needs an even column count, found {}",
            z.n_cols()
        )));
    }
    let n = z.n_pixels();
    let grid = z.grid();
    let data = parallel::fill_columns(n, z.n_cols() / 2, |j, out| {
        dx_adjoint_slice(grid, z.col(2 * j), out);
        dy_adjoint_add_slice(grid, z.col(2 * j + 1), out);
    });
    Ok(Coeffs::from_raw(grid, z.n_cols() / 2, data))
}
