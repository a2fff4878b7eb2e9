//! Regularizer evaluation in both field shapes.
//!
//! Order-n TGV of an image g is the infimum over derivative layers
//! `p_1, ..., p_{n-1}` of the weighted sum of mixed norms of the coupling
//! residuals `sym_derivative(p_i) - p_{i+1}`, with `p_0 = g` fixed and
//! `p_n = 0`. The layers live either in the compact shape (`i + 1` columns at
//! layer i) or in the direct shape (`2^i` columns, constrained to the
//! symmetric range); both infima coincide and the two routes here let tests
//! confirm that numerically.
//!
//! The infimum is computed with a first-order primal-dual scheme: one dual
//! block per residual term, projected onto its weight's row ball, and plain
//! (or projected, in the direct shape) gradient steps on the layers. The
//! solver starts from the better of the two canonical decompositions (all
//! layers zero, or each layer the derivative of the previous one), tracks the
//! best objective seen, and stops when the raw objective moves less than a
//! relative tolerance across a ten-iteration window.

use std::collections::VecDeque;

use crate::error::{Result, TgvError};
use crate::grid::{iterated_derivative, Coeffs, Image};
use crate::norms::{mixed_norm, project_rows_l2_ball};
use crate::operators::{
    compact_sym_derivative, compact_sym_derivative_adjoint, direct_sym_derivative,
    direct_sym_derivative_adjoint, pi_project, CompactField, DirectField, MAX_DIRECT_ORDER,
};
use crate::solver::{estimate_operator_norm, PowerIterConfig};

/// Largest order accepted by the direct evaluation route
/// (`2^{n-1}`-column top layer).
pub const MAX_DIRECT_EVAL_ORDER: usize = 8;

/// Convergence is judged on the objective across this many iterations.
const WINDOW: usize = 10;

/// Order and per-term weights of a TGV regularizer. `alphas[n-1]` multiplies
/// the first-order coupling term (image gradient minus first layer) and
/// `alphas[0]` the top-order term, so sending `alphas[n-1]` to infinity
/// recovers pure n-th order smoothing and sending `alphas[0]` to infinity
/// recovers first-order total variation.
#[derive(Clone, Debug, PartialEq)]
pub struct TgvParams {
    alphas: Vec<f64>,
}

impl TgvParams {
    /// Wraps the weight list `alpha_0, ..., alpha_{n-1}`; the order is its
    /// length. All weights must be finite and positive.
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(TgvError::InvalidArgument(
                "at least one weight is required".into(),
            ));
        }
        if let Some(bad) = alphas.iter().find(|a| !a.is_finite() || **a <= 0.0) {
            return Err(TgvError::InvalidArgument(format!(
                "weights must be finite and positive, got {bad}"
            )));
        }
        Ok(Self { alphas })
    }

    /// The doubling pattern `(a, 2a, ..., 2^{n-1} a)`, which puts the largest
    /// weight on the first-order coupling term.
    pub fn from_scalar(order: usize, base: f64) -> Result<Self> {
        if order == 0 || order > 63 {
            return Err(TgvError::InvalidArgument(format!(
                "order must be between 1 and 63, got {order}"
            )));
        }
        Self::new((0..order).map(|i| base * (1u64 << i) as f64).collect())
    }

    pub fn order(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Weight on coupling term `i` (the residual between the derivative of
    /// layer i and layer i+1): `alphas[order - 1 - i]`.
    pub fn weight(&self, term: usize) -> f64 {
        self.alphas[self.order() - 1 - term]
    }
}

/// Iteration controls for the evaluation scheme.
#[derive(Clone, Debug)]
pub struct EvalConfig {
    /// Relative objective-change tolerance across the convergence window.
    pub tol: f64,
    pub max_iters: usize,
    /// Seed for the power-iteration start used to size the steps.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 20_000,
            seed: 0,
        }
    }
}

/// Outcome of an evaluation: the regularizer value, the minimizing layers,
/// and how the iteration ended. `value` is always the objective of `fields`.
#[derive(Clone, Debug)]
pub struct EvalResult<F> {
    pub value: f64,
    pub fields: Vec<F>,
    pub iterations: usize,
    /// Relative objective variation across the final window; zero for exact
    /// (order-1) evaluations.
    pub residual: f64,
    pub converged: bool,
}

/// n-th order total variation: the mixed norm of the n-fold stacked
/// derivative of g (2^n columns, no infimal decomposition).
pub fn eval_tv(g: &Image, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(TgvError::InvalidArgument("order must be at least 1".into()));
    }
    if n > MAX_DIRECT_ORDER {
        return Err(TgvError::CapacityExceeded(format!(
            "order {n} exceeds the supported maximum {MAX_DIRECT_ORDER}"
        )));
    }
    let mut stack = g.to_coeffs();
    for _ in 0..n {
        stack = iterated_derivative(&stack);
    }
    Ok(mixed_norm(&stack))
}

/// The two field shapes share one iteration; this trait carries the
/// shape-specific pieces.
pub(crate) trait Form {
    fn block_cols(&self, i: usize) -> usize;
    fn term_cols(&self, i: usize) -> usize;
    fn deriv(&self, i: usize, p: &Coeffs) -> Result<Coeffs>;
    fn deriv_adjoint(&self, i: usize, q: &Coeffs) -> Result<Coeffs>;
    /// Feasibility projection for layer `i`; identity in the compact shape.
    fn constrain(&self, i: usize, p: Coeffs) -> Result<Coeffs>;
}

pub(crate) struct CompactForm;

impl Form for CompactForm {
    fn block_cols(&self, i: usize) -> usize {
        i + 1
    }

    fn term_cols(&self, i: usize) -> usize {
        i + 2
    }

    fn deriv(&self, i: usize, p: &Coeffs) -> Result<Coeffs> {
        compact_sym_derivative(p, i)
    }

    fn deriv_adjoint(&self, i: usize, q: &Coeffs) -> Result<Coeffs> {
        compact_sym_derivative_adjoint(q, i)
    }

    fn constrain(&self, _i: usize, p: Coeffs) -> Result<Coeffs> {
        Ok(p)
    }
}

pub(crate) struct DirectForm;

impl Form for DirectForm {
    fn block_cols(&self, i: usize) -> usize {
        1 << i
    }

    fn term_cols(&self, i: usize) -> usize {
        1 << (i + 1)
    }

    fn deriv(&self, i: usize, p: &Coeffs) -> Result<Coeffs> {
        direct_sym_derivative(p, i)
    }

    fn deriv_adjoint(&self, i: usize, q: &Coeffs) -> Result<Coeffs> {
        direct_sym_derivative_adjoint(q, i)
    }

    fn constrain(&self, i: usize, p: Coeffs) -> Result<Coeffs> {
        pi_project(&p, i)
    }
}

/// Objective of a decomposition: `b0` is the derivative of the fixed zeroth
/// layer (the image), `blocks` are layers 1 through n-1.
pub(crate) fn decomposition_objective<F: Form>(
    form: &F,
    b0: &Coeffs,
    blocks: &[&Coeffs],
    params: &TgvParams,
) -> Result<f64> {
    let n = params.order();
    debug_assert_eq!(blocks.len(), n - 1);
    if n == 1 {
        return Ok(params.weight(0) * mixed_norm(b0));
    }
    let mut value = params.weight(0) * mixed_norm(&(b0 - blocks[0]));
    for i in 1..n {
        let d = form.deriv(i, blocks[i - 1])?;
        let residual = if i < n - 1 { &d - blocks[i] } else { d };
        value += params.weight(i) * mixed_norm(&residual);
    }
    Ok(value)
}

fn check_eval_config(cfg: &EvalConfig) -> Result<()> {
    if !cfg.tol.is_finite() || cfg.tol <= 0.0 {
        return Err(TgvError::InvalidArgument(format!(
            "tolerance must be finite and positive, got {}",
            cfg.tol
        )));
    }
    if cfg.max_iters == 0 {
        return Err(TgvError::InvalidArgument(
            "iteration limit must be at least 1".into(),
        ));
    }
    Ok(())
}

struct InfimalOutcome {
    value: f64,
    blocks: Vec<Coeffs>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn eval_infimal<F: Form>(
    g: &Image,
    params: &TgvParams,
    cfg: &EvalConfig,
    form: &F,
) -> Result<InfimalOutcome> {
    check_eval_config(cfg)?;
    let n = params.order();
    let grid = g.grid();
    let b0 = form.deriv(0, &g.to_coeffs())?;

    if n == 1 {
        return Ok(InfimalOutcome {
            value: params.weight(0) * mixed_norm(&b0),
            blocks: Vec::new(),
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }

    let objective = |blocks: &[Coeffs]| -> Result<f64> {
        let refs: Vec<&Coeffs> = blocks.iter().collect();
        decomposition_objective(form, &b0, &refs, params)
    };

    // Two canonical decompositions bracket the infimum from above: all-zero
    // layers charge everything to the first-order term, chained derivatives
    // charge everything to the top-order term. Start from the better one.
    let zero_start: Vec<Coeffs> = (1..n)
        .map(|i| Coeffs::zeros(grid, form.block_cols(i)))
        .collect();
    let mut chain_start: Vec<Coeffs> = Vec::with_capacity(n - 1);
    chain_start.push(b0.clone());
    for i in 1..n - 1 {
        let next = form.deriv(i, &chain_start[i - 1])?;
        chain_start.push(next);
    }
    let value_zero = objective(&zero_start)?;
    let value_chain = objective(&chain_start)?;
    let (mut p, start_value) = if value_chain < value_zero {
        (chain_start, value_chain)
    } else {
        (zero_start, value_zero)
    };

    // Step sizes need the norm of the stacked coupling map (the affine offset
    // b0 plays no role there).
    let block_cols: Vec<usize> = (1..n).map(|i| form.block_cols(i)).collect();
    let forward = |x: &[Coeffs]| -> Vec<Coeffs> {
        let mut y = Vec::with_capacity(n);
        y.push(&x[0] * -1.0);
        for i in 1..n {
            let mut t = form.deriv(i, &x[i - 1]).expect("block shapes are fixed");
            if i < n - 1 {
                t -= &x[i];
            }
            y.push(t);
        }
        y
    };
    let adjoint = |y: &[Coeffs]| -> Vec<Coeffs> {
        (1..n)
            .map(|j| {
                let mut z = form
                    .deriv_adjoint(j, &y[j])
                    .expect("block shapes are fixed");
                z -= &y[j - 1];
                z
            })
            .collect()
    };
    let ell = estimate_operator_norm(
        grid,
        &block_cols,
        forward,
        adjoint,
        &PowerIterConfig {
            max_iters: 50,
            tol: 1e-8,
            seed: cfg.seed,
        },
    );
    let step = 0.99 / ell.max(1.0);

    let mut q: Vec<Coeffs> = (0..n)
        .map(|i| Coeffs::zeros(grid, form.term_cols(i)))
        .collect();
    let mut pbar = p.clone();
    let mut best_value = start_value;
    let mut best_blocks = p.clone();
    let mut window: VecDeque<f64> = VecDeque::with_capacity(WINDOW + 1);
    window.push_back(start_value);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        for i in 0..n {
            let mut t = if i == 0 {
                &b0 - &pbar[0]
            } else {
                let mut d = form.deriv(i, &pbar[i - 1])?;
                if i < n - 1 {
                    d -= &pbar[i];
                }
                d
            };
            t.scale(step);
            t += &q[i];
            q[i] = project_rows_l2_ball(&t, params.weight(i))?;
        }
        for j in 1..n {
            let mut grad = form.deriv_adjoint(j, &q[j])?;
            grad -= &q[j - 1];
            let mut next = p[j - 1].clone();
            next.axpy(-step, &grad);
            let next = form.constrain(j, next)?;
            pbar[j - 1] = &(&next * 2.0) - &p[j - 1];
            p[j - 1] = next;
        }
        let value = objective(&p)?;
        if value < best_value {
            best_value = value;
            best_blocks = p.clone();
        }
        window.push_back(value);
        if window.len() > WINDOW + 1 {
            window.pop_front();
        }
        if window.len() == WINDOW + 1 {
            let hi = window.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lo = window.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            residual = (hi - lo) / hi.max(1e-30);
            if residual < cfg.tol {
                converged = true;
                break;
            }
        }
    }

    Ok(InfimalOutcome {
        value: best_value,
        blocks: best_blocks,
        iterations,
        residual,
        converged,
    })
}

/// Objective of an explicit compact decomposition (no minimization): the
/// weighted mixed norms of all coupling residuals with `p_0 = g`.
pub fn objective_compact(g: &Image, fields: &[CompactField], params: &TgvParams) -> Result<f64> {
    let n = params.order();
    if fields.len() != n - 1 {
        return Err(TgvError::ShapeMismatch(format!(
            "order {n} needs {} layers, found {}",
            n - 1,
            fields.len()
        )));
    }
    for (idx, f) in fields.iter().enumerate() {
        if f.order() != idx + 1 || f.coeffs().grid() != g.grid() {
            return Err(TgvError::ShapeMismatch(format!(
                "layer {idx} must have order {} on the image grid",
                idx + 1
            )));
        }
    }
    let form = CompactForm;
    let b0 = form.deriv(0, &g.to_coeffs())?;
    let blocks: Vec<&Coeffs> = fields.iter().map(|f| f.coeffs()).collect();
    decomposition_objective(&form, &b0, &blocks, params)
}

/// Objective of an explicit direct decomposition (no minimization).
pub fn objective_direct(g: &Image, fields: &[DirectField], params: &TgvParams) -> Result<f64> {
    let n = params.order();
    if fields.len() != n - 1 {
        return Err(TgvError::ShapeMismatch(format!(
            "order {n} needs {} layers, found {}",
            n - 1,
            fields.len()
        )));
    }
    for (idx, f) in fields.iter().enumerate() {
        if f.order() != idx + 1 || f.coeffs().grid() != g.grid() {
            return Err(TgvError::ShapeMismatch(format!(
                "layer {idx} must have order {} on the image grid",
                idx + 1
            )));
        }
    }
    let form = DirectForm;
    let b0 = form.deriv(0, &g.to_coeffs())?;
    let blocks: Vec<&Coeffs> = fields.iter().map(|f| f.coeffs()).collect();
    decomposition_objective(&form, &b0, &blocks, params)
}

/// Evaluates order-n TGV in the compact shape. For n = 1 the value
/// `alpha_0 * eval_tv(g, 1)` is exact; otherwise the primal-dual scheme runs
/// until the window criterion or `cfg.max_iters` and the best visited
/// decomposition is returned (flagged via `converged`).
pub fn eval_tgv_compact(
    g: &Image,
    params: &TgvParams,
    cfg: &EvalConfig,
) -> Result<EvalResult<CompactField>> {
    let out = eval_infimal(g, params, cfg, &CompactForm)?;
    let fields = out
        .blocks
        .into_iter()
        .enumerate()
        .map(|(idx, c)| CompactField::new(idx + 1, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalResult {
        value: out.value,
        fields,
        iterations: out.iterations,
        residual: out.residual,
        converged: out.converged,
    })
}

/// Evaluates order-n TGV in the direct shape; layers carry `2^i` columns and
/// every iterate is projected onto the symmetric range. Capped at order
/// [`MAX_DIRECT_EVAL_ORDER`].
pub fn eval_tgv_direct(
    g: &Image,
    params: &TgvParams,
    cfg: &EvalConfig,
) -> Result<EvalResult<DirectField>> {
    if params.order() > MAX_DIRECT_EVAL_ORDER {
        return Err(TgvError::CapacityExceeded(format!(
            "direct evaluation is capped at order {MAX_DIRECT_EVAL_ORDER}, got {}",
            params.order()
        )));
    }
    let out = eval_infimal(g, params, cfg, &DirectForm)?;
    let fields = out
        .blocks
        .into_iter()
        .enumerate()
        .map(|(idx, c)| DirectField::new(idx + 1, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalResult {
        value: out.value,
        fields,
        iterations: out.iterations,
        residual: out.residual,
        converged: out.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dx, dy, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, grid: Grid) -> Image {
        let data = (0..grid.n_pixels()).map(|_| rng.gen_range(0.0..1.0)).collect();
        Image::new(grid, data).unwrap()
    }

    #[test]
    fn tv_worked_example() {
        let grid = Grid::new(2, 2).unwrap();
        let img = Image::new(grid, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        // Every pixel has |dx| = 1 and |dy| = 2.
        assert!((eval_tv(&img, 1).unwrap() - 4.0 * 5.0f64.sqrt()).abs() <= 1e-12);
        assert_eq!(eval_tv(&Image::constant(grid, 7.0), 3).unwrap(), 0.0);
        assert!(eval_tv(&img, 0).is_err());
        assert!(eval_tv(&img, MAX_DIRECT_ORDER + 1).is_err());
    }

    #[test]
    fn second_order_tv_from_explicit_second_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let grid = Grid::new(5, 4).unwrap();
        let img = random_image(&mut rng, grid);
        let gx = dx(&img);
        let gy = dy(&img);
        let (xx, xy) = (dx(&gx), dy(&gx));
        let (yx, yy) = (dx(&gy), dy(&gy));
        let mut expected = 0.0;
        for i in 0..grid.n_pixels() {
            expected += (xx.data()[i].powi(2)
                + xy.data()[i].powi(2)
                + yx.data()[i].powi(2)
                + yy.data()[i].powi(2))
            .sqrt();
        }
        assert!((eval_tv(&img, 2).unwrap() - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn params_validation_and_weights() {
        assert!(TgvParams::new(vec![]).is_err());
        assert!(TgvParams::new(vec![1.0, -2.0]).is_err());
        assert!(TgvParams::new(vec![f64::NAN]).is_err());
        let p = TgvParams::new(vec![3.0, 5.0, 7.0]).unwrap();
        assert_eq!(p.order(), 3);
        // Term 0 couples the image gradient and carries the last weight.
        assert_eq!(p.weight(0), 7.0);
        assert_eq!(p.weight(2), 3.0);
        let d = TgvParams::from_scalar(3, 0.5).unwrap();
        assert_eq!(d.alphas(), &[0.5, 1.0, 2.0]);
    }

    #[test]
    fn objective_of_canonical_decompositions() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let grid = Grid::new(6, 6).unwrap();
        let img = random_image(&mut rng, grid);
        let params = TgvParams::new(vec![2.0, 3.0]).unwrap();

        let zero = vec![CompactField::zeros(grid, 1)];
        let j_zero = objective_compact(&img, &zero, &params).unwrap();
        let tv1 = eval_tv(&img, 1).unwrap();
        assert!((j_zero - 3.0 * tv1).abs() <= 1e-12 * j_zero.max(1.0));

        let grad = compact_sym_derivative(&img.to_coeffs(), 0).unwrap();
        let chained = vec![CompactField::new(1, grad).unwrap()];
        let j_chain = objective_compact(&img, &chained, &params).unwrap();
        let tv2 = eval_tv(&img, 2).unwrap();
        assert!((j_chain - 2.0 * tv2).abs() <= 1e-10 * j_chain.max(1.0));
    }

    #[test]
    fn first_order_evaluation_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let grid = Grid::new(7, 5).unwrap();
        let img = random_image(&mut rng, grid);
        let params = TgvParams::new(vec![2.5]).unwrap();
        let out = eval_tgv_compact(&img, &params, &EvalConfig::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
        assert!(out.fields.is_empty());
        assert!((out.value - 2.5 * eval_tv(&img, 1).unwrap()).abs() <= 1e-12 * out.value);
        let direct = eval_tgv_direct(&img, &params, &EvalConfig::default()).unwrap();
        assert!((direct.value - out.value).abs() <= 1e-12 * out.value);
    }

    #[test]
    fn constant_images_evaluate_to_zero() {
        let grid = Grid::new(6, 4).unwrap();
        let img = Image::constant(grid, 0.4);
        let params = TgvParams::new(vec![1.0, 1.0]).unwrap();
        let out = eval_tgv_compact(&img, &params, &EvalConfig::default()).unwrap();
        assert_eq!(out.value, 0.0);
        assert!(out.converged);
    }

    #[test]
    fn value_never_exceeds_the_zero_layer_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let grid = Grid::new(8, 8).unwrap();
        let cfg = EvalConfig {
            tol: 1e-6,
            max_iters: 2000,
            seed: 0,
        };
        for order in [2usize, 3] {
            let img = random_image(&mut rng, grid);
            let params = TgvParams::from_scalar(order, 1.0).unwrap();
            let out = eval_tgv_compact(&img, &params, &cfg).unwrap();
            let bound = params.alphas()[order - 1] * eval_tv(&img, 1).unwrap();
            assert!(out.value <= bound * (1.0 + 1e-12));
            // The reported value is the objective of the returned layers.
            let check = objective_compact(&img, &out.fields, &params).unwrap();
            assert!((check - out.value).abs() <= 1e-12 * out.value.max(1.0));
        }
    }

    #[test]
    fn evaluation_is_positively_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let grid = Grid::new(8, 8).unwrap();
        let img = random_image(&mut rng, grid);
        let scaled = Image::new(
            grid,
            img.data().iter().map(|v| 3.0 * v).collect(),
        )
        .unwrap();
        let params = TgvParams::new(vec![1.0, 2.0]).unwrap();
        let cfg = EvalConfig {
            tol: 1e-9,
            max_iters: 5000,
            seed: 0,
        };
        let a = eval_tgv_compact(&img, &params, &cfg).unwrap();
        let b = eval_tgv_compact(&scaled, &params, &cfg).unwrap();
        assert!((b.value - 3.0 * a.value).abs() <= 1e-4 * b.value);
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let grid = Grid::new(8, 8).unwrap();
        let img = random_image(&mut rng, grid);
        let params = TgvParams::new(vec![1.0, 1.0]).unwrap();
        let cfg = EvalConfig {
            tol: 1e-14,
            max_iters: 3,
            seed: 0,
        };
        let out = eval_tgv_compact(&img, &params, &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
        assert!(out.value.is_finite());
    }

    #[test]
    fn direct_evaluation_rejects_excessive_orders() {
        let grid = Grid::new(4, 4).unwrap();
        let img = Image::zeros(grid);
        let params = TgvParams::from_scalar(MAX_DIRECT_EVAL_ORDER + 1, 1.0).unwrap();
        assert!(matches!(
            eval_tgv_direct(&img, &params, &EvalConfig::default()),
            Err(TgvError::CapacityExceeded(_))
        ));
    }
}
