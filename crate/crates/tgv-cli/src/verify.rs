//! A self-contained verification suite over the library's numerical
//! identities: orthonormality and inverse relations of the scaling matrices,
//! projector laws, adjoint pairings for every operator, lifting invariances,
//! proximal identities, and agreement of the two evaluation routes.
//!
//! Every check draws its data from one seeded generator, so a run is fully
//! reproducible. The optional fault injection perturbs a scaling matrix
//! before the orthonormality check, which demonstrates that the suite
//! actually detects a broken matrix rather than vacuously passing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tgv_core::combinatorics::enumerate_permutations;
use tgv_core::eval::{
    eval_tgv_compact, eval_tgv_direct, eval_tv, objective_compact, objective_direct, EvalConfig,
    TgvParams,
};
use tgv_core::grid::{
    dx, dx_adjoint, dy, dy_adjoint, iterated_derivative, iterated_derivative_adjoint, Coeffs,
    Grid, Image,
};
use tgv_core::norms::{mixed_norm, prox_mixed_norm, project_rows_l2_ball};
use tgv_core::operators::{
    compact_sym_derivative, compact_sym_derivative_adjoint, direct_sym_derivative,
    direct_sym_derivative_adjoint, lift_compact_to_direct, pi_project,
    pi_project_with_permutations, project_direct_to_compact, CompactField, DirectField,
    ScalingMatrix,
};
use tgv_core::solver::Kernel;
use tgv_core::Result;

/// Controls for the verification suite.
#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Largest field order exercised by the order-indexed checks.
    pub max_order: usize,
    /// Random repetitions per check.
    pub trials: usize,
    /// Perturb a scaling matrix to prove the suite catches broken inputs.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_order: 6,
            trials: 20,
            inject_fault: false,
        }
    }
}

/// One verified identity: the largest error observed and the bound it must
/// stay under.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_err: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_err <= self.tol
    }
}

fn random_image(rng: &mut ChaCha8Rng, grid: Grid) -> Image {
    let data = (0..grid.n_pixels()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Image::new(grid, data).expect("sized to match")
}

fn random_coeffs(rng: &mut ChaCha8Rng, grid: Grid, cols: usize) -> Coeffs {
    let data = (0..grid.n_pixels() * cols)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    Coeffs::from_flat(grid, cols, data).expect("sized to match")
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Runs every check and returns the results in a fixed order.
pub fn run_all(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let grid = Grid::new(7, 6)?;
    let trials = opts.trials.max(1);
    let k_max = opts.max_order;
    let mut results = Vec::new();

    // Orthonormality of the scaling matrices, the fault-injection target.
    {
        let fault_order = 2.min(k_max);
        let mut err = 0.0f64;
        for k in 0..=k_max {
            let m = if opts.inject_fault && k == fault_order {
                let base = ScalingMatrix::new(k);
                let mut entries = Vec::with_capacity(base.n_rows() * base.n_cols());
                for r in 0..base.n_rows() {
                    for c in 0..base.n_cols() {
                        entries.push(base.entry(r, c));
                    }
                }
                entries[2 * base.n_cols() + 1] += 0.25;
                ScalingMatrix::from_entries(k, entries)?
            } else {
                ScalingMatrix::new(k)
            };
            for i in 0..m.n_cols() {
                for j in 0..m.n_cols() {
                    let dot: f64 = (0..m.n_rows()).map(|r| m.entry(r, i) * m.entry(r, j)).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    err = err.max((dot - want).abs());
                }
            }
        }
        results.push(CheckResult {
            name: "scaling_columns_orthonormal",
            max_err: err,
            tol: 1e-14,
        });
    }

    // The adjoint is a right inverse of the scaling application.
    {
        let mut err = 0.0f64;
        for k in 0..=k_max {
            let m = ScalingMatrix::new(k);
            for _ in 0..trials {
                let q = random_coeffs(&mut rng, grid, k + 2);
                let back = m.apply(&m.apply_adjoint(&q)?)?;
                err = err.max((&back - &q).max_abs());
            }
        }
        results.push(CheckResult {
            name: "scaling_adjoint_right_inverse",
            max_err: err,
            tol: 1e-14,
        });
    }

    // Projector laws.
    {
        let mut err = 0.0f64;
        for k in 0..=k_max {
            for _ in 0..trials {
                let p = random_coeffs(&mut rng, grid, 1 << k);
                let once = pi_project(&p, k)?;
                let twice = pi_project(&once, k)?;
                err = err.max((&twice - &once).max_abs());
            }
        }
        results.push(CheckResult {
            name: "projector_idempotent",
            max_err: err,
            tol: 1e-14,
        });
    }
    {
        let mut err = 0.0f64;
        for k in 0..=k_max {
            for _ in 0..trials {
                let p = random_coeffs(&mut rng, grid, 1 << k);
                let q = random_coeffs(&mut rng, grid, 1 << k);
                let lhs = pi_project(&p, k)?.frobenius_dot(&q);
                let rhs = p.frobenius_dot(&pi_project(&q, k)?);
                err = err.max((lhs - rhs).abs() / lhs.abs().max(1.0));
            }
        }
        results.push(CheckResult {
            name: "projector_self_adjoint",
            max_err: err,
            tol: 1e-12,
        });
    }

    // The permutation route must not care how the symmetric group is
    // enumerated; sorted index gathering makes the two orders agree exactly.
    {
        let mut err = 0.0f64;
        for k in 1..=k_max.min(5) {
            let perms = enumerate_permutations(k)?;
            let mut reversed = perms.clone();
            reversed.reverse();
            for _ in 0..trials.min(5) {
                let p = random_coeffs(&mut rng, grid, 1 << k);
                let a = pi_project_with_permutations(&p, k, &perms)?;
                let b = pi_project_with_permutations(&p, k, &reversed)?;
                let exact = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .all(|(x, y)| x.to_bits() == y.to_bits());
                if !exact {
                    err = err.max((&a - &b).max_abs().max(f64::MIN_POSITIVE));
                }
            }
        }
        results.push(CheckResult {
            name: "projector_enumeration_invariant",
            max_err: err,
            tol: 0.0,
        });
    }
    {
        let mut err = 0.0f64;
        for k in 1..=k_max.min(5) {
            let perms = enumerate_permutations(k)?;
            for _ in 0..trials.min(5) {
                let p = random_coeffs(&mut rng, grid, 1 << k);
                let via_orbits = pi_project(&p, k)?;
                let via_perms = pi_project_with_permutations(&p, k, &perms)?;
                err = err.max((&via_orbits - &via_perms).max_abs());
            }
        }
        results.push(CheckResult {
            name: "projector_routes_agree",
            max_err: err,
            tol: 1e-13,
        });
    }

    // Adjoint pairings for every operator.
    {
        let mut err = 0.0f64;
        for _ in 0..trials {
            let u = random_image(&mut rng, grid);
            let v = random_image(&mut rng, grid);
            let dot =
                |a: &Image, b: &Image| a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum::<f64>();
            err = err.max(rel_gap(dot(&dx(&u), &v), dot(&u, &dx_adjoint(&v))));
            err = err.max(rel_gap(dot(&dy(&u), &v), dot(&u, &dy_adjoint(&v))));
        }
        results.push(CheckResult {
            name: "adjoint_differences",
            max_err: err,
            tol: 1e-12,
        });
    }
    {
        let mut err = 0.0f64;
        for cols in [1usize, 2, 4] {
            for _ in 0..trials {
                let y = random_coeffs(&mut rng, grid, cols);
                let z = random_coeffs(&mut rng, grid, 2 * cols);
                let lhs = iterated_derivative(&y).frobenius_dot(&z);
                let rhs = y.frobenius_dot(&iterated_derivative_adjoint(&z)?);
                err = err.max(rel_gap(lhs, rhs));
            }
        }
        results.push(CheckResult {
            name: "adjoint_iterated_derivative",
            max_err: err,
            tol: 1e-12,
        });
    }
    {
        let mut err = 0.0f64;
        for k in 0..=k_max {
            let m = ScalingMatrix::new(k);
            for _ in 0..trials {
                let z = random_coeffs(&mut rng, grid, 2 * k + 2);
                let q = random_coeffs(&mut rng, grid, k + 2);
                let lhs = m.apply(&z)?.frobenius_dot(&q);
                let rhs = z.frobenius_dot(&m.apply_adjoint(&q)?);
                err = err.max(rel_gap(lhs, rhs));
            }
        }
        results.push(CheckResult {
            name: "adjoint_scaling",
            max_err: err,
            tol: 1e-12,
        });
    }
    {
        let mut err = 0.0f64;
        for k in 0..=k_max.min(4) {
            for _ in 0..trials {
                let p = random_coeffs(&mut rng, grid, k + 1);
                let q = random_coeffs(&mut rng, grid, k + 2);
                let lhs = compact_sym_derivative(&p, k)?.frobenius_dot(&q);
                let rhs = p.frobenius_dot(&compact_sym_derivative_adjoint(&q, k)?);
                err = err.max(rel_gap(lhs, rhs));
            }
        }
        results.push(CheckResult {
            name: "adjoint_compact_derivative",
            max_err: err,
            tol: 1e-12,
        });
    }
    {
        let mut err = 0.0f64;
        for k in 0..=k_max.min(4) {
            for _ in 0..trials {
                let u = random_coeffs(&mut rng, grid, 1 << k);
                let z = random_coeffs(&mut rng, grid, 1 << (k + 1));
                let lhs = direct_sym_derivative(&u, k)?.frobenius_dot(&z);
                let rhs = u.frobenius_dot(&direct_sym_derivative_adjoint(&z, k)?);
                err = err.max(rel_gap(lhs, rhs));
            }
        }
        results.push(CheckResult {
            name: "adjoint_direct_derivative",
            max_err: err,
            tol: 1e-12,
        });
    }
    {
        let mut err = 0.0f64;
        for _ in 0..trials {
            let taps: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let kernel = Kernel::new(3, 3, taps)?;
            let u = random_image(&mut rng, grid);
            let v = random_image(&mut rng, grid);
            let dot =
                |a: &Image, b: &Image| a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum::<f64>();
            err = err.max(rel_gap(
                dot(&kernel.convolve(&u), &v),
                dot(&u, &kernel.correlate(&v)),
            ));
        }
        results.push(CheckResult {
            name: "adjoint_convolution",
            max_err: err,
            tol: 1e-12,
        });
    }

    // Lifting: a lossless round trip that preserves costs and intertwines
    // the derivatives.
    {
        let mut err = 0.0f64;
        for k in 0..=k_max {
            for _ in 0..trials {
                let p = random_coeffs(&mut rng, grid, k + 1);
                let back = project_direct_to_compact(&lift_compact_to_direct(&p, k)?, k)?;
                err = err.max((&back - &p).max_abs());
            }
        }
        results.push(CheckResult {
            name: "lift_round_trip",
            max_err: err,
            tol: 1e-13,
        });
    }
    {
        let mut err = 0.0f64;
        for k in 0..=k_max {
            for _ in 0..trials {
                let p = random_coeffs(&mut rng, grid, k + 1);
                let lifted = lift_compact_to_direct(&p, k)?;
                err = err.max(rel_gap(mixed_norm(&p), mixed_norm(&lifted)));
            }
        }
        results.push(CheckResult {
            name: "lift_preserves_costs",
            max_err: err,
            tol: 1e-13,
        });
    }
    {
        let mut err = 0.0f64;
        for k in 0..=k_max.min(4) {
            for _ in 0..trials.min(10) {
                let p = random_coeffs(&mut rng, grid, k + 1);
                let via_direct = direct_sym_derivative(&lift_compact_to_direct(&p, k)?, k)?;
                let via_compact =
                    lift_compact_to_direct(&compact_sym_derivative(&p, k)?, k + 1)?;
                err = err.max((&via_direct - &via_compact).max_abs());
                err = err.max(rel_gap(mixed_norm(&via_direct), mixed_norm(&via_compact)));
            }
        }
        results.push(CheckResult {
            name: "lift_intertwines_derivatives",
            max_err: err,
            tol: 1e-12,
        });
    }
    {
        let mut err = 0.0f64;
        for n in 2..=k_max.max(2).min(4) {
            let g = random_image(&mut rng, grid);
            let params = TgvParams::from_scalar(n, 0.8)?;
            for _ in 0..trials.min(10) {
                let compact: Vec<CompactField> = (1..n)
                    .map(|k| CompactField::new(k, random_coeffs(&mut rng, grid, k + 1)))
                    .collect::<Result<_>>()?;
                let direct: Vec<DirectField> = compact
                    .iter()
                    .map(|f| {
                        DirectField::new(
                            f.order(),
                            lift_compact_to_direct(f.coeffs(), f.order())?,
                        )
                    })
                    .collect::<Result<_>>()?;
                let a = objective_compact(&g, &compact, &params)?;
                let b = objective_direct(&g, &direct, &params)?;
                err = err.max(rel_gap(a, b));
            }
        }
        results.push(CheckResult {
            name: "objective_lift_invariant",
            max_err: err,
            tol: 1e-10,
        });
    }

    // Proximal identities for the row-wise norm.
    {
        let mut err = 0.0f64;
        for cols in [2usize, 3] {
            for _ in 0..trials {
                let a = random_coeffs(&mut rng, grid, cols);
                let alpha = rng.gen_range(0.2..2.0);
                let split = &prox_mixed_norm(&a, alpha)? + &project_rows_l2_ball(&a, alpha)?;
                err = err.max((&split - &a).max_abs());
            }
        }
        results.push(CheckResult {
            name: "prox_moreau_split",
            max_err: err,
            tol: 1e-14,
        });
    }
    {
        // No candidate may undercut the proximal objective by more than the
        // tolerance; the reported error is the worst undercut found.
        let mut err = 0.0f64;
        for _ in 0..trials {
            let a = random_coeffs(&mut rng, grid, 2);
            let lambda = rng.gen_range(0.3..1.5);
            let p = prox_mixed_norm(&a, lambda)?;
            let value = |z: &Coeffs| lambda * mixed_norm(z) + 0.5 * (z - &a).frobenius_dot(&(z - &a));
            let best = value(&p);
            for _ in 0..40 {
                let cand = if rng.gen_bool(0.5) {
                    random_coeffs(&mut rng, grid, 2)
                } else {
                    &p + &(&random_coeffs(&mut rng, grid, 2) * rng.gen_range(1e-4..1e-1))
                };
                err = err.max(best - value(&cand));
            }
        }
        results.push(CheckResult {
            name: "prox_not_undercut",
            max_err: err,
            tol: 1e-9,
        });
    }

    // Stacked total variation agrees with chained compact derivatives.
    {
        let mut err = 0.0f64;
        for _ in 0..trials.min(10) {
            let g = random_image(&mut rng, grid);
            let mut layer = compact_sym_derivative(&g.to_coeffs(), 0)?;
            for n in 2..=4usize {
                layer = compact_sym_derivative(&layer, n - 1)?;
                err = err.max(rel_gap(mixed_norm(&layer), eval_tv(&g, n)?));
            }
        }
        results.push(CheckResult {
            name: "tv_matches_derivative_chain",
            max_err: err,
            tol: 1e-12,
        });
    }

    // Both evaluation routes chase the same infimum; a short run on a small
    // image keeps this end-to-end check quick.
    {
        let g = random_image(&mut rng, grid);
        let params = TgvParams::new(vec![1.0, 2.0])?;
        let cfg = EvalConfig {
            tol: 1e-8,
            max_iters: 4000,
            seed: opts.seed,
        };
        let a = eval_tgv_compact(&g, &params, &cfg)?;
        let b = eval_tgv_direct(&g, &params, &cfg)?;
        results.push(CheckResult {
            name: "evaluation_routes_agree",
            max_err: rel_gap(a.value, b.value),
            tol: 1e-3,
        });
    }

    Ok(results)
}
