//! Cross-checks between the two field shapes: the lift intertwines the
//! derivative operators, costs and objectives are invariant under it, and
//! both evaluation routes reach the same infimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tgv_core::eval::{
    eval_tgv_compact, eval_tgv_direct, eval_tv, objective_compact, objective_direct, EvalConfig,
    TgvParams,
};
use tgv_core::grid::{Coeffs, Grid, Image};
use tgv_core::norms::mixed_norm;
use tgv_core::operators::{
    compact_sym_derivative, direct_sym_derivative, lift_compact_to_direct,
    project_direct_to_compact, symmetry_spread, CompactField, DirectField,
};

fn random_image(rng: &mut ChaCha8Rng, grid: Grid) -> Image {
    let data = (0..grid.n_pixels()).map(|_| rng.gen_range(0.0..1.0)).collect();
    Image::new(grid, data).unwrap()
}

fn random_coeffs(rng: &mut ChaCha8Rng, grid: Grid, cols: usize) -> Coeffs {
    let data = (0..grid.n_pixels() * cols)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    Coeffs::from_flat(grid, cols, data).unwrap()
}

#[test]
fn lift_intertwines_the_two_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let grid = Grid::new(8, 8).unwrap();
    for k in 0..=4usize {
        for _ in 0..10 {
            let p = random_coeffs(&mut rng, grid, k + 1);
            let via_direct = direct_sym_derivative(&lift_compact_to_direct(&p, k).unwrap(), k)
                .unwrap();
            let via_compact =
                lift_compact_to_direct(&compact_sym_derivative(&p, k).unwrap(), k + 1).unwrap();
            let diff = (&via_direct - &via_compact).max_abs();
            assert!(
                diff <= 1e-12,
                "derivative routes disagree at order {k}: {diff:.3e}"
            );
        }
    }
}

#[test]
fn costs_agree_between_the_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let grid = Grid::new(8, 8).unwrap();
    for k in 0..=4usize {
        for _ in 0..25 {
            let p = random_coeffs(&mut rng, grid, k + 1);
            let lifted = lift_compact_to_direct(&p, k).unwrap();
            let a = mixed_norm(&p);
            let b = mixed_norm(&lifted);
            assert!((a - b).abs() <= 1e-10 * a.max(1.0));

            let ca = mixed_norm(&compact_sym_derivative(&p, k).unwrap());
            let cb = mixed_norm(&direct_sym_derivative(&lifted, k).unwrap());
            assert!(
                (ca - cb).abs() <= 1e-10 * ca.max(1.0),
                "derivative costs disagree at order {k}"
            );
        }
    }
}

#[test]
fn objectives_are_invariant_under_lifting() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let grid = Grid::new(8, 8).unwrap();
    for n in 2..=4usize {
        let g = random_image(&mut rng, grid);
        let params = TgvParams::from_scalar(n, 0.7).unwrap();
        for _ in 0..10 {
            let compact: Vec<CompactField> = (1..n)
                .map(|k| CompactField::new(k, random_coeffs(&mut rng, grid, k + 1)).unwrap())
                .collect();
            let direct: Vec<DirectField> = compact
                .iter()
                .map(|f| {
                    let lifted = lift_compact_to_direct(f.coeffs(), f.order()).unwrap();
                    DirectField::new(f.order(), lifted).unwrap()
                })
                .collect();
            let a = objective_compact(&g, &compact, &params).unwrap();
            let b = objective_direct(&g, &direct, &params).unwrap();
            assert!(
                (a - b).abs() <= 1e-10 * a.max(1.0),
                "objectives disagree at order {n}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn chained_compact_derivatives_reproduce_stacked_tv() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let grid = Grid::new(9, 7).unwrap();
    let g = random_image(&mut rng, grid);
    let mut layer = compact_sym_derivative(&g.to_coeffs(), 0).unwrap();
    for n in 2..=4usize {
        layer = compact_sym_derivative(&layer, n - 1).unwrap();
        let tv = eval_tv(&g, n).unwrap();
        let chained = mixed_norm(&layer);
        assert!(
            (chained - tv).abs() <= 1e-12 * tv,
            "order {n}: chained {chained} vs stacked {tv}"
        );
    }
}

#[test]
fn both_evaluation_routes_reach_the_same_infimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let grid = Grid::new(8, 8).unwrap();
    let g = random_image(&mut rng, grid);
    let params = TgvParams::new(vec![1.0, 2.0]).unwrap();
    let cfg = EvalConfig {
        tol: 1e-9,
        max_iters: 30_000,
        seed: 0,
    };
    let compact = eval_tgv_compact(&g, &params, &cfg).unwrap();
    let direct = eval_tgv_direct(&g, &params, &cfg).unwrap();
    let rel = (compact.value - direct.value).abs() / compact.value;
    assert!(
        rel <= 1e-4,
        "infima disagree: compact {} vs direct {} (rel {rel:.3e})",
        compact.value,
        direct.value
    );
}

#[test]
fn direct_evaluation_returns_symmetric_layers() {
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let grid = Grid::new(8, 8).unwrap();
    let g = random_image(&mut rng, grid);
    let params = TgvParams::new(vec![1.0, 2.0, 4.0]).unwrap();
    let cfg = EvalConfig {
        tol: 1e-7,
        max_iters: 5000,
        seed: 0,
    };
    let out = eval_tgv_direct(&g, &params, &cfg).unwrap();
    assert_eq!(out.fields.len(), 2);
    for f in &out.fields {
        let spread = symmetry_spread(f.coeffs(), f.order()).unwrap();
        assert!(spread <= 1e-10, "layer {} spread {spread:.3e}", f.order());
    }
    // Squeezing the layers through the compact shape preserves the objective.
    let compact: Vec<CompactField> = out
        .fields
        .iter()
        .map(|f| {
            let c = project_direct_to_compact(f.coeffs(), f.order()).unwrap();
            CompactField::new(f.order(), c).unwrap()
        })
        .collect();
    let via_compact = objective_compact(&g, &compact, &params).unwrap();
    assert!((via_compact - out.value).abs() <= 1e-8 * out.value.max(1.0));
}

#[test]
fn extreme_weights_recover_the_pure_regularizers() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let grid = Grid::new(8, 8).unwrap();
    let g = random_image(&mut rng, grid);
    let cfg = EvalConfig {
        tol: 1e-9,
        max_iters: 20_000,
        seed: 0,
    };

    // A huge first-order weight forces the first layer onto the gradient, so
    // the value collapses to the second-order stacked cost.
    let heavy_first = TgvParams::new(vec![1.0, 1e6]).unwrap();
    let out = eval_tgv_compact(&g, &heavy_first, &cfg).unwrap();
    let tv2 = eval_tv(&g, 2).unwrap();
    assert!(
        (out.value - tv2).abs() <= 1e-2 * tv2,
        "expected {tv2}, got {}",
        out.value
    );

    // A huge top weight pushes the layer to (a constant shift of) zero and
    // the value collapses to the first-order cost.
    let heavy_top = TgvParams::new(vec![1e6, 1.0]).unwrap();
    let out = eval_tgv_compact(&g, &heavy_top, &cfg).unwrap();
    let tv1 = eval_tv(&g, 1).unwrap();
    assert!(
        (out.value - tv1).abs() <= 1e-2 * tv1,
        "expected {tv1}, got {}",
        out.value
    );
}

#[test]
fn evaluation_is_bitwise_reproducible_across_thread_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let grid = Grid::new(8, 8).unwrap();
    let g = random_image(&mut rng, grid);
    let params = TgvParams::new(vec![1.0, 2.0]).unwrap();
    let cfg = EvalConfig {
        tol: 1e-7,
        max_iters: 2000,
        seed: 0,
    };
    tgv_core::parallel::set_threads(1);
    let a = eval_tgv_compact(&g, &params, &cfg).unwrap();
    tgv_core::parallel::set_threads(4);
    let b = eval_tgv_compact(&g, &params, &cfg).unwrap();
    tgv_core::parallel::set_threads(1);
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.iterations, b.iterations);
    for (fa, fb) in a.fields.iter().zip(&b.fields) {
        assert_eq!(fa.coeffs().data(), fb.coeffs().data());
    }
}

#[test]
fn shifting_the_image_does_not_change_the_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    let grid = Grid::new(8, 8).unwrap();
    let g = random_image(&mut rng, grid);
    // Circular shift by (2, 3); the differences wrap, so the regularizer is
    // translation invariant and both runs chase the same infimum.
    let mut shifted = vec![0.0; grid.n_pixels()];
    for r in 0..8 {
        for c in 0..8 {
            shifted[grid.index((r + 2) % 8, (c + 3) % 8)] = g.data()[grid.index(r, c)];
        }
    }
    let shifted = Image::new(grid, shifted).unwrap();
    let params = TgvParams::new(vec![1.0, 2.0]).unwrap();
    let cfg = EvalConfig {
        tol: 1e-9,
        max_iters: 30_000,
        seed: 0,
    };
    let a = eval_tgv_compact(&g, &params, &cfg).unwrap();
    let b = eval_tgv_compact(&shifted, &params, &cfg).unwrap();
    assert!(
        (a.value - b.value).abs() <= 1e-4 * a.value,
        "shift changed the value: {} vs {}",
        a.value,
        b.value
    );
    assert!((eval_tv(&g, 1).unwrap() - eval_tv(&shifted, 1).unwrap()).abs() <= 1e-12);
}
