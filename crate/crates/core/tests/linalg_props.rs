mod common;

use broyden_core::harness::{run_rng, uniform_symmetric};
use broyden_core::linalg::{lu_solve, rank_one_update, singular_values, Matrix, PrecisionContext, Vector};
use proptest::prelude::*;
use rug::Float;

fn ctx() -> PrecisionContext {
    PrecisionContext::with_digits(100).unwrap()
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn matrix(n: usize, vals: &[f64], ctx: &PrecisionContext) -> Matrix {
    Matrix::from_fn(n, ctx, |i, j| ctx.real(vals[i * n + j]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_one_update_adds_outer_product(n in 1usize..5, seed in any::<u64>()) {
        let ctx = ctx();
        let mut rng = run_rng(seed, 0);
        let mut draw = || uniform_symmetric(&mut rng, &ctx);
        let b = Matrix::from_fn(n, &ctx, |_, _| draw());
        let v = Vector::from_reals((0..n).map(|_| draw()).collect(), &ctx);
        let w = Vector::from_reals((0..n).map(|_| draw()).collect(), &ctx);
        let before = b.clone();
        let up = rank_one_update(&b, &v, &w).unwrap();
        prop_assert_eq!(&b, &before);
        for i in 0..n {
            for j in 0..n {
                let expected = Float::with_val(ctx.bits(), &v[i] * &w[j]) + &b[(i, j)];
                prop_assert_eq!(&up[(i, j)], &expected);
            }
        }
    }

    #[test]
    fn outer_product_norm_with_unit_vector(v in entries(4), w in entries(4)) {
        prop_assume!(w.iter().any(|x| x.abs() > 1e-3));
        let ctx = ctx();
        let v = Vector::from_f64(&v, &ctx);
        let w = Vector::from_f64(&w, &ctx).normalized();
        let norm = Matrix::outer(&v, &w, &ctx).unwrap().spectral_norm(&ctx).unwrap();
        let diff = Float::with_val(ctx.bits(), &norm - v.norm2()).abs();
        prop_assert!(diff <= ctx.floor(15));
    }

    #[test]
    fn lu_residual_is_backward_stable(n in 1usize..5, vals in entries(16), rhs in entries(4)) {
        let ctx = ctx();
        let a = matrix(n, &vals, &ctx);
        let b = Vector::from_f64(&rhs[..n], &ctx);
        if let Ok(x) = lu_solve(&a, &b, &ctx) {
            let residual = (&a.mul_vec(&x) - &b).norm2();
            let bound = ctx.unit_roundoff() * (100 * n) as u32 * a.frobenius_norm() * x.norm2();
            prop_assert!(residual <= bound, "residual {} bound {}", residual, bound);
        }
    }

    #[test]
    fn singular_values_are_sorted_and_bound_the_matrix(n in 1usize..5, vals in entries(16), x in entries(4)) {
        let ctx = ctx();
        let a = matrix(n, &vals, &ctx);
        let sv = singular_values(&a, &ctx).unwrap();
        prop_assert_eq!(sv.len(), n);
        prop_assert!(sv.iter().all(|s| !s.is_sign_negative()));
        prop_assert!(sv.windows(2).all(|w| w[0] <= w[1]));
        // ‖Ax‖ ≤ σ_max ‖x‖ and the Frobenius norm is the root of the sum of squares.
        let x = Vector::from_f64(&x[..n], &ctx);
        let top = sv.last().unwrap();
        let slack = ctx.floor(20);
        prop_assert!(a.mul_vec(&x).norm2() <= Float::with_val(ctx.bits(), top * x.norm2()) + &slack);
        let fro = sv.iter().fold(ctx.zero(), |acc, s| acc + Float::with_val(ctx.bits(), s.square_ref())).sqrt();
        prop_assert!(Float::with_val(ctx.bits(), &fro - a.frobenius_norm()).abs() <= slack);
        let sv_t = singular_values(&a.transpose(), &ctx).unwrap();
        for (p, q) in sv.iter().zip(&sv_t) {
            prop_assert!(Float::with_val(ctx.bits(), p - q).abs() <= slack);
        }
    }
}

#[test]
fn singular_values_match_characteristic_polynomial_oracle() {
    let ctx = ctx();
    let tol = ctx.pow10(-30);
    for trial in 0..50u64 {
        let n = if trial % 2 == 0 { 2 } else { 3 };
        let mut rng = run_rng(2024, trial);
        let vals: Vec<_> = (0..n * n).map(|_| uniform_symmetric(&mut rng, &ctx)).collect();
        let a = Matrix::from_fn(n, &ctx, |i, j| vals[i * n + j].clone());
        let got = singular_values(&a, &ctx).unwrap();
        let want = common::sv_oracle(&a, &ctx);
        for (g, w) in got.iter().zip(&want) {
            assert!(common::rel_diff(g, w) <= tol, "trial {trial}: {g} vs {w}");
        }
    }
}
