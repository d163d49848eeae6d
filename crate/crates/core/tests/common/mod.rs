#![allow(dead_code)]

use broyden_core::linalg::{Matrix, PrecisionContext, Real, Vector};
use broyden_core::problems::NonlinearSystem;
use rug::Float;

/// Singular values of a 2×2 or 3×3 matrix from the eigenvalues of `AᵀA`,
/// found as roots of its characteristic polynomial. Ascending.
pub fn sv_oracle(a: &Matrix, ctx: &PrecisionContext) -> Vec<Real> {
    let prec = ctx.bits();
    let n = a.dim();
    let g = a.transpose().matmul(a);
    let det_a = det(a, ctx);
    let c0 = Float::with_val(prec, det_a.square_ref());
    let trace = (0..n).fold(ctx.zero(), |acc, i| acc + &g[(i, i)]);
    let mut eig = match n {
        2 => {
            // λ² − tλ + c0 = 0; the small root as c0 / large to avoid cancellation.
            let disc = Float::with_val(prec, trace.square_ref()) - Float::with_val(prec, &c0 * 4u32);
            let disc = if disc.is_sign_negative() {
                ctx.zero()
            } else {
                disc.sqrt()
            };
            let large = Float::with_val(prec, &trace + &disc) / 2u32;
            let small = if large.is_zero() {
                ctx.zero()
            } else {
                Float::with_val(prec, &c0 / &large)
            };
            vec![small, large]
        }
        3 => {
            let minor = |i: usize, j: usize| {
                Float::with_val(prec, &g[(i, i)] * &g[(j, j)]) - Float::with_val(prec, &g[(i, j)] * &g[(j, i)])
            };
            let c1 = minor(0, 1) + minor(0, 2) + minor(1, 2);
            // p(λ) = λ³ − tλ² + c1λ − c0; Newton from λ = t decreases
            // monotonically to the largest root.
            let p = |x: &Float| {
                let x2 = Float::with_val(prec, x.square_ref());
                let v = Float::with_val(prec, &x2 * x) - Float::with_val(prec, &trace * &x2)
                    + Float::with_val(prec, &c1 * x)
                    - &c0;
                let d = Float::with_val(prec, &x2 * 3u32) - Float::with_val(prec, &trace * x) * 2u32 + &c1;
                (v, d)
            };
            let mut x = trace.clone();
            for _ in 0..2000 {
                let (v, d) = p(&x);
                if d.is_zero() || v.is_zero() {
                    break;
                }
                let next = Float::with_val(prec, &x - Float::with_val(prec, &v / &d));
                if next >= x {
                    break;
                }
                x = next;
            }
            let l1 = x;
            // Remaining roots solve λ² − (t − λ₁)λ + c0/λ₁ = 0.
            let s = Float::with_val(prec, &trace - &l1);
            let prod = if l1.is_zero() {
                ctx.zero()
            } else {
                Float::with_val(prec, &c0 / &l1)
            };
            let disc = Float::with_val(prec, s.square_ref()) - Float::with_val(prec, &prod * 4u32);
            let disc = if disc.is_sign_negative() {
                ctx.zero()
            } else {
                disc.sqrt()
            };
            let mid = Float::with_val(prec, &s + &disc) / 2u32;
            let small = if mid.is_zero() {
                ctx.zero()
            } else {
                Float::with_val(prec, &prod / &mid)
            };
            vec![small, mid, l1]
        }
        _ => panic!("oracle covers n = 2, 3"),
    };
    for e in &mut eig {
        if e.is_sign_negative() {
            *e = ctx.zero();
        }
        e.sqrt_mut();
    }
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

fn det(a: &Matrix, ctx: &PrecisionContext) -> Real {
    let prec = ctx.bits();
    let m = |i: usize, j: usize| &a[(i, j)];
    match a.dim() {
        2 => Float::with_val(prec, m(0, 0) * m(1, 1)) - Float::with_val(prec, m(0, 1) * m(1, 0)),
        3 => {
            let cof = |r1: usize, r2: usize, c1: usize, c2: usize| {
                Float::with_val(prec, m(r1, c1) * m(r2, c2)) - Float::with_val(prec, m(r1, c2) * m(r2, c1))
            };
            Float::with_val(prec, m(0, 0) * cof(1, 2, 1, 2)) - Float::with_val(prec, m(0, 1) * cof(1, 2, 0, 2))
                + Float::with_val(prec, m(0, 2) * cof(1, 2, 0, 1))
        }
        _ => panic!("det covers n = 2, 3"),
    }
}

/// `u ↦ u² − 1` on ℝ.
pub struct UnitQuadratic {
    pub ctx: PrecisionContext,
}

impl NonlinearSystem for UnitQuadratic {
    fn dim(&self) -> usize {
        1
    }
    fn residual(&self, u: &Vector) -> Vector {
        let v = Float::with_val(self.ctx.bits(), u[0].square_ref()) - 1u32;
        Vector::from_reals(vec![v], &self.ctx)
    }
    fn jacobian(&self, u: &Vector) -> Matrix {
        Matrix::from_fn(1, &self.ctx, |_, _| Float::with_val(self.ctx.bits(), &u[0] * 2u32))
    }
}

/// Secant iterates for `u² − 1` from `u⁰ = 2` with a Newton first step
/// (`u¹ = 2 − 3/4`), `count` iterates in total.
pub fn secant_oracle(count: usize, ctx: &PrecisionContext) -> Vec<Real> {
    let prec = ctx.bits();
    let f = |x: &Real| Float::with_val(prec, x.square_ref()) - 1u32;
    let mut xs = vec![ctx.real(2), ctx.real(1.25)];
    while xs.len() < count {
        let (a, b) = (&xs[xs.len() - 2], &xs[xs.len() - 1]);
        let (fa, fb) = (f(a), f(b));
        let denom = Float::with_val(prec, &fb - &fa);
        let next = Float::with_val(
            prec,
            b - Float::with_val(prec, &fb * Float::with_val(prec, b - a)) / denom,
        );
        xs.push(next);
    }
    xs.truncate(count);
    xs
}

pub fn rel_diff(a: &Real, b: &Real) -> Real {
    let prec = a.prec().max(b.prec());
    let diff = Float::with_val(prec, a - b).abs();
    let scale = Float::with_val(prec, b.abs_ref());
    if scale.is_zero() {
        diff
    } else {
        diff / scale
    }
}
