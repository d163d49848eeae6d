use rug::Float;

use super::{LinalgError, Matrix, PrecisionContext, Real};

/// Singular values in ascending order, by one-sided (Hestenes) Jacobi.
///
/// Column pairs are rotated until every pair satisfies
/// `|a_i·a_j| <= 10^(-digits+10) ‖a_i‖ ‖a_j‖`; the singular values are then the
/// column norms. More than `60 n²` rotations is reported as `NoConvergence`.
pub fn singular_values(a: &Matrix, ctx: &PrecisionContext) -> Result<Vec<Real>, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.dim();
    let prec = ctx.bits();
    let tol = ctx.floor(10);
    let max_rotations = 60 * n * n;

    let mut cols: Vec<Vec<Float>> = (0..n)
        .map(|j| (0..n).map(|i| Float::with_val(prec, &a[(i, j)])).collect())
        .collect();

    let dot = |x: &[Float], y: &[Float]| {
        let mut acc = Float::new(prec);
        for (p, q) in x.iter().zip(y) {
            acc += Float::with_val(prec, p * q);
        }
        acc
    };

    let mut rotations = 0usize;
    loop {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma.is_zero() {
                    continue;
                }
                let bound = Float::with_val(prec, &alpha * &beta).sqrt() * &tol;
                if Float::with_val(prec, gamma.abs_ref()) <= bound {
                    continue;
                }
                rotations += 1;
                if rotations > max_rotations {
                    return Err(LinalgError::NoConvergence { rotations });
                }
                // Rotation angle that annihilates the (i, j) entry of AᵀA.
                let zeta = Float::with_val(prec, &beta - &alpha) / Float::with_val(prec, &gamma * 2u32);
                let hyp = Float::with_val(prec, 1u32 + Float::with_val(prec, zeta.square_ref())).sqrt();
                let denom = Float::with_val(prec, zeta.abs_ref()) + hyp;
                let mut t = Float::with_val(prec, 1u32) / denom;
                if zeta.is_sign_negative() {
                    t = -t;
                }
                let c = Float::with_val(prec, 1u32 + Float::with_val(prec, t.square_ref()))
                    .sqrt()
                    .recip();
                let s = Float::with_val(prec, &c * &t);
                let (left, right) = cols.split_at_mut(j);
                let (ci, cj) = (&mut left[i], &mut right[0]);
                for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
                    let nx = Float::with_val(prec, &c * &*x) - Float::with_val(prec, &s * &*y);
                    let ny = Float::with_val(prec, &s * &*x) + Float::with_val(prec, &c * &*y);
                    *x = nx;
                    *y = ny;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<Real> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|x, y| x.partial_cmp(y).expect("finite singular values"));
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::with_digits(100).unwrap()
    }

    fn close(a: &Real, b: f64, ctx: &PrecisionContext) -> bool {
        let diff = Float::with_val(ctx.bits(), a - b).abs();
        diff <= ctx.floor(10)
    }

    #[test]
    fn identity_values() {
        let ctx = ctx();
        let sv = singular_values(&Matrix::identity(2, &ctx), &ctx).unwrap();
        assert!(sv.iter().all(|s| *s == 1));
    }

    #[test]
    fn sign_invariance() {
        let ctx = ctx();
        let a = Matrix::from_rows(&[&[3.0, 0.0], &[0.0, -4.0]], &ctx);
        let sv = singular_values(&a, &ctx).unwrap();
        assert_eq!(sv, vec![ctx.real(3), ctx.real(4)]);
    }

    #[test]
    fn rank_deficient_matrix_has_zero_value() {
        let ctx = ctx();
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]], &ctx);
        let sv = singular_values(&a, &ctx).unwrap();
        assert!(sv[0] <= ctx.floor(10));
        assert!(close(&sv[1], 5.0, &ctx));
    }

    #[test]
    fn zero_matrix() {
        let ctx = ctx();
        let sv = singular_values(&Matrix::zeros(3, &ctx), &ctx).unwrap();
        assert!(sv.iter().all(Float::is_zero));
    }

    #[test]
    fn rotation_matrix_is_orthogonal() {
        let ctx = ctx();
        let theta = ctx.real(0.3);
        let (s, c) = theta.sin_cos(ctx.zero());
        let q = Matrix::from_fn(2, &ctx, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c.clone(),
            (0, 1) => Float::with_val(ctx.bits(), -&s),
            _ => s.clone(),
        });
        for v in singular_values(&q, &ctx).unwrap() {
            assert!(close(&v, 1.0, &ctx));
        }
    }

    #[test]
    fn spectral_norm_of_rank_one_update_equals_vector_norm() {
        // ‖v wᵀ‖₂ = ‖v‖₂ when ‖w‖₂ = 1.
        let ctx = ctx();
        let v = super::super::Vector::from_f64(&[0.3, -1.2, 2.5], &ctx);
        let w = super::super::Vector::from_f64(&[1.0, 2.0, -2.0], &ctx).normalized();
        let m = Matrix::outer(&v, &w, &ctx).unwrap();
        let norm = m.spectral_norm(&ctx).unwrap();
        let diff = Float::with_val(ctx.bits(), &norm - v.norm2()).abs();
        assert!(diff <= ctx.floor(10));
    }
}
