use rug::Float;

use super::{LinalgError, Matrix, PrecisionContext, Vector};

/// LU factorization `PA = LU` with partial pivoting.
///
/// `L` (unit lower) and `U` share storage; `perm[i]` is the row of `A` that
/// ended up in row `i`.
#[derive(Clone, Debug)]
pub struct LuFactorization {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuFactorization {
    /// Factors `a`. A pivot is declared zero once its magnitude drops below
    /// `10^-(digits - guard) * max|a_ij|`.
    pub fn factor(a: &Matrix, ctx: &PrecisionContext) -> Result<Self, LinalgError> {
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.dim();
        let prec = a.prec();
        let scale = a.max_abs();
        if scale.is_zero() {
            return Err(LinalgError::SingularMatrix { pivot: 0 });
        }
        let threshold = Float::with_val(prec, &scale * ctx.pivot_threshold());

        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = Float::with_val(prec, lu[(k, k)].abs_ref());
            for i in k + 1..n {
                let cand = Float::with_val(prec, lu[(i, k)].abs_ref());
                if cand > best {
                    best = cand;
                    p = i;
                }
            }
            if best < threshold || best.is_zero() {
                return Err(LinalgError::SingularMatrix { pivot: k });
            }
            lu.swap_rows(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let l = Float::with_val(prec, &lu[(i, k)] / &lu[(k, k)]);
                for j in k + 1..n {
                    let t = Float::with_val(prec, &l * &lu[(k, j)]);
                    lu[(i, j)] -= t;
                }
                lu[(i, k)] = l;
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    pub fn solve(&self, b: &Vector) -> Result<Vector, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let prec = self.lu.prec();
        let mut x: Vec<Float> = self.perm.iter().map(|&p| Float::with_val(prec, &b[p])).collect();
        // Forward substitution with unit lower factor.
        for i in 0..n {
            for j in 0..i {
                let t = Float::with_val(prec, &self.lu[(i, j)] * &x[j]);
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = Float::with_val(prec, &self.lu[(i, j)] * &x[j]);
                x[i] -= t;
            }
            x[i] /= &self.lu[(i, i)];
        }
        Ok(Vector::from_reals_with_prec(x, prec))
    }
}

/// Solves `a x = b` by partial-pivoting LU.
pub fn lu_solve(a: &Matrix, b: &Vector, ctx: &PrecisionContext) -> Result<Vector, LinalgError> {
    if a.dim() != b.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
        });
    }
    LuFactorization::factor(a, ctx)?.solve(b)
}
