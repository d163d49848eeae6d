use std::ops::{Add, Index, IndexMut, Sub};

use rug::Float;

use super::{singular_values, LinalgError, PrecisionContext, Real, Vector};

/// Square dense matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    prec: u32,
    entries: Vec<Real>,
}

impl Matrix {
    pub fn zeros(n: usize, ctx: &PrecisionContext) -> Self {
        Self {
            n,
            prec: ctx.bits(),
            entries: (0..n * n).map(|_| ctx.zero()).collect(),
        }
    }

    pub fn identity(n: usize, ctx: &PrecisionContext) -> Self {
        let mut m = Self::zeros(n, ctx);
        for i in 0..n {
            m[(i, i)] = ctx.one();
        }
        m
    }

    pub fn from_fn(n: usize, ctx: &PrecisionContext, mut f: impl FnMut(usize, usize) -> Real) -> Self {
        let prec = ctx.bits();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut v = f(i, j);
                v.set_prec(prec);
                entries.push(v);
            }
        }
        Self { n, prec, entries }
    }

    /// Builds a matrix from f64 rows. Panics unless the rows form a square.
    pub fn from_rows(rows: &[&[f64]], ctx: &PrecisionContext) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "from_rows: matrix must be square");
        Self::from_fn(n, ctx, |i, j| ctx.real(rows[i][j]))
    }

    /// Matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vector], ctx: &PrecisionContext) -> Result<Self, LinalgError> {
        let n = columns.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Ok(Self::from_fn(n, ctx, |i, j| columns[j][i].clone()))
    }

    /// `v wᵀ`.
    pub fn outer(v: &Vector, w: &Vector, ctx: &PrecisionContext) -> Result<Self, LinalgError> {
        if v.len() != w.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: v.len(),
                found: w.len(),
            });
        }
        let prec = ctx.bits();
        Ok(Self::from_fn(v.len(), ctx, |i, j| Float::with_val(prec, &v[i] * &w[j])))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn row(&self, i: usize) -> &[Real] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vector {
        let values = (0..self.n).map(|i| self[(i, j)].clone()).collect();
        Vector::from_reals_with_prec(values, self.prec)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(Float::is_finite)
    }

    pub fn max_abs(&self) -> Real {
        let mut best = Float::new(self.prec);
        for e in &self.entries {
            let a = Float::with_val(self.prec, e.abs_ref());
            if !(a <= best) {
                best = a;
            }
        }
        best
    }

    pub fn frobenius_norm(&self) -> Real {
        let v = Vector::from_reals_with_prec(self.entries.clone(), self.prec);
        v.norm2()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self, ctx: &PrecisionContext) -> Result<Real, LinalgError> {
        let sv = singular_values(self, ctx)?;
        Ok(sv.into_iter().last().unwrap_or_else(|| ctx.zero()))
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        assert_eq!(self.n, x.len(), "mul_vec: dimension mismatch");
        let values = (0..self.n)
            .map(|i| {
                let mut acc = Float::new(self.prec);
                for (a, b) in self.row(i).iter().zip(x.iter()) {
                    acc += Float::with_val(self.prec, a * b);
                }
                acc
            })
            .collect();
        Vector::from_reals_with_prec(values, self.prec)
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "matmul: dimension mismatch");
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Float::new(self.prec);
                for k in 0..n {
                    acc += Float::with_val(self.prec, &self[(i, k)] * &other[(k, j)]);
                }
                entries.push(acc);
            }
        }
        Matrix {
            n,
            prec: self.prec,
            entries,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(self[(j, i)].clone());
            }
        }
        Matrix {
            n,
            prec: self.prec,
            entries,
        }
    }

    pub fn scaled(&self, factor: &Real) -> Matrix {
        Matrix {
            n: self.n,
            prec: self.prec,
            entries: self
                .entries
                .iter()
                .map(|e| Float::with_val(self.prec, e * factor))
                .collect(),
        }
    }

    pub(crate) fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.n {
            self.entries.swap(a * self.n + j, b * self.n + j);
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(&Real, &Real) -> Real) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Matrix {
            n: self.n,
            prec: self.prec,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Real;

    fn index(&self, (i, j): (usize, usize)) -> &Real {
        &self.entries[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Real {
        &mut self.entries[i * self.n + j]
    }
}

impl Add<&Matrix> for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| Float::with_val(self.prec, a + b))
    }
}

impl Sub<&Matrix> for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| Float::with_val(self.prec, a - b))
    }
}

/// `B + v wᵀ`; `b` is left untouched.
pub fn rank_one_update(b: &Matrix, v: &Vector, w: &Vector) -> Result<Matrix, LinalgError> {
    let n = b.dim();
    for len in [v.len(), w.len()] {
        if len != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let prec = b.prec();
    let mut out = b.clone();
    for i in 0..n {
        for j in 0..n {
            let t = Float::with_val(prec, &v[i] * &w[j]);
            out[(i, j)] += t;
        }
    }
    Ok(out)
}
