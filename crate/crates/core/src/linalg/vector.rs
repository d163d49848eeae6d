use std::ops::{Add, Index, IndexMut, Neg, Sub};

use rug::Float;

use super::{PrecisionContext, Real};

/// Dense vector of arbitrary-precision reals with a fixed length.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    prec: u32,
    entries: Vec<Real>,
}

impl Vector {
    pub fn zeros(n: usize, ctx: &PrecisionContext) -> Self {
        Self {
            prec: ctx.bits(),
            entries: (0..n).map(|_| ctx.zero()).collect(),
        }
    }

    pub fn from_f64(values: &[f64], ctx: &PrecisionContext) -> Self {
        Self {
            prec: ctx.bits(),
            entries: values.iter().map(|&v| ctx.real(v)).collect(),
        }
    }

    /// Wraps existing reals, rounding each to the context precision.
    pub fn from_reals(values: Vec<Real>, ctx: &PrecisionContext) -> Self {
        let prec = ctx.bits();
        let entries = values
            .into_iter()
            .map(|mut v| {
                v.set_prec(prec);
                v
            })
            .collect();
        Self { prec, entries }
    }

    pub(crate) fn from_reals_with_prec(entries: Vec<Real>, prec: u32) -> Self {
        let entries = entries
            .into_iter()
            .map(|mut v| {
                if v.prec() != prec {
                    v.set_prec(prec);
                }
                v
            })
            .collect();
        Self { prec, entries }
    }

    /// The `i`-th canonical basis vector.
    pub fn unit(n: usize, i: usize, ctx: &PrecisionContext) -> Self {
        let mut v = Self::zeros(n, ctx);
        v.entries[i] = ctx.one();
        v
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Real> {
        self.entries.iter()
    }

    pub fn as_slice(&self) -> &[Real] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(Float::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Float::is_zero)
    }

    pub fn dot(&self, other: &Vector) -> Real {
        assert_eq!(self.len(), other.len(), "dot: dimension mismatch");
        let mut acc = Float::new(self.prec);
        for (a, b) in self.entries.iter().zip(&other.entries) {
            acc += Float::with_val(self.prec, a * b);
        }
        acc
    }

    /// Euclidean norm.
    pub fn norm2(&self) -> Real {
        // Scale by the largest magnitude so that squares of tiny entries stay
        // well inside the exponent range.
        let scale = self.max_abs();
        if scale.is_zero() || !scale.is_finite() {
            return scale;
        }
        let mut acc = Float::new(self.prec);
        for e in &self.entries {
            let r = Float::with_val(self.prec, e / &scale);
            acc += Float::with_val(self.prec, r.square_ref());
        }
        acc.sqrt_mut();
        acc * scale
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

    pub fn scaled(&self, factor: &Real) -> Vector {
        self.map(|e| Float::with_val(self.prec, e * factor))
    }

    /// `self / ‖self‖₂`; the zero vector is returned unchanged.
    pub fn normalized(&self) -> Vector {
        let norm = self.norm2();
        if norm.is_zero() {
            return self.clone();
        }
        self.map(|e| Float::with_val(self.prec, e / &norm))
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: &Real, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "axpy: dimension mismatch");
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| {
                let t = Float::with_val(self.prec, factor * b);
                Float::with_val(self.prec, a + &t)
            })
            .collect();
        Vector {
            prec: self.prec,
            entries,
        }
    }

    fn map(&self, f: impl Fn(&Real) -> Real) -> Vector {
        Vector {
            prec: self.prec,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    fn zip_with(&self, other: &Vector, f: impl Fn(&Real, &Real) -> Real) -> Vector {
        assert_eq!(self.len(), other.len(), "dimension mismatch");
        Vector {
            prec: self.prec,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

impl Index<usize> for Vector {
    type Output = Real;

    fn index(&self, i: usize) -> &Real {
        &self.entries[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut Real {
        &mut self.entries[i]
    }
}

impl Add<&Vector> for &Vector {
    type Output = Vector;

    fn add(self, rhs: &Vector) -> Vector {
        self.zip_with(rhs, |a, b| Float::with_val(self.prec, a + b))
    }
}

impl Sub<&Vector> for &Vector {
    type Output = Vector;

    fn sub(self, rhs: &Vector) -> Vector {
        self.zip_with(rhs, |a, b| Float::with_val(self.prec, a - b))
    }
}

impl Neg for &Vector {
    type Output = Vector;

    fn neg(self) -> Vector {
        self.map(|a| Float::with_val(self.prec, -a))
    }
}
