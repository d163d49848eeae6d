//! Test problems with analytic Jacobians, known roots and null-space data.
//!
//! Registry names: `example1` .. `example4` and `monomial:p` (`u ↦ u^p`).
//! Every registered root is `ū = 0`.

use rug::ops::Pow;
use rug::Float;
use thiserror::Error;

use crate::linalg::{Matrix, PrecisionContext, Real, Vector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProblemError {
    #[error("unknown problem {0:?} (expected example1..example4 or monomial:p)")]
    UnknownProblem(String),
    #[error("problem {0} has no null-space data")]
    MissingNullData(String),
    #[error("second-difference step must lie in (10^(-digits/2), 1e-2)")]
    InvalidStep,
}

/// A nonlinear map `F: ℝⁿ → ℝⁿ` with an analytic Jacobian.
pub trait NonlinearSystem: Sync {
    fn dim(&self) -> usize;
    fn residual(&self, u: &Vector) -> Vector;
    fn jacobian(&self, u: &Vector) -> Matrix;
    fn known_root(&self) -> Option<&Vector> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    /// `(u₁ + u₂², 3/2 u₁u₂ + u₂² + u₂³)`.
    Example1,
    /// `(u₁² + u₂ + u₃, u₂ − 2u₃³, 5u₃ + u₃²)`.
    Example2,
    /// Example 2 with `u₁²` replaced by `u₁³`.
    Example3,
    /// Regular Jacobian at the root.
    Example4,
    /// `u ↦ u^p` on ℝ.
    Monomial(u32),
}

/// Projection onto `N = ker F'(ū)` along `X = range F'(ū)`, and its complement.
#[derive(Clone, Debug)]
pub struct Projectors {
    pub p_n: Matrix,
    pub p_x: Matrix,
}

#[derive(Clone, Debug)]
pub struct Problem {
    kind: ProblemKind,
    name: String,
    root: Vector,
    has_a2: bool,
    phi: Option<Vector>,
    psi: Option<Vector>,
    singularity_order: u32,
    ctx: PrecisionContext,
}

pub fn registry_names() -> Vec<&'static str> {
    vec!["example1", "example2", "example3", "example4", "monomial:p"]
}

impl Problem {
    pub fn by_name(name: &str, ctx: &PrecisionContext) -> Result<Self, ProblemError> {
        let kind = match name.trim() {
            "example1" => ProblemKind::Example1,
            "example2" => ProblemKind::Example2,
            "example3" => ProblemKind::Example3,
            "example4" => ProblemKind::Example4,
            other => match other.strip_prefix("monomial:").map(str::parse::<u32>) {
                Some(Ok(p)) if p >= 1 => ProblemKind::Monomial(p),
                _ => return Err(ProblemError::UnknownProblem(name.to_string())),
            },
        };
        Ok(Self::new(kind, ctx))
    }

    pub fn new(kind: ProblemKind, ctx: &PrecisionContext) -> Self {
        let v = |xs: &[f64]| Vector::from_f64(xs, ctx);
        let (name, n, has_a2, phi, psi, order) = match kind {
            ProblemKind::Example1 => (
                "example1".to_string(),
                2,
                true,
                Some(v(&[0.0, 1.0])),
                Some(v(&[0.0, 1.0])),
                1,
            ),
            // range F'(0) = span{(1,1,0), (1,0,5)}; ψ is their cross product.
            ProblemKind::Example2 => (
                "example2".to_string(),
                3,
                true,
                Some(v(&[1.0, 0.0, 0.0])),
                Some(v(&[5.0, -5.0, -1.0])),
                1,
            ),
            ProblemKind::Example3 => (
                "example3".to_string(),
                3,
                false,
                Some(v(&[1.0, 0.0, 0.0])),
                Some(v(&[5.0, -5.0, -1.0])),
                2,
            ),
            ProblemKind::Example4 => ("example4".to_string(), 3, false, None, None, 0),
            ProblemKind::Monomial(1) => ("monomial:1".to_string(), 1, false, None, None, 0),
            ProblemKind::Monomial(p) => (
                format!("monomial:{p}"),
                1,
                p == 2,
                Some(v(&[1.0])),
                Some(v(&[1.0])),
                p - 1,
            ),
        };
        Self {
            kind,
            name,
            root: Vector::zeros(n, ctx),
            has_a2,
            phi,
            psi,
            singularity_order: order,
            ctx: *ctx,
        }
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.root.len()
    }

    pub fn root(&self) -> &Vector {
        &self.root
    }

    /// Whether `P_N(F''(ū)(φ,φ)) ≠ 0` holds in addition to the kernel condition.
    pub fn has_a2(&self) -> bool {
        self.has_a2
    }

    /// Unit null vector of `F'(ū)`.
    pub fn phi(&self) -> Option<&Vector> {
        self.phi.as_ref()
    }

    /// Spans the orthogonal complement of `range F'(ū)`.
    pub fn psi(&self) -> Option<&Vector> {
        self.psi.as_ref()
    }

    pub fn singularity_order(&self) -> u32 {
        self.singularity_order
    }

    pub fn precision(&self) -> &PrecisionContext {
        &self.ctx
    }

    pub fn eval_f(&self, u: &Vector) -> Vector {
        assert_eq!(u.len(), self.n(), "eval_f: dimension mismatch");
        let p = u.prec();
        let r = |x: Float| -> Real { x };
        let sq = |x: &Real| Float::with_val(p, x.square_ref());
        let cube = |x: &Real| Float::with_val(p, x.pow(3u32));
        let out = match self.kind {
            ProblemKind::Example1 => {
                let (u1, u2) = (&u[0], &u[1]);
                let u2sq = sq(u2);
                let f1 = Float::with_val(p, u1 + &u2sq);
                let mixed = Float::with_val(p, u1 * u2) * 1.5f64;
                let f2 = r(mixed + &u2sq) + cube(u2);
                vec![f1, f2]
            }
            ProblemKind::Example2 | ProblemKind::Example3 => {
                let (u1, u2, u3) = (&u[0], &u[1], &u[2]);
                let lead = if self.kind == ProblemKind::Example2 {
                    sq(u1)
                } else {
                    cube(u1)
                };
                let f1 = Float::with_val(p, &lead + u2) + u3;
                let f2 = Float::with_val(p, u2 - cube(u3) * 2u32);
                let f3 = Float::with_val(p, u3 * 5u32) + sq(u3);
                vec![f1, f2, f3]
            }
            ProblemKind::Example4 => {
                let (u1, u2, u3) = (&u[0], &u[1], &u[2]);
                let a = Float::with_val(p, u1 + 1u32);
                let b = Float::with_val(p, u2 + 1u32);
                let bsq = sq(&b);
                let f1 = sq(&a) * &b + &bsq + u3 - 2u32;
                let f2 = Float::with_val(p, u1.exp_ref()) + cube(&b) + sq(u3) - 2u32;
                let f3 = sq(u3).exp() + &bsq - 2u32;
                vec![f1, f2, f3]
            }
            ProblemKind::Monomial(k) => vec![Float::with_val(p, (&u[0]).pow(k))],
        };
        Vector::from_reals(out, &self.ctx)
    }

    pub fn eval_j(&self, u: &Vector) -> Matrix {
        assert_eq!(u.len(), self.n(), "eval_j: dimension mismatch");
        let p = u.prec();
        let ctx = &self.ctx;
        let z = || ctx.zero();
        let sq = |x: &Real| Float::with_val(p, x.square_ref());
        let rows: Vec<Vec<Real>> = match self.kind {
            ProblemKind::Example1 => {
                let (u1, u2) = (&u[0], &u[1]);
                let j12 = Float::with_val(p, u2 * 2u32);
                let j21 = Float::with_val(p, u2 * 1.5f64);
                let j22 = Float::with_val(p, u1 * 1.5f64) + Float::with_val(p, u2 * 2u32) + sq(u2) * 3u32;
                vec![vec![ctx.one(), j12], vec![j21, j22]]
            }
            ProblemKind::Example2 | ProblemKind::Example3 => {
                let (u1, u3) = (&u[0], &u[2]);
                let j11 = if self.kind == ProblemKind::Example2 {
                    Float::with_val(p, u1 * 2u32)
                } else {
                    sq(u1) * 3u32
                };
                vec![
                    vec![j11, ctx.one(), ctx.one()],
                    vec![z(), ctx.one(), -(sq(u3) * 6u32)],
                    vec![z(), z(), Float::with_val(p, u3 * 2u32) + 5u32],
                ]
            }
            ProblemKind::Example4 => {
                let (u1, u3) = (&u[0], &u[2]);
                let a = Float::with_val(p, u1 + 1u32);
                let b = Float::with_val(p, &u[1] + 1u32);
                let ab2 = Float::with_val(p, &a * &b) * 2u32;
                let j12 = sq(&a) + Float::with_val(p, &b * 2u32);
                let j21 = Float::with_val(p, u1.exp_ref());
                let j22 = sq(&b) * 3u32;
                let j23 = Float::with_val(p, u3 * 2u32);
                let j32 = Float::with_val(p, &b * 2u32);
                let j33 = sq(u3).exp() * Float::with_val(p, u3 * 2u32);
                vec![vec![ab2, j12, ctx.one()], vec![j21, j22, j23], vec![z(), j32, j33]]
            }
            ProblemKind::Monomial(k) => {
                let d = if k == 1 {
                    ctx.one()
                } else {
                    Float::with_val(p, (&u[0]).pow(k - 1)) * k
                };
                vec![vec![d]]
            }
        };
        Matrix::from_fn(self.n(), ctx, |i, j| rows[i][j].clone())
    }

    /// `P_N = φψᵀ/(ψᵀφ)` and `P_X = I − P_N`.
    pub fn projector_n(&self) -> Result<Projectors, ProblemError> {
        let (phi, psi) = self.null_data()?;
        let ctx = &self.ctx;
        let denom = psi.dot(phi);
        let p_n = Matrix::outer(phi, psi, ctx)
            .expect("null data dimensions agree")
            .scaled(&Float::with_val(ctx.bits(), denom.recip_ref()));
        let p_x = &Matrix::identity(self.n(), ctx) - &p_n;
        Ok(Projectors { p_n, p_x })
    }

    /// `P_N` applied to the central second difference of `F` along `φ`,
    /// an `O(h²)` approximation of `P_N(F''(ū)(φ,φ))`.
    pub fn verify_a2(&self, h: &Real) -> Result<Vector, ProblemError> {
        let (phi, _) = self.null_data()?;
        let ctx = &self.ctx;
        let lower = ctx.pow10(-(ctx.decimal_digits() as i64) / 2);
        if !(*h > lower && *h < 0.01) {
            return Err(ProblemError::InvalidStep);
        }
        let step = phi.scaled(h);
        let plus = self.eval_f(&(&self.root + &step));
        let minus = self.eval_f(&(&self.root - &step));
        let center = self.eval_f(&self.root);
        let two = ctx.real(2);
        let second =
            (&(&plus + &minus) - &center.scaled(&two)).scaled(&Float::with_val(ctx.bits(), h.square_ref()).recip());
        Ok(self.projector_n()?.p_n.mul_vec(&second))
    }

    /// Largest entrywise deviation between the analytic Jacobian at `u` and
    /// central differences with step `10^(-digits/3)`, relative to
    /// `max(1, max|J_ij|)`.
    pub fn jacobian_fd_mismatch(&self, u: &Vector) -> Real {
        let ctx = &self.ctx;
        let prec = ctx.bits();
        let h = ctx.pow10(-(ctx.decimal_digits() as i64) / 3);
        let analytic = self.eval_j(u);
        let mut worst = ctx.zero();
        for j in 0..self.n() {
            let e = Vector::unit(self.n(), j, ctx).scaled(&h);
            let diff = &self.eval_f(&(u + &e)) - &self.eval_f(&(u - &e));
            let scale = Float::with_val(prec, &h * 2u32);
            for i in 0..self.n() {
                let fd = Float::with_val(prec, &diff[i] / &scale);
                let dev = (fd - &analytic[(i, j)]).abs();
                if dev > worst {
                    worst = dev;
                }
            }
        }
        let mut denom = analytic.max_abs();
        if denom < 1 {
            denom = ctx.one();
        }
        worst / denom
    }

    /// Tolerance used with [`Problem::jacobian_fd_mismatch`]: `10^(-digits/3 + 5)`.
    pub fn jacobian_fd_tolerance(&self) -> Real {
        self.ctx.pow10(-(self.ctx.decimal_digits() as i64) / 3 + 5)
    }

    fn null_data(&self) -> Result<(&Vector, &Vector), ProblemError> {
        match (&self.phi, &self.psi) {
            (Some(phi), Some(psi)) => Ok((phi, psi)),
            _ => Err(ProblemError::MissingNullData(self.name.clone())),
        }
    }
}

impl NonlinearSystem for Problem {
    fn dim(&self) -> usize {
        self.n()
    }

    fn residual(&self, u: &Vector) -> Vector {
        self.eval_f(u)
    }

    fn jacobian(&self, u: &Vector) -> Matrix {
        self.eval_j(u)
    }

    fn known_root(&self) -> Option<&Vector> {
        Some(&self.root)
    }
}
