//! Broyden's method (BM), Broyden with a preceding Newton-like step (BMP),
//! the Shamanskii-like accelerated scheme (SMP) and plain Newton.
//!
//! Every solver returns a [`RunRecord`]; runtime failures such as a singular
//! linear system or divergence are reported through [`Status`], only invalid
//! inputs produce a [`SolverError`].

use rug::ops::Pow;
use rug::Float;
use thiserror::Error;

use crate::linalg::{rank_one_update, LuFactorization, Matrix, PrecisionContext, Real, Vector};
use crate::problems::NonlinearSystem;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Broyden,
    BroydenPreceded,
    Shamanskii,
    Newton,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Broyden => "bm",
            Method::BroydenPreceded => "bmp",
            Method::Shamanskii => "smp",
            Method::Newton => "newton",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    /// `‖F(u^k̄)‖₂ ≤ 10^(-tol_exponent)`.
    Converged,
    /// `F(u^k̄)` is exactly zero.
    ExactRoot,
    MaxIter,
    SingularMatrix,
    Diverged,
}

impl Status {
    pub fn is_success(self) -> bool {
        matches!(self, Status::Converged | Status::ExactRoot)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol_exponent: u32,
    pub max_iter: usize,
    pub precision: PrecisionContext,
    /// Abort with [`Status::Diverged`] once `‖u^k‖₂` exceeds this.
    pub divergence_guard: Real,
    /// Keep every `B_k` in [`RunRecord::matrices`].
    pub record_full_matrices: bool,
    /// Record the singular values of `E_k = B_k − F'(ū)` when the root is known.
    pub track_matrix_error: bool,
}

impl SolverOptions {
    pub const DEFAULT_MAX_ITER: usize = 3000;

    pub fn new(precision: PrecisionContext, tol_exponent: u32) -> Result<Self, SolverError> {
        let opts = Self {
            tol_exponent,
            max_iter: Self::DEFAULT_MAX_ITER,
            precision,
            divergence_guard: precision.pow10(10),
            record_full_matrices: false,
            track_matrix_error: true,
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_full_matrices(mut self, on: bool) -> Self {
        self.record_full_matrices = on;
        self
    }

    pub fn with_matrix_error(mut self, on: bool) -> Self {
        self.track_matrix_error = on;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let digits = self.precision.decimal_digits();
        if self.tol_exponent == 0 || self.tol_exponent + 20 > digits {
            return Err(SolverError::InvalidOptions(format!(
                "tol_exponent must lie in 1..={} at {digits} digits, got {}",
                digits - 20,
                self.tol_exponent
            )));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidOptions("max_iter must be positive".into()));
        }
        if !(self.divergence_guard > 0) {
            return Err(SolverError::InvalidOptions("divergence_guard must be positive".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> Real {
        self.precision.pow10(-(self.tol_exponent as i64))
    }
}

/// How `B₀` is chosen after the preceding Newton-like step.
#[derive(Clone, Debug, PartialEq)]
pub enum B0Mode {
    /// `B₀ = F'(u⁰) + β‖F'(u⁰)‖₂ R`.
    JacobianAtU0 {
        beta: Real,
        noise: Matrix,
    },
    /// Broyden update of `B̂` along the step `û → u⁰`.
    BroydenUpdateOfBhat,
    Given(Matrix),
}

impl B0Mode {
    /// `B₀ = F'(u⁰)`.
    pub fn exact_jacobian(n: usize, ctx: &PrecisionContext) -> Self {
        B0Mode::JacobianAtU0 {
            beta: ctx.zero(),
            noise: Matrix::zeros(n, ctx),
        }
    }
}

/// Where a run's initial data came from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeedInfo {
    pub seed: Option<u64>,
    pub run_index: Option<u64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub u: Vector,
    pub f_norm: Real,
    /// `‖u^k − ū‖₂` when the root is known.
    pub err_norm: Option<Real>,
    /// `s^k = u^{k+1} − u^k`; absent at `k̄`.
    pub step: Option<Vector>,
    /// `ε_k = ‖F(u^{k+1})‖₂ / ‖s^k‖₂`; absent at `k̄` and for SMP.
    pub eps: Option<Real>,
    /// Singular values of `E_k`, ascending.
    pub sv: Option<Vec<Real>>,
    pub e_norm: Option<Real>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub status: Status,
    pub kbar: usize,
    pub trace: Vec<IterationRecord>,
    pub b_final: Option<Matrix>,
    /// `B_0, …, B_k̄` when full matrices were requested.
    pub matrices: Vec<Matrix>,
    /// The step solved at `k̄` but not taken; used for `ζ_k̄`.
    pub terminal_step: Option<Vector>,
    /// First index `k` for which `B_{k+1}` is a Broyden update of `B_k`.
    pub broyden_updates_from: Option<usize>,
    pub seed_info: SeedInfo,
    pub precision: PrecisionContext,
}

impl RunRecord {
    pub fn final_iterate(&self) -> &Vector {
        &self.trace[self.kbar].u
    }

    pub fn final_f_norm(&self) -> &Real {
        &self.trace[self.kbar].f_norm
    }

    /// Normalized steps `ŝ^0, …, ŝ^k̄`, including the terminal step when present.
    pub fn normalized_steps(&self) -> Vec<Vector> {
        self.trace
            .iter()
            .filter_map(|it| it.step.as_ref())
            .chain(self.terminal_step.as_ref())
            .map(Vector::normalized)
            .collect()
    }
}

struct Tracker<'a, S: NonlinearSystem + ?Sized> {
    sys: &'a S,
    opts: &'a SolverOptions,
    root_jacobian: Option<Matrix>,
    trace: Vec<IterationRecord>,
    matrices: Vec<Matrix>,
}

impl<'a, S: NonlinearSystem + ?Sized> Tracker<'a, S> {
    fn new(sys: &'a S, opts: &'a SolverOptions) -> Self {
        let root_jacobian = match sys.known_root() {
            Some(root) if opts.track_matrix_error => Some(sys.jacobian(root)),
            _ => None,
        };
        Self {
            sys,
            opts,
            root_jacobian,
            trace: Vec::new(),
            matrices: Vec::new(),
        }
    }

    fn push(&mut self, u: &Vector, f: &Vector, b: Option<&Matrix>) {
        let err_norm = self.sys.known_root().map(|r| (u - r).norm2());
        let (sv, e_norm) = match (b, &self.root_jacobian) {
            (Some(b), Some(j)) => match crate::linalg::singular_values(&(b - j), &self.opts.precision) {
                Ok(sv) => {
                    let top = sv.last().cloned();
                    (Some(sv), top)
                }
                Err(_) => (None, None),
            },
            _ => (None, None),
        };
        if let (Some(b), true) = (b, self.opts.record_full_matrices) {
            self.matrices.push(b.clone());
        }
        self.trace.push(IterationRecord {
            u: u.clone(),
            f_norm: f.norm2(),
            err_norm,
            step: None,
            eps: None,
            sv,
            e_norm,
        });
    }

    fn set_step(&mut self, step: Vector, eps: Option<Real>) {
        let last = self.trace.last_mut().expect("step recorded after an iterate");
        last.step = Some(step);
        last.eps = eps;
    }

    fn kbar(&self) -> usize {
        self.trace.len() - 1
    }

    /// Status implied by the most recent iterate, if the run must stop there.
    fn stop_reason(&self, u: &Vector, f: &Vector) -> Option<Status> {
        let f_norm = &self.trace.last().expect("iterate recorded").f_norm;
        if !u.is_finite() || !f.is_finite() || u.norm2() > self.opts.divergence_guard {
            return Some(Status::Diverged);
        }
        if f.is_zero() {
            return Some(Status::ExactRoot);
        }
        if *f_norm <= self.opts.tolerance() {
            return Some(Status::Converged);
        }
        None
    }
}

fn check_dims<S: NonlinearSystem + ?Sized>(sys: &S, u: &Vector, b: Option<&Matrix>) -> Result<(), SolverError> {
    let n = sys.dim();
    if u.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            found: u.len(),
        });
    }
    if let Some(b) = b {
        if b.dim() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                found: b.dim(),
            });
        }
    }
    Ok(())
}

fn broyden_step(b: &Matrix, f: &Vector, ctx: &PrecisionContext) -> Option<Vector> {
    let s = LuFactorization::factor(b, ctx).ok()?.solve(&-f).ok()?;
    (!s.is_zero() && s.is_finite()).then_some(s)
}

/// `B + (y − Bs)sᵀ/‖s‖²`.
pub fn broyden_update(b: &Matrix, s: &Vector, y: &Vector) -> Matrix {
    let prec = s.prec();
    let ss = s.dot(s);
    let residual = y - &b.mul_vec(s);
    let w = s.scaled(&Float::with_val(prec, ss.recip_ref()));
    rank_one_update(b, &residual, &w).expect("dimensions checked by caller")
}

/// Shared Broyden/Newton iteration. `tracker` may already hold a prefix of
/// the displayed trace (the preceding step of BMP).
fn iterate<S: NonlinearSystem + ?Sized>(
    tracker: &mut Tracker<'_, S>,
    u0: Vector,
    b0: Option<Matrix>,
    newton: bool,
    max_steps: usize,
) -> (Status, Option<Matrix>, Option<Vector>) {
    let sys = tracker.sys;
    let ctx = tracker.opts.precision;
    let mut u = u0;
    let mut f = sys.residual(&u);
    let mut b = if newton {
        sys.jacobian(&u)
    } else {
        b0.expect("Broyden iteration needs B0")
    };
    let mut steps = 0usize;
    loop {
        tracker.push(&u, &f, Some(&b));
        if let Some(status) = tracker.stop_reason(&u, &f) {
            let terminal = match status {
                Status::Converged => broyden_step(&b, &f, &ctx),
                _ => None,
            };
            return (status, Some(b), terminal);
        }
        if steps == max_steps {
            return (Status::MaxIter, Some(b), None);
        }
        let Some(s) = broyden_step(&b, &f, &ctx) else {
            return (Status::SingularMatrix, Some(b), None);
        };
        let u_next = &u + &s;
        let f_next = sys.residual(&u_next);
        let eps = Float::with_val(ctx.bits(), f_next.norm2() / s.norm2());
        if newton {
            b = sys.jacobian(&u_next);
        } else {
            let y = &f_next - &f;
            b = broyden_update(&b, &s, &y);
        }
        tracker.set_step(s, Some(eps));
        u = u_next;
        f = f_next;
        steps += 1;
    }
}

fn finish<S: NonlinearSystem + ?Sized>(
    tracker: Tracker<'_, S>,
    method: Method,
    status: Status,
    b_final: Option<Matrix>,
    terminal_step: Option<Vector>,
    broyden_updates_from: Option<usize>,
) -> RunRecord {
    let kbar = tracker.kbar();
    RunRecord {
        method,
        status,
        kbar,
        precision: tracker.opts.precision,
        trace: tracker.trace,
        b_final,
        matrices: tracker.matrices,
        terminal_step,
        broyden_updates_from,
        seed_info: SeedInfo::default(),
    }
}

/// Algorithm BM started from `(u0, B0)`.
pub fn broyden_run<S: NonlinearSystem + ?Sized>(
    sys: &S,
    u0: &Vector,
    b0: &Matrix,
    opts: &SolverOptions,
) -> Result<RunRecord, SolverError> {
    opts.validate()?;
    check_dims(sys, u0, Some(b0))?;
    let mut tracker = Tracker::new(sys, opts);
    let (status, b, terminal) = iterate(&mut tracker, u0.clone(), Some(b0.clone()), false, opts.max_iter);
    Ok(finish(tracker, Method::Broyden, status, b, terminal, Some(0)))
}

/// Newton's method, i.e. `B_k = F'(u^k)`.
pub fn newton_run<S: NonlinearSystem + ?Sized>(
    sys: &S,
    u0: &Vector,
    opts: &SolverOptions,
) -> Result<RunRecord, SolverError> {
    opts.validate()?;
    check_dims(sys, u0, None)?;
    let mut tracker = Tracker::new(sys, opts);
    let (status, b, terminal) = iterate(&mut tracker, u0.clone(), None, true, opts.max_iter);
    Ok(finish(tracker, Method::Newton, status, b, terminal, None))
}

/// Algorithm BMP: `u⁰ = û − B̂⁻¹F(û)`, then Broyden's method from `(u⁰, B₀)`.
///
/// The trace is indexed with `û` as entry 0, so `B̂` is `B_0` of the record
/// and `k̄` counts the preceding step.
pub fn bmp_run<S: NonlinearSystem + ?Sized>(
    sys: &S,
    u_hat: &Vector,
    b_hat: &Matrix,
    mode: &B0Mode,
    opts: &SolverOptions,
) -> Result<RunRecord, SolverError> {
    opts.validate()?;
    check_dims(sys, u_hat, Some(b_hat))?;
    let n = sys.dim();
    match mode {
        B0Mode::JacobianAtU0 { noise, .. } | B0Mode::Given(noise) if noise.dim() != n => {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                found: noise.dim(),
            });
        }
        _ => {}
    }
    let ctx = opts.precision;
    let mut tracker = Tracker::new(sys, opts);
    let f_hat = sys.residual(u_hat);
    tracker.push(u_hat, &f_hat, Some(b_hat));
    if let Some(status) = tracker.stop_reason(u_hat, &f_hat) {
        return Ok(finish(
            tracker,
            Method::BroydenPreceded,
            status,
            Some(b_hat.clone()),
            None,
            None,
        ));
    }
    let Some(s) = broyden_step(b_hat, &f_hat, &ctx) else {
        return Ok(finish(
            tracker,
            Method::BroydenPreceded,
            Status::SingularMatrix,
            Some(b_hat.clone()),
            None,
            None,
        ));
    };
    let u0 = u_hat + &s;
    let f0 = sys.residual(&u0);
    let (b0, updates_from) = match mode {
        B0Mode::JacobianAtU0 { beta, noise } => {
            let j = sys.jacobian(&u0);
            let b0 = if beta.is_zero() {
                j
            } else {
                let scale = match j.spectral_norm(&ctx) {
                    Ok(norm) => Float::with_val(ctx.bits(), beta * &norm),
                    Err(_) => j.frobenius_norm() * beta,
                };
                &j + &noise.scaled(&scale)
            };
            (b0, 1)
        }
        B0Mode::BroydenUpdateOfBhat => (broyden_update(b_hat, &s, &(&f0 - &f_hat)), 0),
        B0Mode::Given(b) => (b.clone(), 1),
    };
    let eps = Float::with_val(ctx.bits(), f0.norm2() / s.norm2());
    tracker.set_step(s, Some(eps));
    let (status, b, terminal) = iterate(&mut tracker, u0, Some(b0), false, opts.max_iter - 1);
    Ok(finish(
        tracker,
        Method::BroydenPreceded,
        status,
        b,
        terminal,
        Some(updates_from),
    ))
}

/// Algorithm SMP: a Newton-like step with `B̂`, one Newton step, then
/// `u⁺ = y − (4 − C‖z‖₂^α) z` with `y` the Newton iterate and
/// `z = F'(u)⁻¹F(y)` the simplified Newton step.
///
/// The trace holds `û, u⁻¹, u⁰, u¹, …` at indices `0, 1, 2, …`.
pub fn smp_run<S: NonlinearSystem + ?Sized>(
    sys: &S,
    u_hat: &Vector,
    b_hat: &Matrix,
    c: &Real,
    alpha: &Real,
    opts: &SolverOptions,
) -> Result<RunRecord, SolverError> {
    opts.validate()?;
    check_dims(sys, u_hat, Some(b_hat))?;
    if c.is_zero() || !c.is_finite() {
        return Err(SolverError::InvalidParameter("C must be finite and nonzero".into()));
    }
    let ctx = opts.precision;
    let prec = ctx.bits();
    let golden = (Float::with_val(prec, 5u32).sqrt() - 1u32) / 2u32;
    if !(*alpha > 0 && *alpha < golden) {
        return Err(SolverError::InvalidParameter(
            "alpha must lie in (0, (sqrt(5)-1)/2)".into(),
        ));
    }

    let mut opts_no_b = opts.clone();
    opts_no_b.track_matrix_error = false;
    opts_no_b.record_full_matrices = false;
    let mut tracker = Tracker::new(sys, &opts_no_b);

    let mut u = u_hat.clone();
    let mut f = sys.residual(&u);
    let mut k = 0usize;
    let status = loop {
        tracker.push(&u, &f, None);
        if let Some(status) = tracker.stop_reason(&u, &f) {
            break status;
        }
        if k == opts.max_iter {
            break Status::MaxIter;
        }
        let matrix = if k == 0 { b_hat.clone() } else { sys.jacobian(&u) };
        let Ok(lu) = LuFactorization::factor(&matrix, &ctx) else {
            break Status::SingularMatrix;
        };
        let newton = lu.solve(&-&f).expect("dimension checked");
        let u_next = if k < 2 {
            &u + &newton
        } else {
            let y = &u + &newton;
            let z = lu.solve(&sys.residual(&y)).expect("dimension checked");
            if z.is_zero() {
                y
            } else {
                let damp = Float::with_val(prec, 4u32) - Float::with_val(prec, z.norm2().pow(alpha)) * c;
                y.axpy(&(-damp), &z)
            }
        };
        let step = &u_next - &u;
        if step.is_zero() || !step.is_finite() {
            break Status::SingularMatrix;
        }
        tracker.set_step(step, None);
        u = u_next;
        f = sys.residual(&u);
        k += 1;
    };
    Ok(finish(tracker, Method::Shamanskii, status, None, None, None))
}
