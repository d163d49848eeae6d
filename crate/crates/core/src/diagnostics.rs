//! Per-iteration convergence quantities and structural certificates computed
//! from a [`RunRecord`].

use rug::ops::Pow;
use rug::Float;
use thiserror::Error;

use crate::linalg::{singular_values, LinalgError, Matrix, PrecisionContext, Real, Vector};
use crate::problems::Problem;
use crate::solvers::RunRecord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiagnosticsError {
    #[error("bad selection: {0}")]
    BadSelection(String),
    #[error("step {0} is not normalized")]
    NotNormalized(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One row of the per-iteration table. `None` marks an undefined quantity
/// and is written as `-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub k: usize,
    pub f_norm: Real,
    /// `err_k = ‖u^k − ū‖₂`.
    pub err: Option<Real>,
    /// `err_k^(1/k)`.
    pub r: Option<Real>,
    /// `err_k / err_{k−1}`.
    pub q: Option<Real>,
    /// `ε_{k−1}`.
    pub eps_prev: Option<Real>,
    /// `ε_{k−1}^(1/k)`.
    pub big_r: Option<Real>,
    /// `ε_{k−1} / ε_{k−2}`.
    pub big_q: Option<Real>,
    /// `log‖F_k‖₂ / log‖s^{k−1}‖₂`.
    pub delta: Option<Real>,
    /// `min(‖ŝ^k − φ‖₂, ‖ŝ^k + φ‖₂)`.
    pub zeta: Option<Real>,
    /// `λ_k` with `P_N(u^{k+1} − ū) = λ_k P_N(u^k − ū)`.
    pub lambda: Option<Real>,
    /// `‖P_X(u^k − ū)‖₂ / ‖P_N(u^k − ū)‖₂²`.
    pub omega: Option<Real>,
    /// Singular values of `E_k`, ascending.
    pub sv: Option<Vec<Real>>,
    pub e_norm: Option<Real>,
}

impl MetricsRow {
    pub fn lambda1(&self) -> Option<&Real> {
        self.sv.as_ref().and_then(|s| s.first())
    }

    pub fn lambda2(&self) -> Option<&Real> {
        self.sv.as_ref().and_then(|s| s.get(1))
    }
}

fn positive(x: &Real) -> bool {
    *x > 0 && x.is_finite()
}

fn ratio(num: &Real, den: &Real) -> Option<Real> {
    positive(den).then(|| Float::with_val(num.prec(), num / den))
}

fn root_k(x: &Real, k: usize) -> Option<Real> {
    if k == 0 || x.is_sign_negative() {
        return None;
    }
    if x.is_zero() {
        return Some(x.clone());
    }
    Some(Float::with_val(x.prec(), x.pow(Float::with_val(x.prec(), k).recip())))
}

/// Null-direction coordinate `c` with `P_N e = c φ`, and `‖P_X e‖₂`.
fn split(e: &Vector, phi: &Vector, psi: &Vector, p_x: &Matrix) -> (Real, Real) {
    let c = Float::with_val(e.prec(), psi.dot(e) / psi.dot(phi));
    (c, p_x.mul_vec(e).norm2())
}

/// Computes the table for `k = 0, …, k̄` of `rec`.
pub fn metrics_from_trace(rec: &RunRecord, p: &Problem) -> Vec<MetricsRow> {
    let ctx = rec.precision;
    let prec = ctx.bits();
    let trace = &rec.trace;
    let null = match (p.phi(), p.psi(), p.projector_n()) {
        (Some(phi), Some(psi), Ok(pr)) if phi.len() == rec.final_iterate().len() => Some((phi, psi, pr.p_x)),
        _ => None,
    };
    let c_floor = ctx.floor(10);
    let splits: Vec<Option<(Real, Real)>> = trace
        .iter()
        .map(|it| {
            let (phi, psi, p_x) = null.as_ref()?;
            let e = &it.u - p.root();
            Some(split(&e, phi, psi, p_x))
        })
        .collect();

    let step_at = |k: usize| -> Option<&Vector> {
        trace[k].step.as_ref().or(if k == rec.kbar {
            rec.terminal_step.as_ref()
        } else {
            None
        })
    };

    (0..trace.len())
        .map(|k| {
            let it = &trace[k];
            let err = it.err_norm.clone();
            let r = err.as_ref().and_then(|e| root_k(e, k));
            let q = match (k, &err) {
                (1.., Some(e)) => trace[k - 1].err_norm.as_ref().and_then(|prev| ratio(e, prev)),
                _ => None,
            };
            let eps_prev = if k >= 1 { trace[k - 1].eps.clone() } else { None };
            let big_r = eps_prev.as_ref().and_then(|e| root_k(e, k));
            let big_q = match (k, &eps_prev) {
                (2.., Some(e)) => trace[k - 2].eps.as_ref().and_then(|prev| ratio(e, prev)),
                _ => None,
            };
            let delta = if k >= 1 {
                trace[k - 1].step.as_ref().and_then(|s| {
                    let sn = s.norm2();
                    (positive(&sn) && sn < 1 && positive(&it.f_norm))
                        .then(|| Float::with_val(prec, it.f_norm.ln_ref()) / sn.ln())
                })
            } else {
                None
            };
            let zeta = match (&null, step_at(k)) {
                (Some((phi, _, _)), Some(s)) if !s.is_zero() => {
                    let sh = s.normalized();
                    let a = (&sh - phi).norm2();
                    let b = (&sh + phi).norm2();
                    Some(if a <= b { a } else { b })
                }
                _ => None,
            };
            let (lambda, omega) = match &splits[k] {
                Some((c, px_norm)) if Float::with_val(prec, c.abs_ref()) > c_floor => {
                    let lambda = if k < rec.kbar {
                        splits[k + 1].as_ref().map(|(c1, _)| Float::with_val(prec, c1 / c))
                    } else {
                        None
                    };
                    let omega = Float::with_val(prec, px_norm / Float::with_val(prec, c.square_ref()));
                    (lambda, Some(omega))
                }
                _ => (None, None),
            };
            MetricsRow {
                k,
                f_norm: it.f_norm.clone(),
                err,
                r,
                q,
                eps_prev,
                big_r,
                big_q,
                delta,
                zeta,
                lambda,
                omega,
                sv: it.sv.clone(),
                e_norm: it.e_norm.clone(),
            }
        })
        .collect()
}

/// Smallest singular value of the matrix whose columns are the unit steps
/// `steps[i]` for `i` in `selection`.
pub fn uli_min_sv(
    steps: &[Vector],
    k: usize,
    selection: &[usize],
    ctx: &PrecisionContext,
) -> Result<Real, DiagnosticsError> {
    let n = steps.first().map(Vector::len).unwrap_or(0);
    if selection.len() != n || n == 0 {
        return Err(DiagnosticsError::BadSelection(format!(
            "expected {n} indices, got {}",
            selection.len()
        )));
    }
    if selection.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DiagnosticsError::BadSelection(
            "indices must be strictly increasing".into(),
        ));
    }
    if let Some(&bad) = selection.iter().find(|&&i| i < k || i >= steps.len()) {
        return Err(DiagnosticsError::BadSelection(format!(
            "index {bad} outside {k}..{}",
            steps.len()
        )));
    }
    let tol = ctx.floor(15);
    let mut columns = Vec::with_capacity(n);
    for &i in selection {
        let norm = steps[i].norm2();
        if Float::with_val(ctx.bits(), &norm - 1u32).abs() > tol {
            return Err(DiagnosticsError::NotNormalized(i));
        }
        columns.push(steps[i].clone());
    }
    let m = Matrix::from_columns(&columns, ctx)?;
    let sv = singular_values(&m, ctx)?;
    Ok(sv.into_iter().next().expect("n > 0"))
}

/// Least-squares slope of `log err_{k+1}` against `log err_k` over the last
/// `pairs` consecutive pairs of `errs`. `None` if fewer pairs exist or an
/// error is not positive.
pub fn fitted_q_order(errs: &[Real], pairs: usize) -> Option<f64> {
    if pairs < 2 || errs.len() < pairs + 1 {
        return None;
    }
    let tail = &errs[errs.len() - pairs - 1..];
    if !tail.iter().all(positive) {
        return None;
    }
    let logs: Vec<f64> = tail
        .iter()
        .map(|e| Float::with_val(e.prec(), e.ln_ref()).to_f64())
        .collect();
    let xs = &logs[..pairs];
    let ys = &logs[1..];
    let n = pairs as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `‖Bφ‖₂`.
pub fn nullspace_residual(b: &Matrix, phi: &Vector) -> Real {
    b.mul_vec(phi).norm2()
}

/// For every recorded Broyden update `B_k → B_{k+1}`, the relative deviation
/// `|ε_k − ‖B_{k+1} − B_k‖₂| / ε_k`. Requires full matrices in the record.
pub fn update_norm_deviations(rec: &RunRecord) -> Result<Vec<(usize, Real)>, DiagnosticsError> {
    let Some(first) = rec.broyden_updates_from else {
        return Ok(Vec::new());
    };
    if rec.matrices.len() != rec.trace.len() {
        return Err(DiagnosticsError::BadSelection(
            "run was recorded without full matrices".into(),
        ));
    }
    let ctx = rec.precision;
    let mut out = Vec::new();
    for k in first..rec.kbar {
        let Some(eps) = rec.trace[k].eps.as_ref() else { continue };
        if !positive(eps) {
            continue;
        }
        let diff = &rec.matrices[k + 1] - &rec.matrices[k];
        let norm = diff.spectral_norm(&ctx)?;
        let dev = Float::with_val(ctx.bits(), eps - &norm).abs() / eps;
        out.push((k, dev));
    }
    Ok(out)
}
