//! Seeded single and cumulative experiments: random initialization, run
//! filtering and window aggregation.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{metrics_from_trace, MetricsRow};
use crate::format::NumberStyle;
use crate::linalg::{LinalgError, Matrix, PrecisionContext, Real, Vector};
use crate::problems::{Problem, ProblemError, ProblemKind};
use crate::solvers::{
    bmp_run, broyden_run, newton_run, smp_run, B0Mode, Method, RunRecord, SeedInfo, SolverError, SolverOptions, Status,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no run was accepted ({} removed)", .removed.total())]
    EmptyAcceptedSet { removed: RemovalCounts },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum B0Choice {
    /// `B₀ = F'(u⁰) + β‖F'(u⁰)‖₂ R`.
    #[default]
    #[serde(rename = "jacobian")]
    Jacobian,
    /// `B₀` is the Broyden update of `B̂`.
    #[serde(rename = "broyden-update")]
    BroydenUpdate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowRule {
    /// `k₀ = ⌊min(k̄ − 25, 0.75 k̄)⌋`.
    #[default]
    #[serde(rename = "min")]
    Min,
    /// `k₀ = ⌊max(k̄ − 25, 0.75 k̄)⌋`.
    #[serde(rename = "last-quarter")]
    LastQuarter,
}

/// First index of the window `K = {k₀, …, k̄}`, clamped to `1..=k̄`.
pub fn window_start(kbar: usize, rule: WindowRule) -> usize {
    let a = kbar as i64 - 25;
    let b = (3 * kbar as i64) / 4;
    let k0 = match rule {
        WindowRule::Min => a.min(b),
        WindowRule::LastQuarter => a.max(b),
    };
    k0.clamp(1, kbar.max(1) as i64) as usize
}

fn default_m() -> usize {
    200
}
fn default_tol() -> u32 {
    100
}
fn default_precision() -> u32 {
    320
}
fn default_max_iter() -> usize {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub problem: String,
    /// Half-width of the start box `[−α, α]ⁿ`.
    pub alpha: f64,
    /// Scale of the random perturbation of `B̂` and `B₀`.
    pub beta: f64,
    #[serde(default)]
    pub b0_mode: B0Choice,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_tol")]
    pub tol_exponent: u32,
    #[serde(default = "default_precision")]
    pub precision: u32,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub window: WindowRule,
}

impl SeriesConfig {
    pub fn new(problem: &str, alpha: f64, beta: f64) -> Self {
        Self {
            problem: problem.to_string(),
            alpha,
            beta,
            b0_mode: B0Choice::Jacobian,
            m: default_m(),
            tol_exponent: default_tol(),
            precision: default_precision(),
            max_iter: default_max_iter(),
            rng_seed: 0,
            window: WindowRule::Min,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be nonnegative, got {}", self.beta));
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        self.context()?;
        self.solver_options()?;
        Ok(())
    }

    pub fn context(&self) -> Result<PrecisionContext, HarnessError> {
        PrecisionContext::with_digits(self.precision).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    pub fn solver_options(&self) -> Result<SolverOptions, HarnessError> {
        let opts = SolverOptions::new(self.context()?, self.tol_exponent)
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        Ok(opts.with_max_iter(self.max_iter))
    }
}

/// Filters applied to finished runs.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptanceCriteria {
    pub u_cap: f64,
    pub q_band: Option<(f64, f64)>,
    pub big_q_band: Option<(f64, f64)>,
}

impl Default for AcceptanceCriteria {
    fn default() -> Self {
        Self {
            u_cap: 1e-10,
            q_band: None,
            big_q_band: None,
        }
    }
}

impl AcceptanceCriteria {
    pub const GOLDEN_BAND: (f64, f64) = (0.616, 0.620);

    /// Bands used for each registered problem.
    pub fn for_problem(kind: ProblemKind) -> Self {
        let (q, big_q) = match kind {
            ProblemKind::Example1 | ProblemKind::Example2 | ProblemKind::Monomial(2) => {
                (Some(Self::GOLDEN_BAND), Some(Self::GOLDEN_BAND))
            }
            ProblemKind::Example3 => (Some((0.753, 0.757)), Some((0.568, 0.572))),
            _ => (None, None),
        };
        Self {
            q_band: q,
            big_q_band: big_q,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (lo, hi) in [self.q_band, self.big_q_band].into_iter().flatten() {
            if !(lo <= hi) {
                return Err(HarnessError::InvalidConfig(format!("empty band [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn in_band(band: Option<(f64, f64)>, value: Option<&Real>) -> bool {
        match (band, value) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some((lo, hi)), Some(v)) => *v >= lo && *v <= hi,
        }
    }

    /// Whether `q_k̄` and `Q_k̄` lie in their bands.
    pub fn bands_hold(&self, last: &MetricsRow) -> bool {
        Self::in_band(self.q_band, last.q.as_ref()) && Self::in_band(self.big_q_band, last.big_q.as_ref())
    }
}

/// Random initial data of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub u_hat: Vector,
    pub b_hat: Matrix,
    /// Independent noise `R` for `B₀ = F'(u⁰) + β‖F'(u⁰)‖₂ R`.
    pub noise: Matrix,
}

/// Uniform draw from `[−1, 1)` built from 128 random bits.
pub fn uniform_symmetric<R: RngCore>(rng: &mut R, ctx: &PrecisionContext) -> Real {
    let hi = rng.next_u64() as u128;
    let lo = rng.next_u64() as u128;
    let bits = (hi << 64) | lo;
    let unit = Float::with_val(ctx.bits(), bits) >> 127u32;
    unit - 1u32
}

/// Converts a configuration value to a real via its shortest decimal form,
/// so that `1e-5` becomes the correctly rounded `10⁻⁵`.
pub fn decimal_real(x: f64, ctx: &PrecisionContext) -> Real {
    ctx.parse(&format!("{x:e}")).expect("finite f64 has a decimal form")
}

/// Draws `û ∈ [−α, α]ⁿ`, then `R̂`, then `R`, and forms
/// `B̂ = F'(û) + β‖F'(û)‖₂ R̂`.
pub fn init_random<R: RngCore>(
    p: &Problem,
    alpha: &Real,
    beta: &Real,
    rng: &mut R,
) -> Result<InitialData, HarnessError> {
    let ctx = *p.precision();
    let n = p.n();
    let entries: Vec<Real> = (0..n).map(|_| uniform_symmetric(rng, &ctx) * alpha).collect();
    let u_hat = Vector::from_reals(entries, &ctx);
    let mut draw_matrix = || {
        let vals: Vec<Real> = (0..n * n).map(|_| uniform_symmetric(rng, &ctx)).collect();
        Matrix::from_fn(n, &ctx, |i, j| vals[i * n + j].clone())
    };
    let r_hat = draw_matrix();
    let noise = draw_matrix();
    let j = p.eval_j(&u_hat);
    let b_hat = if beta.is_zero() {
        j
    } else {
        let scale = Float::with_val(ctx.bits(), beta * j.spectral_norm(&ctx)?);
        &j + &r_hat.scaled(&scale)
    };
    Ok(InitialData { u_hat, b_hat, noise })
}

/// Generator for run `run_index` of a series seeded with `seed`.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

/// Parameters of Algorithm SMP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmpParams {
    pub c: f64,
    pub order_alpha: f64,
}

impl Default for SmpParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            order_alpha: 0.5,
        }
    }
}

/// One seeded run of `method` with the initialization of `cfg`.
///
/// `bm` and `newton` start at `û` (with `B̂` for `bm`); `bmp` and `smp`
/// perform the preceding Newton-like step with `B̂`.
pub fn single_run(
    cfg: &SeriesConfig,
    method: Method,
    smp: SmpParams,
    run_index: u64,
    opts: &SolverOptions,
) -> Result<(Problem, RunRecord), HarnessError> {
    let ctx = opts.precision;
    let p = Problem::by_name(&cfg.problem, &ctx)?;
    let alpha = decimal_real(cfg.alpha, &ctx);
    let beta = decimal_real(cfg.beta, &ctx);
    let mut rng = run_rng(cfg.rng_seed, run_index);
    let init = init_random(&p, &alpha, &beta, &mut rng)?;
    let mut rec = match method {
        Method::Broyden => broyden_run(&p, &init.u_hat, &init.b_hat, opts)?,
        Method::Newton => newton_run(&p, &init.u_hat, opts)?,
        Method::BroydenPreceded => {
            let mode = match cfg.b0_mode {
                B0Choice::Jacobian => B0Mode::JacobianAtU0 {
                    beta,
                    noise: init.noise,
                },
                B0Choice::BroydenUpdate => B0Mode::BroydenUpdateOfBhat,
            };
            bmp_run(&p, &init.u_hat, &init.b_hat, &mode, opts)?
        }
        Method::Shamanskii => {
            let c = decimal_real(smp.c, &ctx);
            let order = decimal_real(smp.order_alpha, &ctx);
            smp_run(&p, &init.u_hat, &init.b_hat, &c, &order, opts)?
        }
    };
    rec.seed_info = SeedInfo {
        seed: Some(cfg.rng_seed),
        run_index: Some(run_index),
        note: format!("{} alpha={:e} beta={:e}", cfg.problem, cfg.alpha, cfg.beta),
    };
    Ok((p, rec))
}

/// Runs removed from a cumulative run, by reason.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalCounts {
    /// Singular matrix, divergence or any other failure to converge.
    pub not_converged: usize,
    /// Stopped at `max_iter`.
    pub timeout: usize,
    /// Converged, but `‖u^k̄‖₂` exceeds the cap.
    pub u_cap: usize,
    /// `q_k̄` or `Q_k̄` outside its band or undefined.
    pub band: usize,
}

impl RemovalCounts {
    pub fn total(&self) -> usize {
        self.not_converged + self.timeout + self.u_cap + self.band
    }

    fn add(&mut self, other: &RemovalCounts) {
        self.not_converged += other.not_converged;
        self.timeout += other.timeout;
        self.u_cap += other.u_cap;
        self.band += other.band;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct MinMax {
    min: Option<Real>,
    max: Option<Real>,
}

impl MinMax {
    fn push(&mut self, v: Option<&Real>) {
        let Some(v) = v else { return };
        if self.min.as_ref().is_none_or(|m| v < m) {
            self.min = Some(v.clone());
        }
        if self.max.as_ref().is_none_or(|m| v > m) {
            self.max = Some(v.clone());
        }
    }

    fn merge(&mut self, other: &MinMax) {
        self.push(other.min.as_ref());
        self.push(other.max.as_ref());
    }
}

/// Window extrema of a single accepted run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunWindowStats {
    pub kbar: usize,
    pub k0: usize,
    f_final: Real,
    u_final: Option<Real>,
    r: MinMax,
    q: MinMax,
    big_r: MinMax,
    big_q: MinMax,
    delta: MinMax,
    zeta_max: Option<Real>,
    lambda1_final: Option<Real>,
    lambda2_final: Option<Real>,
    e_min: Option<Real>,
}

impl RunWindowStats {
    /// Extrema over `K = {k₀, …, k̄}`; undefined entries are skipped.
    pub fn from_rows(rows: &[MetricsRow], rule: WindowRule) -> Self {
        let kbar = rows.len() - 1;
        let k0 = window_start(kbar, rule);
        let window = &rows[k0.min(kbar)..];
        let mut r = MinMax::default();
        let mut q = MinMax::default();
        let mut big_r = MinMax::default();
        let mut big_q = MinMax::default();
        let mut delta = MinMax::default();
        let mut zeta = MinMax::default();
        let mut e = MinMax::default();
        for row in window {
            r.push(row.r.as_ref());
            q.push(row.q.as_ref());
            big_r.push(row.big_r.as_ref());
            big_q.push(row.big_q.as_ref());
            delta.push(row.delta.as_ref());
            zeta.push(row.zeta.as_ref());
            e.push(row.e_norm.as_ref());
        }
        let last = &rows[kbar];
        Self {
            kbar,
            k0,
            f_final: last.f_norm.clone(),
            u_final: last.err.clone(),
            r,
            q,
            big_r,
            big_q,
            delta,
            zeta_max: zeta.max,
            lambda1_final: last.lambda1().cloned(),
            lambda2_final: last.lambda2().cloned(),
            e_min: e.min,
        }
    }
}

/// Aggregates over the accepted runs of a cumulative run. Undefined
/// quantities are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulativeSummary {
    pub alpha: f64,
    pub beta: f64,
    pub accepted: usize,
    pub f_minus: Option<Real>,
    pub f_plus: Option<Real>,
    pub u_minus: Option<Real>,
    pub u_plus: Option<Real>,
    pub r_minus: Option<Real>,
    pub r_plus: Option<Real>,
    pub q_minus: Option<Real>,
    pub q_plus: Option<Real>,
    pub big_r_minus: Option<Real>,
    pub big_r_plus: Option<Real>,
    pub big_q_minus: Option<Real>,
    pub big_q_plus: Option<Real>,
    pub delta_minus: Option<Real>,
    pub delta_plus: Option<Real>,
    /// Minimum over runs of the window maximum of `ζ_k`.
    pub zeta_minus: Option<Real>,
    pub zeta_plus: Option<Real>,
    /// Maximum over runs of the final `Λ₁`.
    pub lambda1: Option<Real>,
    pub lambda2_minus: Option<Real>,
    pub lambda2_plus: Option<Real>,
    /// Minimum over runs and windows of `‖E_k‖₂`.
    pub e_norm: Option<Real>,
    pub it_minus: usize,
    pub it_plus: usize,
    pub removed: RemovalCounts,
}

impl CumulativeSummary {
    pub fn rem(&self) -> usize {
        self.removed.total()
    }

    pub const CSV_HEADER: &'static str = "alpha,beta,F_minus,F_plus,u_minus,u_plus,r_minus,r_plus,q_minus,q_plus,\
R_minus,R_plus,Q_minus,Q_plus,delta_minus,delta_plus,zeta_minus,zeta_plus,Lambda1,Lambda2_minus,Lambda2_plus,\
E,it_minus,it_plus,rem,rem_not_converged,rem_timeout,rem_u_cap,rem_band";

    pub fn csv_row(&self, style: NumberStyle) -> String {
        let reals = [
            &self.f_minus,
            &self.f_plus,
            &self.u_minus,
            &self.u_plus,
            &self.r_minus,
            &self.r_plus,
            &self.q_minus,
            &self.q_plus,
            &self.big_r_minus,
            &self.big_r_plus,
            &self.big_q_minus,
            &self.big_q_plus,
            &self.delta_minus,
            &self.delta_plus,
            &self.zeta_minus,
            &self.zeta_plus,
            &self.lambda1,
            &self.lambda2_minus,
            &self.lambda2_plus,
            &self.e_norm,
        ];
        let mut cols = vec![format!("{:e}", self.alpha), format!("{:e}", self.beta)];
        cols.extend(reals.iter().map(|v| style.render_opt(v.as_ref())));
        cols.extend(
            [
                self.it_minus,
                self.it_plus,
                self.rem(),
                self.removed.not_converged,
                self.removed.timeout,
                self.removed.u_cap,
                self.removed.band,
            ]
            .iter()
            .map(usize::to_string),
        );
        cols.join(",")
    }
}

fn fold_summary(stats: &[RunWindowStats]) -> CumulativeSummary {
    let mut f = MinMax::default();
    let mut u = MinMax::default();
    let mut r = MinMax::default();
    let mut q = MinMax::default();
    let mut big_r = MinMax::default();
    let mut big_q = MinMax::default();
    let mut delta = MinMax::default();
    let mut zeta = MinMax::default();
    let mut lambda1 = MinMax::default();
    let mut lambda2 = MinMax::default();
    let mut e = MinMax::default();
    for s in stats {
        f.push(Some(&s.f_final));
        u.push(s.u_final.as_ref());
        r.merge(&s.r);
        q.merge(&s.q);
        big_r.merge(&s.big_r);
        big_q.merge(&s.big_q);
        delta.merge(&s.delta);
        zeta.push(s.zeta_max.as_ref());
        lambda1.push(s.lambda1_final.as_ref());
        lambda2.push(s.lambda2_final.as_ref());
        e.push(s.e_min.as_ref());
    }
    CumulativeSummary {
        alpha: 0.0,
        beta: 0.0,
        accepted: stats.len(),
        f_minus: f.min,
        f_plus: f.max,
        u_minus: u.min,
        u_plus: u.max,
        r_minus: r.min,
        r_plus: r.max,
        q_minus: q.min,
        q_plus: q.max,
        big_r_minus: big_r.min,
        big_r_plus: big_r.max,
        big_q_minus: big_q.min,
        big_q_plus: big_q.max,
        delta_minus: delta.min,
        delta_plus: delta.max,
        zeta_minus: zeta.min,
        zeta_plus: zeta.max,
        lambda1: lambda1.max,
        lambda2_minus: lambda2.min,
        lambda2_plus: lambda2.max,
        e_norm: e.min,
        it_minus: stats.iter().map(|s| s.kbar).min().unwrap_or(0),
        it_plus: stats.iter().map(|s| s.kbar).max().unwrap_or(0),
        removed: RemovalCounts::default(),
    }
}

/// Aggregates the metric tables of accepted runs.
pub fn aggregate(accepted: &[Vec<MetricsRow>], rule: WindowRule) -> CumulativeSummary {
    let stats: Vec<RunWindowStats> = accepted
        .iter()
        .filter(|rows| !rows.is_empty())
        .map(|rows| RunWindowStats::from_rows(rows, rule))
        .collect();
    fold_summary(&stats)
}

/// Why a finished run was kept or dropped.
#[derive(Clone, Debug, PartialEq)]
pub enum RunVerdict {
    Accepted,
    Removed(RemovalCounts),
}

/// Applies the removal rules to a finished run and its metrics.
pub fn judge(rec: &RunRecord, rows: &[MetricsRow], crit: &AcceptanceCriteria) -> RunVerdict {
    let mut removed = RemovalCounts::default();
    match rec.status {
        Status::MaxIter => removed.timeout = 1,
        s if !s.is_success() => removed.not_converged = 1,
        _ => {
            let last = rows.last().expect("nonempty trace");
            if last.err.as_ref().is_none_or(|e| *e > crit.u_cap) {
                removed.u_cap = 1;
            } else if rec.kbar < 2 || !crit.bands_hold(last) {
                removed.band = 1;
            } else {
                return RunVerdict::Accepted;
            }
        }
    }
    RunVerdict::Removed(removed)
}

/// Runs the `m` seeded BMP instances of `cfg`, removes runs per `crit` and
/// aggregates the rest. `workers` sizes a dedicated thread pool; results do
/// not depend on it.
pub fn cumulative_run(
    cfg: &SeriesConfig,
    crit: &AcceptanceCriteria,
    workers: Option<usize>,
) -> Result<CumulativeSummary, HarnessError> {
    cfg.validate()?;
    crit.validate()?;
    let opts = cfg.solver_options()?;
    Problem::by_name(&cfg.problem, &opts.precision)?;

    let job = |index: usize| -> Result<Result<RunWindowStats, RemovalCounts>, HarnessError> {
        let (p, rec) = single_run(cfg, Method::BroydenPreceded, SmpParams::default(), index as u64, &opts)?;
        let rows = metrics_from_trace(&rec, &p);
        Ok(match judge(&rec, &rows, crit) {
            RunVerdict::Accepted => Ok(RunWindowStats::from_rows(&rows, cfg.window)),
            RunVerdict::Removed(r) => Err(r),
        })
    };
    let run_all = || -> Result<Vec<_>, HarnessError> { (0..cfg.m).into_par_iter().map(job).collect() };
    let outcomes = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?
            .install(run_all)?,
        None => run_all()?,
    };

    let mut removed = RemovalCounts::default();
    let mut stats = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(s) => stats.push(s),
            Err(r) => removed.add(&r),
        }
    }
    if stats.is_empty() {
        return Err(HarnessError::EmptyAcceptedSet { removed });
    }
    let mut summary = fold_summary(&stats);
    summary.alpha = cfg.alpha;
    summary.beta = cfg.beta;
    summary.removed = removed;
    Ok(summary)
}
