//! Rasterized domain of q-linear convergence of BMP over a planar grid of
//! starting points.

use rayon::prelude::*;
use rug::Float;
use thiserror::Error;

use crate::format::NumberStyle;
use crate::harness::AcceptanceCriteria;
use crate::linalg::{PrecisionContext, Real, Vector};
use crate::problems::Problem;
use crate::solvers::{bmp_run, B0Mode, RunRecord, SolverError, SolverOptions, Status};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BasinError {
    #[error("basin rendering needs a 2-dimensional problem, got dimension {found}")]
    DimensionMismatch { found: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub center: Vector,
    pub half_width: Real,
    /// Pixels per axis; odd and at least 3.
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(center: Vector, half_width: Real, resolution: usize) -> Result<Self, BasinError> {
        if center.len() != 2 {
            return Err(BasinError::DimensionMismatch { found: center.len() });
        }
        if resolution < 3 || resolution.is_multiple_of(2) {
            return Err(BasinError::InvalidGrid(format!(
                "resolution must be odd and at least 3, got {resolution}"
            )));
        }
        if !(half_width > 0) || !half_width.is_finite() {
            return Err(BasinError::InvalidGrid("half_width must be positive".into()));
        }
        Ok(Self {
            center,
            half_width,
            resolution,
        })
    }

    /// Grid centered at the origin.
    pub fn centered(half_width: Real, resolution: usize, ctx: &PrecisionContext) -> Result<Self, BasinError> {
        Self::new(Vector::zeros(2, ctx), half_width, resolution)
    }

    /// `center + h (2i/(res−1) − 1, 2j/(res−1) − 1)`.
    pub fn point(&self, i: usize, j: usize) -> Vector {
        let prec = self.center.prec();
        let last = (self.resolution - 1) as i64;
        let offset = |idx: usize| {
            let num = Float::with_val(prec, 2 * idx as i64 - last);
            num * &self.half_width / last
        };
        let mut p = self.center.clone();
        p[0] += offset(i);
        p[1] += offset(j);
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    /// Converged with `q_k̄`, `Q_k̄` in their bands.
    InBand,
    /// Converged, but a final rate is out of band or undefined.
    OutOfBand,
    /// No convergence within the iteration budget, including breakdowns.
    NoConvergence,
}

impl Classification {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            Classification::InBand => [0, 0, 255],
            Classification::OutOfBand => [128, 0, 128],
            Classification::NoConvergence => [255, 255, 0],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::InBand => "in-band",
            Classification::OutOfBand => "out-of-band",
            Classification::NoConvergence => "no-convergence",
        }
    }
}

/// Options for basin runs: 160 digits, tolerance `10⁻⁶⁰`, 300 iterations,
/// no matrix-error tracking.
pub fn basin_solver_options() -> SolverOptions {
    let ctx = PrecisionContext::with_digits(160).expect("valid precision");
    SolverOptions::new(ctx, 60)
        .expect("valid tolerance")
        .with_max_iter(300)
        .with_matrix_error(false)
}

/// `(q_k̄, Q_k̄)` read directly off the trace.
pub fn final_rates(rec: &RunRecord) -> (Option<Real>, Option<Real>) {
    let k = rec.kbar;
    let ratio = |a: Option<&Real>, b: Option<&Real>| match (a, b) {
        (Some(a), Some(b)) if *b > 0 => Some(Float::with_val(a.prec(), a / b)),
        _ => None,
    };
    let q = (k >= 1)
        .then(|| ratio(rec.trace[k].err_norm.as_ref(), rec.trace[k - 1].err_norm.as_ref()))
        .flatten();
    let big_q = (k >= 2)
        .then(|| ratio(rec.trace[k - 1].eps.as_ref(), rec.trace[k - 2].eps.as_ref()))
        .flatten();
    (q, big_q)
}

/// Outcome of one starting point.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelResult {
    pub class: Classification,
    pub kbar: usize,
    pub q_final: Option<Real>,
}

fn classify_record(rec: &RunRecord, crit: &AcceptanceCriteria) -> PixelResult {
    let (q, big_q) = final_rates(rec);
    let class = if rec.status == Status::ExactRoot && rec.kbar == 0 {
        Classification::InBand
    } else if rec.status.is_success() && rec.trace[rec.kbar].err_norm.as_ref().is_some_and(|e| *e <= crit.u_cap) {
        let q_ok = match crit.q_band {
            None => true,
            Some((lo, hi)) => q.as_ref().is_some_and(|v| *v >= lo && *v <= hi),
        };
        let big_q_ok = match crit.big_q_band {
            None => true,
            Some((lo, hi)) => big_q.as_ref().is_some_and(|v| *v >= lo && *v <= hi),
        };
        if q_ok && big_q_ok {
            Classification::InBand
        } else {
            Classification::OutOfBand
        }
    } else {
        Classification::NoConvergence
    };
    PixelResult {
        class,
        kbar: rec.kbar,
        q_final: q,
    }
}

fn point_result(
    p: &Problem,
    u_hat: &Vector,
    crit: &AcceptanceCriteria,
    opts: &SolverOptions,
) -> Result<PixelResult, BasinError> {
    if p.n() != 2 {
        return Err(BasinError::DimensionMismatch { found: p.n() });
    }
    let ctx = opts.precision;
    let b_hat = p.eval_j(u_hat);
    let rec = bmp_run(p, u_hat, &b_hat, &B0Mode::exact_jacobian(2, &ctx), opts)?;
    Ok(classify_record(&rec, crit))
}

/// Runs BMP with `β = 0` and `B₀ = F'(u⁰)` from `û` and classifies the run.
pub fn classify_point(
    p: &Problem,
    u_hat: &Vector,
    crit: &AcceptanceCriteria,
    opts: &SolverOptions,
) -> Result<Classification, BasinError> {
    point_result(p, u_hat, crit, opts).map(|r| r.class)
}

/// A rendered basin: the P6 image and one table row per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct BasinImage {
    pub resolution: usize,
    /// `(x, y, result)` in image order: top row first, left to right.
    pub pixels: Vec<(Real, Real, PixelResult)>,
}

impl BasinImage {
    pub fn ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.resolution, self.resolution).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for (_, _, r) in &self.pixels {
            out.extend_from_slice(&r.class.rgb());
        }
        out
    }

    pub fn csv(&self, style: NumberStyle) -> String {
        let mut out = String::from("x,y,class,kbar,q_final\n");
        for (x, y, r) in &self.pixels {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                style.render(x),
                style.render(y),
                r.class.label(),
                r.kbar,
                style.render_opt(r.q_final.as_ref())
            ));
        }
        out
    }

    pub fn fraction(&self, class: Classification) -> f64 {
        let hits = self.pixels.iter().filter(|(_, _, r)| r.class == class).count();
        hits as f64 / self.pixels.len() as f64
    }
}

/// Classifies every grid point, rows from top (largest `y`) to bottom.
pub fn render_basin(
    p: &Problem,
    g: &GridSpec,
    crit: &AcceptanceCriteria,
    opts: &SolverOptions,
    workers: Option<usize>,
) -> Result<BasinImage, BasinError> {
    if p.n() != 2 {
        return Err(BasinError::DimensionMismatch { found: p.n() });
    }
    opts.validate()?;
    let res = g.resolution;
    let job = |idx: usize| -> Result<(Real, Real, PixelResult), BasinError> {
        let (row, col) = (idx / res, idx % res);
        let u = g.point(col, res - 1 - row);
        let result = point_result(p, &u, crit, opts)?;
        Ok((u[0].clone(), u[1].clone(), result))
    };
    let run = || (0..res * res).into_par_iter().map(job).collect::<Result<Vec<_>, _>>();
    let pixels = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| BasinError::InvalidGrid(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    Ok(BasinImage {
        resolution: res,
        pixels,
    })
}
