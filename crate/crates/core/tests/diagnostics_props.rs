use broyden_core::diagnostics::{fitted_q_order, metrics_from_trace, nullspace_residual, uli_min_sv, MetricsRow};
use broyden_core::harness::{
    judge, single_run, window_start, AcceptanceCriteria, RunVerdict, SeriesConfig, SmpParams, WindowRule,
};
use broyden_core::linalg::{PrecisionContext, Real};
use broyden_core::problems::Problem;
use broyden_core::solvers::{Method, RunRecord};
use proptest::prelude::*;
use rug::ops::Pow;
use rug::Float;

fn bmp(problem: &str, alpha: f64, seed: u64) -> (Problem, RunRecord, Vec<MetricsRow>) {
    let mut cfg = SeriesConfig::new(problem, alpha, 0.0);
    cfg.precision = 200;
    cfg.tol_exponent = 100;
    cfg.rng_seed = seed;
    let opts = cfg.solver_options().unwrap().with_full_matrices(true);
    let (p, rec) = single_run(&cfg, Method::BroydenPreceded, SmpParams::default(), 0, &opts).unwrap();
    let rows = metrics_from_trace(&rec, &p);
    (p, rec, rows)
}

/// Whether the cumulative-run filter would keep this run.
fn accepted(p: &Problem, rec: &RunRecord, rows: &[MetricsRow]) -> bool {
    judge(rec, rows, &AcceptanceCriteria::for_problem(p.kind())) == RunVerdict::Accepted
}

fn ratio(a: &Real, b: &Real) -> f64 {
    Float::with_val(a.prec(), a / b).to_f64()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn steps_align_with_null_vector(which in 0usize..2, seed in any::<u64>()) {
        let (p, rec, rows) = bmp(["example1", "example2"][which], 0.01, seed);
        prop_assume!(accepted(&p, &rec, &rows));
        let k0 = window_start(rec.kbar, WindowRule::Min);
        let ratios: Vec<Real> = rows[k0..]
            .iter()
            .map(|r| {
                let z = r.zeta.as_ref().unwrap();
                Float::with_val(z.prec(), z / r.err.as_ref().unwrap())
            })
            .collect();
        // Each quarter of the window ends lower than it started.
        let quarter = (ratios.len() / 4).max(1);
        for chunk in ratios.chunks(quarter).filter(|c| c.len() > 1) {
            prop_assert!(chunk[chunk.len() - 1] < chunk[0], "{} !< {}", chunk[chunk.len() - 1], chunk[0]);
        }
        prop_assert!(*ratios.last().unwrap() <= 1e-3);
    }

    #[test]
    fn residual_is_quadratic_in_error(which in 0usize..2, seed in any::<u64>()) {
        let (p, rec, rows) = bmp(["example1", "example2"][which], 0.01, seed);
        prop_assume!(accepted(&p, &rec, &rows));
        let k0 = window_start(rec.kbar, WindowRule::LastQuarter);
        let ratios: Vec<f64> = rows[k0..]
            .iter()
            .map(|r| {
                let e = r.err.as_ref().unwrap();
                ratio(&r.f_norm, &Float::with_val(e.prec(), e.square_ref()))
            })
            .collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        prop_assert!((hi - lo) / hi <= 1e-2, "spread {} .. {}", lo, hi);
    }

    #[test]
    fn consecutive_steps_are_linearly_dependent(seed in any::<u64>()) {
        let (p, rec, rows) = bmp("example1", 0.01, seed);
        prop_assume!(accepted(&p, &rec, &rows));
        let ctx = rec.precision;
        let steps = rec.normalized_steps();
        let k0 = window_start(rec.kbar, WindowRule::Min);
        for k in k0..rec.kbar {
            let sv = uli_min_sv(&steps, k, &[k, k + 1], &ctx).unwrap();
            prop_assert!(sv <= 1e-10, "k={} sv={}", k, sv);
        }
    }
}

#[test]
fn undefined_entries_at_the_start() {
    let (_, _, rows) = bmp("example1", 0.01, 3);
    let first = &rows[0];
    assert_eq!(first.k, 0);
    assert!(first.r.is_none() && first.q.is_none() && first.eps_prev.is_none());
    assert!(first.big_r.is_none() && first.big_q.is_none() && first.delta.is_none());
    assert!(rows[1].q.is_some() && rows[1].eps_prev.is_some() && rows[1].big_q.is_none());
    assert!(rows[2].big_q.is_some());
}

#[test]
fn final_matrix_annihilates_null_vector() {
    let (p, rec, _) = bmp("example1", 0.01, 11);
    let b = rec.b_final.as_ref().unwrap();
    assert!(nullspace_residual(b, p.phi().unwrap()) <= 1e-20);
}

#[test]
fn uli_rejects_bad_selections() {
    let (_, rec, _) = bmp("example1", 0.01, 5);
    let ctx = rec.precision;
    let steps = rec.normalized_steps();
    assert!(uli_min_sv(&steps, 3, &[3], &ctx).is_err());
    assert!(uli_min_sv(&steps, 3, &[4, 3], &ctx).is_err());
    assert!(uli_min_sv(&steps, 3, &[2, 3], &ctx).is_err());
    assert!(uli_min_sv(&steps, 3, &[3, steps.len()], &ctx).is_err());
}

#[test]
fn fitted_order_recovers_power_law() {
    let ctx = PrecisionContext::with_digits(120).unwrap();
    let mut errs = vec![ctx.real(0.1)];
    for _ in 0..8 {
        let last = errs.last().unwrap();
        errs.push(Float::with_val(ctx.bits(), last.pow(1.5f64)));
    }
    let order = fitted_q_order(&errs, 6).unwrap();
    assert!((order - 1.5).abs() < 1e-12, "{order}");
    assert!(fitted_q_order(&errs[..3], 6).is_none());
}
