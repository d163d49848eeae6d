use broyden_core::diagnostics::MetricsRow;
use broyden_core::harness::{
    aggregate, cumulative_run, run_rng, uniform_symmetric, window_start, AcceptanceCriteria, HarnessError,
    SeriesConfig, WindowRule,
};
use broyden_core::linalg::{PrecisionContext, Real};
use broyden_core::problems::ProblemKind;
use proptest::prelude::*;

fn ctx() -> PrecisionContext {
    PrecisionContext::with_digits(50).unwrap()
}

struct RowValues {
    f: f64,
    err: f64,
    q: Option<f64>,
    delta: Option<f64>,
    sv: [f64; 2],
}

fn rows(values: &[RowValues]) -> Vec<MetricsRow> {
    let ctx = ctx();
    let r = |x: f64| ctx.real(x);
    values
        .iter()
        .enumerate()
        .map(|(k, s)| MetricsRow {
            k,
            f_norm: r(s.f),
            err: Some(r(s.err)),
            r: None,
            q: s.q.map(r),
            eps_prev: None,
            big_r: None,
            big_q: None,
            delta: s.delta.map(r),
            zeta: None,
            lambda: None,
            omega: None,
            sv: Some(s.sv.iter().map(|&x| r(x)).collect()),
            e_norm: Some(r(s.sv[1])),
        })
        .collect()
}

fn two_runs() -> [Vec<MetricsRow>; 2] {
    let a = rows(&[
        RowValues {
            f: 1.0,
            err: 1.0,
            q: None,
            delta: None,
            sv: [0.3, 1.0],
        },
        RowValues {
            f: 0.1,
            err: 0.5,
            q: Some(0.5),
            delta: Some(1.9),
            sv: [0.2, 0.9],
        },
        RowValues {
            f: 0.01,
            err: 0.35,
            q: Some(0.7),
            delta: Some(2.0),
            sv: [0.1, 0.8],
        },
    ]);
    let b = rows(&[
        RowValues {
            f: 2.0,
            err: 1.0,
            q: None,
            delta: None,
            sv: [0.5, 0.9],
        },
        RowValues {
            f: 0.2,
            err: 0.9,
            q: Some(0.9),
            delta: None,
            sv: [0.4, 0.7],
        },
        RowValues {
            f: 0.02,
            err: 0.36,
            q: Some(0.4),
            delta: Some(1.5),
            sv: [0.3, 0.65],
        },
        RowValues {
            f: 0.005,
            err: 0.2,
            q: Some(0.6),
            delta: Some(2.5),
            sv: [0.05, 0.6],
        },
    ]);
    [a, b]
}

fn opt(x: f64) -> Option<Real> {
    Some(ctx().real(x))
}

#[test]
fn hand_computed_aggregate_of_two_runs() {
    let s = aggregate(&two_runs(), WindowRule::Min);
    assert_eq!(s.accepted, 2);
    assert_eq!((s.f_minus.clone(), s.f_plus.clone()), (opt(0.005), opt(0.01)));
    assert_eq!((s.u_minus.clone(), s.u_plus.clone()), (opt(0.2), opt(0.35)));
    assert_eq!((s.q_minus.clone(), s.q_plus.clone()), (opt(0.4), opt(0.9)));
    assert_eq!((s.delta_minus.clone(), s.delta_plus.clone()), (opt(1.5), opt(2.5)));
    assert_eq!(s.lambda1, opt(0.1));
    assert_eq!((s.lambda2_minus.clone(), s.lambda2_plus.clone()), (opt(0.6), opt(0.8)));
    assert_eq!(s.e_norm, opt(0.6));
    assert_eq!((s.it_minus, s.it_plus), (2, 3));
    assert_eq!(
        (s.r_minus.clone(), s.big_q_plus.clone(), s.zeta_minus.clone()),
        (None, None, None)
    );
    assert_eq!(s.rem(), 0);
}

#[test]
fn aggregate_ignores_run_order() {
    let [a, b] = two_runs();
    let forward = aggregate(&[a.clone(), b.clone()], WindowRule::Min);
    let backward = aggregate(&[b, a], WindowRule::Min);
    assert_eq!(forward, backward);
}

#[test]
fn singleton_aggregate_has_equal_final_bounds() {
    let [a, _] = two_runs();
    let s = aggregate(&[a], WindowRule::LastQuarter);
    assert_eq!(s.f_minus, s.f_plus);
    assert_eq!(s.u_minus, s.u_plus);
    assert_eq!(s.lambda2_minus, s.lambda2_plus);
    assert_eq!(s.it_minus, s.it_plus);
}

#[test]
fn window_starts() {
    assert_eq!(window_start(40, WindowRule::Min), 15);
    assert_eq!(window_start(80, WindowRule::Min), 55);
    assert_eq!(window_start(120, WindowRule::Min), 90);
}

#[test]
fn uniform_draws_stay_in_half_open_interval() {
    let ctx = ctx();
    let mut rng = run_rng(99, 3);
    let mut sum = 0.0;
    for _ in 0..10_000 {
        let x = uniform_symmetric(&mut rng, &ctx);
        assert!(x >= -1);
        assert!(x < 1);
        sum += x.to_f64();
    }
    assert!((sum / 10_000.0).abs() < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn run_streams_are_distinct_and_reproducible(seed in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        let ctx = ctx();
        let first = uniform_symmetric(&mut run_rng(seed, a), &ctx);
        prop_assert_eq!(&first, &uniform_symmetric(&mut run_rng(seed, a), &ctx));
        if a != b {
            prop_assert_ne!(first, uniform_symmetric(&mut run_rng(seed, b), &ctx));
        }
    }
}

fn small_series(alpha: f64, m: usize) -> SeriesConfig {
    let mut cfg = SeriesConfig::new("example1", alpha, 0.0);
    cfg.m = m;
    cfg.precision = 200;
    cfg.tol_exponent = 100;
    cfg.rng_seed = 17;
    cfg
}

#[test]
fn cumulative_run_is_reproducible_across_worker_counts() {
    let cfg = small_series(1e-3, 12);
    let crit = AcceptanceCriteria::for_problem(ProblemKind::Example1);
    let base = cumulative_run(&cfg, &crit, Some(1)).unwrap();
    assert_eq!(base, cumulative_run(&cfg, &crit, Some(1)).unwrap());
    assert_eq!(base, cumulative_run(&cfg, &crit, Some(4)).unwrap());
    assert_eq!(base, cumulative_run(&cfg, &crit, None).unwrap());
}

#[test]
fn smaller_neighbourhood_removes_no_more_runs() {
    let crit = AcceptanceCriteria::for_problem(ProblemKind::Example1);
    let rem = |alpha| match cumulative_run(&small_series(alpha, 50), &crit, None) {
        Ok(s) => s.rem(),
        Err(HarnessError::EmptyAcceptedSet { removed }) => removed.total(),
        Err(e) => panic!("{e}"),
    };
    let wide = rem(1e-1);
    let narrow = rem(1e-5);
    assert!(narrow <= wide, "{narrow} > {wide}");
}

#[test]
fn close_starts_are_all_accepted_with_golden_rates() {
    let mut cfg = small_series(1e-5, 50);
    cfg.precision = 320;
    let crit = AcceptanceCriteria::for_problem(ProblemKind::Example1);
    let s = cumulative_run(&cfg, &crit, None).unwrap();
    assert_eq!(s.rem(), 0);
    assert_eq!(s.accepted, 50);
    let (lo, hi) = AcceptanceCriteria::GOLDEN_BAND;
    for q in [&s.q_minus, &s.q_plus, &s.big_q_minus, &s.big_q_plus] {
        let q = q.as_ref().unwrap();
        assert!(*q >= lo && *q <= hi, "{q}");
    }
}

#[test]
fn empty_accepted_set_is_reported() {
    let mut cfg = small_series(1e-3, 4);
    cfg.max_iter = 3;
    let crit = AcceptanceCriteria::for_problem(ProblemKind::Example1);
    match cumulative_run(&cfg, &crit, None) {
        Err(HarnessError::EmptyAcceptedSet { removed }) => assert_eq!(removed.timeout, 4),
        other => panic!("{other:?}"),
    }
}
