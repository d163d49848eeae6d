use broyden_core::linalg::{PrecisionContext, Vector};
use broyden_core::problems::{registry_names, Problem};
use proptest::prelude::*;

fn ctx() -> PrecisionContext {
    PrecisionContext::with_digits(90).unwrap()
}

const NAMES: [&str; 7] = [
    "example1",
    "example2",
    "example3",
    "example4",
    "monomial:1",
    "monomial:2",
    "monomial:5",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn analytic_jacobians_match_finite_differences(
        which in 0usize..NAMES.len(),
        coords in prop::collection::vec(-0.9f64..0.9, 3),
    ) {
        let ctx = ctx();
        let p = Problem::by_name(NAMES[which], &ctx).unwrap();
        let u = Vector::from_f64(&coords[..p.n()], &ctx);
        let mismatch = p.jacobian_fd_mismatch(&u);
        prop_assert!(mismatch <= p.jacobian_fd_tolerance(), "{}: {}", NAMES[which], mismatch);
    }

    #[test]
    fn residuals_are_deterministic(which in 0usize..NAMES.len(), coords in prop::collection::vec(-2.0f64..2.0, 3)) {
        let ctx = ctx();
        let p = Problem::by_name(NAMES[which], &ctx).unwrap();
        let u = Vector::from_f64(&coords[..p.n()], &ctx);
        prop_assert_eq!(p.eval_f(&u), p.eval_f(&u));
        prop_assert_eq!(p.eval_j(&u), p.eval_j(&u));
    }
}

#[test]
fn every_problem_vanishes_at_its_root() {
    let ctx = ctx();
    for name in NAMES {
        let p = Problem::by_name(name, &ctx).unwrap();
        assert!(p.eval_f(p.root()).is_zero(), "{name}");
    }
}

#[test]
fn registry_lists_the_family() {
    assert_eq!(
        registry_names(),
        vec!["example1", "example2", "example3", "example4", "monomial:p"]
    );
}

#[test]
fn projector_identities() {
    let ctx = ctx();
    for name in ["example1", "example2", "example3", "monomial:3"] {
        let p = Problem::by_name(name, &ctx).unwrap();
        let pr = p.projector_n().unwrap();
        let phi = p.phi().unwrap();
        let tol = ctx.floor(5);
        assert!((&pr.p_n.mul_vec(phi) - phi).norm2() <= tol, "{name}: P_N φ = φ");
        assert!(pr.p_x.mul_vec(phi).norm2() <= tol, "{name}: P_X φ = 0");
        // X = range F'(ū) is annihilated by P_N.
        let j = p.eval_j(p.root());
        assert!(pr.p_n.matmul(&j).max_abs() <= tol, "{name}: P_N F'(ū) = 0");
    }
}
