use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use llctrack::evaluation::{cle, overlap};
use llctrack::solver::{
    dominance_report, is_strictly_diagonally_dominant, lambda_lower_bound,
    nonnegativity_certificate, solve, solve_nonneg_oracle, CodingProblem, DEFAULT_EPSILON,
};
use llctrack::BoundingBox;

fn problem(m: usize, k: usize, lambda: f64) -> impl Strategy<Value = CodingProblem> {
    (
        prop::collection::vec(0.0..1.0f64, m),
        prop::collection::vec(0.0..1.0f64, m * k),
    )
        .prop_filter("nonzero query", |(y, _)| y.iter().any(|v| *v > 1e-3))
        .prop_map(move |(y, b)| {
            CodingProblem::new(DVector::from_vec(y), DMatrix::from_vec(m, k, b), lambda).unwrap()
        })
}

fn symmetric(k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, k * k).prop_map(move |v| {
        let m = DMatrix::from_vec(k, k, v);
        (&m + m.transpose()) * 0.5
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn regularized_code_sums_to_one(p in problem(16, 4, 0.5)) {
        let c = solve(&p).unwrap().coefficients;
        prop_assert!((c.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_bound_makes_any_gram_dominant(m in symmetric(6)) {
        let gram = m.transpose() * &m;
        let bound = lambda_lower_bound(&gram, DEFAULT_EPSILON);
        let mut f = gram.clone();
        for i in 0..6 {
            f[(i, i)] += bound;
        }
        prop_assert!(is_strictly_diagonally_dominant(&f));
        prop_assert!(bound >= DEFAULT_EPSILON);
    }

    #[test]
    fn inverse_diagonal_within_ostrowski_bounds(m in symmetric(5), shift in 0.01..3.0f64) {
        let mut f = m.clone();
        for i in 0..5 {
            let off: f64 = (0..5).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            f[(i, i)] = off + shift;
        }
        let inv = f.clone().try_inverse().unwrap();
        let rep = dominance_report(&f).unwrap();
        prop_assert!(rep.is_sdd);
        for j in 0..5 {
            let (lo, hi) = rep.diag_bounds[j];
            let tol = 1e-12 * hi.abs().max(1.0);
            prop_assert!(inv[(j, j)] >= lo - tol && inv[(j, j)] <= hi + tol);
        }
    }

    #[test]
    fn certificate_implies_positive_code(p in problem(12, 4, 0.0), lambda in 0.01..5.0f64) {
        let p = p.with_lambda(lambda).unwrap();
        let mut f = p.shifted_gram();
        for i in 0..4 {
            f[(i, i)] += lambda;
        }
        if nonnegativity_certificate(&f).unwrap() {
            prop_assert!(solve(&p).unwrap().coefficients.iter().all(|&c| c > 0.0));
        }
    }

    #[test]
    fn positive_closed_form_is_the_nonnegative_optimum(p in problem(12, 4, 0.0)) {
        let bound = lambda_lower_bound(&p.shifted_gram(), DEFAULT_EPSILON);
        let p = p.with_lambda(bound).unwrap();
        let c = solve(&p).unwrap().coefficients;
        let oracle = solve_nonneg_oracle(&p).unwrap();
        if c.iter().all(|&v| v >= 0.0) {
            prop_assert!((p.objective(&c) - p.objective(&oracle.coefficients)).abs() < 1e-9);
        }
        prop_assert!(p.objective(&oracle.coefficients) <= p.objective(&c) + 1e-9);
    }

    #[test]
    fn larger_lambda_moves_toward_uniform(p in problem(12, 5, 0.0)) {
        let spread = |l: f64| {
            let c = solve(&p.clone().with_lambda(l).unwrap()).unwrap().coefficients;
            c.iter().map(|v| (v - 0.2).abs()).fold(0.0, f64::max)
        };
        prop_assert!(spread(1e6) <= spread(10.0) + 1e-12);
        prop_assert!(spread(1e6) < 1e-3);
    }

    #[test]
    fn overlap_and_cle_agree_on_identity(
        x in -20.0..20.0f64, y in -20.0..20.0f64, w in 1.0..30.0f64, h in 1.0..30.0f64,
        dx in -40.0..40.0f64,
    ) {
        let a = BoundingBox::new(x, y, w, h);
        let b = BoundingBox::new(x + dx, y, w, h);
        prop_assert!((cle(&a, &b) - dx.abs()).abs() < 1e-9);
        if dx.abs() >= w {
            prop_assert_eq!(overlap(&a, &b), 0.0);
        } else {
            let expected = (w - dx.abs()) / (w + dx.abs());
            prop_assert!((overlap(&a, &b) - expected).abs() < 1e-9);
        }
    }
}
