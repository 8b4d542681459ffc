use actvar::optimal::{n_of_eps_bound, tau_sum_identity};
use actvar::{n_of_eps, optimal_algorithm, Error, Spectrum};
use proptest::prelude::*;

#[test]
fn ceilings_on_the_strong_tractability_grid() {
    let s = Spectrum::korobov(1.0, 20_000).unwrap();
    for d in [1usize, 10, 100, 1000] {
        for q in 1..=4 {
            let eps = 10f64.powi(-q);
            let opt = optimal_algorithm(eps, d, &s, 1.0).unwrap();
            assert!(opt.within_m2, "d={d} eps={eps}: {} > {}", opt.max_act, opt.m2);
            assert!(opt.worst_case_error <= eps);
            assert!(opt.n <= n_of_eps_bound(eps, d, &s, 1.0).unwrap());
        }
    }
}

#[test]
fn truncated_spectra_refuse_below_the_floor() {
    let s = Spectrum::korobov(1.0, 100).unwrap();
    assert!(matches!(
        n_of_eps(1e-4, 1, &s),
        Err(Error::CertificationExceeded { .. })
    ));
}

#[test]
fn tau_sum_on_the_two_eigenvalue_example() {
    let s = Spectrum::custom(vec![0.5, 0.125]).unwrap();
    let t = tau_sum_identity(2, &s, 1.0).unwrap();
    assert!((t.lhs - 1.72265625).abs() <= 1e-12 * 1.72265625);
    assert!((t.rhs - t.lhs).abs() <= 1e-12 * t.rhs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn n_is_monotone(d in 1usize..500, e1 in 0.005f64..0.9, e2 in 0.005f64..0.9) {
        let s = Spectrum::korobov(1.0, 5_000).unwrap();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(n_of_eps(lo, d, &s).unwrap() >= n_of_eps(hi, d, &s).unwrap());
    }

    #[test]
    fn tau_sum_holds_for_complete_spectra(
        mut v in proptest::collection::vec(0.01f64..2.0, 1..5),
        d in 1usize..4,
        tau in 0.5f64..2.0,
    ) {
        v.sort_by(|a, b| b.total_cmp(a));
        let s = Spectrum::custom(v).unwrap();
        let t = tau_sum_identity(d, &s, tau).unwrap();
        prop_assert!((t.lhs - t.rhs).abs() <= 1e-12 * t.rhs);
    }
}
