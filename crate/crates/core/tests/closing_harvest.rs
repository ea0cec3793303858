use livsic_core::base::{fit_closing, harvest_near_returns, BaseSystem};

fn check(sys: &BaseSystem, seed: u64) {
    let harvest = harvest_near_returns(sys, 100, 12, seed).unwrap();
    assert_eq!(harvest.len(), 100);
    let results: Vec<_> = harvest
        .iter()
        .map(|r| sys.anosov_closing(&r.x, r.n).unwrap())
        .collect();
    for (r, h) in results.iter().zip(&harvest) {
        assert!(sys.is_periodic(&r.p, r.n));
        assert_eq!(r.bound_trace.len(), h.n + 1);
    }
    let fit = fit_closing(sys, &results);
    assert!(fit.apriori_hold);
    assert!((0.5..=2.0).contains(&fit.lambda_ratio()), "{fit:?}");
    assert!(fit.c <= fit.c_apriori, "{fit:?}");
}

#[test]
fn cat_map_closing_bounds_with_one_constant_pair() {
    check(&BaseSystem::cat([[2, 1], [1, 1]]).unwrap(), 0);
}

#[test]
fn full_shift_closing_bounds_with_one_constant_pair() {
    check(&BaseSystem::full_shift(2, 0.5).unwrap(), 0);
}

#[test]
fn golden_mean_closing_bounds_with_one_constant_pair() {
    check(
        &BaseSystem::sft(vec![vec![1, 1], vec![1, 0]], 0.5).unwrap(),
        5,
    );
}

#[test]
fn periodic_input_closes_onto_itself() {
    let cat = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
    for p in cat.periodic_points(5).unwrap().iter().take(10) {
        let r = cat.anosov_closing(p, 5).unwrap();
        assert!(cat.distance(&r.p, p) < 1e-12);
        assert!(cat.distance(&r.y, p) < 1e-12);
    }
}
