use livsic_core::base::{BasePoint, BaseSystem, Side, TorusPoint};
use livsic_core::cocycle::{
    BaseFunction, CircleFamily, CocycleSpec, FiberState, Generator, SkewSystem,
};
use livsic_core::fiber::{circ_dist, CircleDiffeo, CircleMap, FiberMap};
use livsic_core::sections::Knots;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cat() -> BaseSystem {
    BaseSystem::cat([[2, 1], [1, 1]]).unwrap()
}

fn shift() -> BaseSystem {
    BaseSystem::sft(vec![vec![1, 1], vec![1, 0]], 0.5).unwrap()
}

fn torus_point() -> impl Strategy<Value = BasePoint> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| BasePoint::Torus(TorusPoint::new(a, b)))
}

fn shift_point(sys: &BaseSystem, seed: u64) -> BasePoint {
    sys.random_point(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn skew() -> SkewSystem {
    SkewSystem::new(
        cat(),
        CocycleSpec::circle(CircleFamily::ArnoldBump {
            amplitude: BaseFunction::cos_mode([1, 0], 0.3),
            shift: BaseFunction::sin_mode([0, 1], 0.2),
        }),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torus_steps_compose(x in torus_point(), a in -6i64..6, b in -6i64..6) {
        let sys = cat();
        let lhs = sys.step(&sys.step(&x, a), b);
        let rhs = sys.step(&x, a + b);
        prop_assert!(sys.distance(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn shift_steps_compose(seed in any::<u64>(), a in -20i64..20, b in -20i64..20) {
        let sys = shift();
        let x = shift_point(&sys, seed);
        prop_assert_eq!(sys.distance(&sys.step(&sys.step(&x, a), b), &sys.step(&x, a + b)), 0.0);
    }

    #[test]
    fn torus_metric_axioms(x in torus_point(), y in torus_point(), alpha in 0.05..1.0f64) {
        let sys = cat();
        let d = sys.distance(&x, &y);
        prop_assert_eq!(d, sys.distance(&y, &x));
        prop_assert_eq!(sys.distance(&x, &x), 0.0);
        prop_assert!(d <= std::f64::consts::FRAC_1_SQRT_2 + 1e-15);
        prop_assert_eq!(sys.distance_alpha(&x, &y, alpha), d.powf(alpha));
        for c in x.torus().coords {
            prop_assert!((0.0..1.0).contains(&c));
        }
    }

    #[test]
    fn shift_metric_axioms(s1 in any::<u64>(), s2 in any::<u64>(), alpha in 0.05..1.0f64) {
        let sys = shift();
        let (x, y) = (shift_point(&sys, s1), shift_point(&sys, s2));
        let d = sys.distance(&x, &y);
        prop_assert_eq!(d, sys.distance(&y, &x));
        prop_assert_eq!(sys.distance(&x, &x), 0.0);
        prop_assert_eq!(sys.distance_alpha(&x, &y, alpha), d.powf(alpha));
    }

    #[test]
    fn torus_bracket_lies_on_both_local_sets(x in torus_point(), u in -1.0..1.0f64, v in -1.0..1.0f64) {
        let sys = cat();
        let hyp = *sys.hyp();
        let c = x.torus().coords;
        let r = hyp.delta0 * 0.7;
        let y = BasePoint::Torus(TorusPoint::new((c[0] + r * u).rem_euclid(1.0), (c[1] + r * v).rem_euclid(1.0)));
        prop_assume!(sys.distance(&x, &y) <= hyp.delta0);
        let w = sys.bracket(&x, &y).unwrap();
        prop_assert!(sys.distance(&sys.bracket(&x, &x).unwrap(), &x) < 1e-12);
        for k in 0..12 {
            prop_assert!(sys.distance(&sys.step(&w, k), &sys.step(&y, k)) <= hyp.eps0 + 1e-9);
            prop_assert!(sys.distance(&sys.step(&w, -k), &sys.step(&x, -k)) <= hyp.eps0 + 1e-9);
        }
    }

    #[test]
    fn shift_bracket_lies_on_both_local_sets(seed in any::<u64>()) {
        let sys = shift();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sys.random_point(&mut rng);
        let y = sys.leaf_point(&x, Side::Stable, 1.0, &mut rng);
        prop_assume!(sys.distance(&x, &y) <= sys.hyp().delta0);
        let w = sys.bracket(&x, &y).unwrap();
        let eps0 = sys.hyp().eps0;
        for k in 0..12 {
            prop_assert!(sys.distance(&sys.step(&w, k), &sys.step(&y, k)) <= eps0);
            prop_assert!(sys.distance(&sys.step(&w, -k), &sys.step(&x, -k)) <= eps0);
        }
    }

    #[test]
    fn cocycle_products_concatenate(x in torus_point(), m in 0i64..6, n in 0i64..6, t in 0.0..1.0f64) {
        let s = skew();
        let xm = s.base.step(&x, m);
        let whole = s.cocycle_product(&x, m + n);
        let first = s.cocycle_product(&x, m);
        let second = s.cocycle_product(&xm, n);
        let lhs = whole.circle().lift(t);
        let rhs = second.circle().lift(first.circle().lift(t));
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn skew_steps_invert(x in torus_point(), t in 0.0..1.0f64, k in 1i64..8) {
        let s = skew();
        let z = (x.clone(), FiberState::Circle(t));
        let back = s.skew_step(&s.skew_step(&z, k), -k);
        prop_assert!(s.base.distance(&back.0, &x) < 1e-9);
        prop_assert!(circ_dist(back.1.circle(), t) < 1e-9);
    }

    #[test]
    fn sampled_diffeos_invert(amp in -0.8..0.8f64, shift in -1.0..1.0f64, t in 0.0..1.0f64) {
        let f = FiberMap::Bump { shift, amp, phase: 0.1 };
        let d = CircleDiffeo::sample(&f, 512).unwrap();
        let id = d.compose(&d.invert()).unwrap();
        prop_assert!(circ_dist(id.lift(t), t) < 1e-4);
        prop_assert!(circ_dist(f.inv_lift(f.lift(t)), t) < 1e-12);
    }

    #[test]
    fn knots_round_trip(amp in -0.5..0.5f64, theta in -2.0..2.0f64) {
        let g = |s: f64| s + 0.1 + amp / std::f64::consts::TAU * (std::f64::consts::TAU * s).sin();
        let k = Knots::new((0..32).map(|j| g(j as f64 / 32.0)).collect()).unwrap();
        let (v, d) = k.eval(theta);
        prop_assert!(d > 0.0);
        prop_assert!((k.invert(v) - theta).abs() < 1e-9);
    }

    #[test]
    fn generator_coboundary_has_trivial_periodic_products(seed in 0u64..1000) {
        let g = Generator {
            shift: BaseFunction::cos_mode([1, 0], 0.02),
            amp: BaseFunction::Sum(vec![BaseFunction::Const(0.1), BaseFunction::cos_mode([1, 1], 0.05)]),
            phase: BaseFunction::sin_mode([0, 1], 0.1),
        };
        let s = SkewSystem::new(cat(), CocycleSpec::circle(CircleFamily::CoboundaryGenerated { generator: g }));
        let n = 1 + (seed % 5) as usize;
        let pts = s.base.periodic_points(n).unwrap();
        let p = &pts[(seed as usize) % pts.len()];
        let t = (seed as f64 * 0.618).fract();
        prop_assert!(circ_dist(s.cocycle_product(p, n as i64).circle().lift(t), t) < 1e-12);
    }
}

proptest! {
    #[test]
    fn shift_windows_and_splices_match_coordinates(
        seed in any::<u64>(),
        len in 1usize..64,
        (kx, ky) in (-200i64..200, -200i64..200),
        (lo, width) in (-300i64..300, 0i64..300),
    ) {
        let s = livsic_core::base::Sft::new(vec![vec![1, 1], vec![1, 0]], 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = s.random_point(&mut rng, len).shifted(kx);
        let y = s.random_point(&mut rng, len).shifted(ky);
        let direct: Vec<u8> = (lo..=lo + width).map(|i| x.symbol(i)).collect();
        prop_assert_eq!(x.window(lo, lo + width), direct);
        if s.admissible(x.symbol(-1), y.symbol(0)) {
            let z = livsic_core::base::sft::splice(&x, &y);
            for i in -400..400 {
                prop_assert_eq!(z.symbol(i), if i < 0 { x.symbol(i) } else { y.symbol(i) });
            }
        }
    }
}
