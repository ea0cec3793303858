use std::collections::HashSet;

use livsic_core::base::{BasePoint, BaseSystem};

const CAT_COUNTS: [u128; 8] = [1, 5, 16, 45, 121, 320, 841, 2205];
const GOLDEN_MEAN_COUNTS: [u128; 8] = [1, 3, 4, 7, 11, 18, 29, 47];

fn cat_power(n: u32) -> [[i64; 2]; 2] {
    let mut m = [[1, 0], [0, 1]];
    for _ in 0..n {
        m = [
            [2 * m[0][0] + m[1][0], 2 * m[0][1] + m[1][1]],
            [m[0][0] + m[1][0], m[0][1] + m[1][1]],
        ];
    }
    m
}

/// Counts `x ∈ (1/D)ℤ² ∩ [0,1)²` with `Aⁿx ≡ x`, `D = |det(Aⁿ − I)|`;
/// every point of period `n` has such a denominator.
fn lattice_oracle(n: u32) -> u128 {
    let m = cat_power(n);
    let b = [[m[0][0] - 1, m[0][1]], [m[1][0], m[1][1] - 1]];
    let d = (b[0][0] * b[1][1] - b[0][1] * b[1][0]).abs();
    let mut count = 0;
    for p in 0..d {
        for q in 0..d {
            if (b[0][0] * p + b[0][1] * q) % d == 0 && (b[1][0] * p + b[1][1] * q) % d == 0 {
                count += 1;
            }
        }
    }
    count
}

fn closed_form(n: i32) -> u128 {
    let lu = (3.0 + 5f64.sqrt()) / 2.0;
    (lu.powi(n) + lu.powi(-n) - 2.0).round() as u128
}

#[test]
fn cat_counts_match_lattice_oracle_and_closed_form() {
    let cat = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
    for n in 1..=8 {
        let expected = CAT_COUNTS[n - 1];
        assert_eq!(lattice_oracle(n as u32), expected, "lattice n={n}");
        assert_eq!(closed_form(n as i32), expected, "closed form n={n}");
        assert_eq!(cat.periodic_count(n).unwrap(), expected);
        let pts = cat.periodic_points(n).unwrap();
        assert_eq!(pts.len() as u128, expected);
        let mut keys = HashSet::new();
        for p in &pts {
            assert!(cat.is_periodic(p, n));
            let c = p.torus().coords;
            keys.insert(((c[0] * 1e9).round() as i64, (c[1] * 1e9).round() as i64));
        }
        assert_eq!(keys.len(), pts.len());
    }
}

#[test]
fn origin_is_the_only_fixed_point() {
    let cat = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
    let pts = cat.periodic_points(1).unwrap();
    assert_eq!(pts[0].torus().coords, [0.0, 0.0]);
}

fn cyclic_words(t: &[Vec<u8>], n: usize) -> u128 {
    let k = t.len();
    let mut count = 0;
    let mut w = vec![0usize; n];
    loop {
        if (0..n).all(|i| t[w[i]][w[(i + 1) % n]] == 1) {
            count += 1;
        }
        let mut i = 0;
        while i < n && w[i] == k - 1 {
            w[i] = 0;
            i += 1;
        }
        if i == n {
            return count;
        }
        w[i] += 1;
    }
}

#[test]
fn shift_counts_match_word_enumeration() {
    let golden = vec![vec![1, 1], vec![1, 0]];
    let sft = BaseSystem::sft(golden.clone(), 0.5).unwrap();
    let full = BaseSystem::full_shift(2, 0.5).unwrap();
    for n in 1..=8 {
        assert_eq!(cyclic_words(&golden, n), GOLDEN_MEAN_COUNTS[n - 1]);
        assert_eq!(
            sft.periodic_points(n).unwrap().len() as u128,
            GOLDEN_MEAN_COUNTS[n - 1]
        );
        assert_eq!(full.periodic_points(n).unwrap().len() as u128, 1 << n);
        for p in sft.periodic_points(n).unwrap() {
            assert!(sft.is_periodic(&p, n));
        }
    }
}

#[test]
fn periodic_points_of_n_are_periodic_of_kn() {
    for sys in [
        BaseSystem::cat([[2, 1], [1, 1]]).unwrap(),
        BaseSystem::full_shift(2, 0.5).unwrap(),
    ] {
        for n in 1..=3 {
            let long = sys.periodic_points(2 * n).unwrap();
            for p in sys.periodic_points(n).unwrap() {
                let found = long.iter().any(|q| sys.distance(&p, q) < 1e-9);
                assert!(found, "{}", BasePoint::label(&p));
            }
        }
    }
}
