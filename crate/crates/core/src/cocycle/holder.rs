//! Empirical Hölder quotients of cocycles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{GroupElement, SkewSystem};
use crate::base::{BasePoint, BaseSystem, SftPoint, TorusPoint};
use crate::fiber::c1_distance;

/// Fiber grid used for the `C¹` group distance in Hölder quotients.
pub const HOLDER_FIBER_GRID: usize = 256;

#[derive(Clone, Debug, Serialize)]
pub struct HolderEstimate {
    pub value: f64,
    pub alpha: f64,
    pub samples: usize,
}

/// `C¹` distance for circle elements, entrywise distance for matrices.
pub fn group_distance(a: &GroupElement, b: &GroupElement) -> f64 {
    match (a, b) {
        (GroupElement::Circle(g), GroupElement::Circle(h)) => c1_distance(g, h, HOLDER_FIBER_GRID),
        (GroupElement::Matrix(m), GroupElement::Matrix(n)) => m.distance(n),
        _ => panic!("mixed group elements"),
    }
}

/// Random pair `(x, y)` at a random scale.
pub fn sample_pair<R: Rng + ?Sized>(sys: &BaseSystem, rng: &mut R) -> (BasePoint, BasePoint) {
    match sys {
        BaseSystem::Cat(_) => {
            let x = TorusPoint::new(rng.gen(), rng.gen());
            let r = 10f64.powf(-rng.gen_range(0.3..3.0));
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let y = TorusPoint::new(x.coords[0] + r * a.cos(), x.coords[1] + r * a.sin());
            (BasePoint::Torus(x), BasePoint::Torus(y))
        }
        BaseSystem::Shift(s) => {
            let x = s.random_point(rng, 48);
            let m = rng.gen_range(-1..10i64);
            let fresh = s.random_point(rng, 48);
            let positive = rng.gen_bool(0.5);
            let y = if m < 0 {
                fresh
            } else {
                splice_at(s, &x, &fresh, m, positive)
            };
            (BasePoint::Symbolic(x), BasePoint::Symbolic(y))
        }
    }
}

/// `x` on the window `−m..=m` extended by `fresh` past the chosen side,
/// joined by a connecting path.
fn splice_at(
    s: &crate::base::Sft,
    x: &SftPoint,
    fresh: &SftPoint,
    m: i64,
    positive: bool,
) -> SftPoint {
    let core = x.window(-m - 30, m);
    let tail = fresh.window(0, 30);
    if positive {
        let mut center = core.clone();
        center.extend(s.connector(core[core.len() - 1], tail[0]));
        center.extend_from_slice(&tail);
        s.point_with_center(&center, m + 30)
    } else {
        let tail_l = fresh.window(-30, 0);
        let core_r = x.window(-m, m + 30);
        let mut center = tail_l.clone();
        center.extend(s.connector(tail_l[tail_l.len() - 1], core_r[0]));
        let off = center.len() as i64 + m;
        center.extend_from_slice(&core_r);
        s.point_with_center(&center, off)
    }
}

/// Empirical `sup d_G(Φx, Φy) / d(x, y)^α` over `samples` random pairs.
/// The sample sequence depends only on `seed`, so the estimate is
/// nondecreasing in `samples`.
pub fn holder_estimate(skew: &SkewSystem, samples: usize, seed: u64) -> HolderEstimate {
    let alpha = skew.cocycle.alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let (x, y) = sample_pair(&skew.base, &mut rng);
        let d = skew.base.distance(&x, &y);
        if d <= 0.0 {
            continue;
        }
        let q = group_distance(&skew.element(&x), &skew.element(&y)) / d.powf(alpha);
        best = best.max(q);
    }
    HolderEstimate {
        value: best,
        alpha,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{BaseFunction, CircleFamily, CocycleSpec};
    use crate::fiber::FiberMap;

    #[test]
    fn constant_cocycle_has_zero_quotient() {
        let sys = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
        let skew = SkewSystem::new(
            sys,
            CocycleSpec::circle(CircleFamily::ArnoldBump {
                amplitude: BaseFunction::Const(0.3),
                shift: BaseFunction::Const(0.0),
            }),
        );
        assert_eq!(holder_estimate(&skew, 50, 1).value, 0.0);
    }

    #[test]
    fn rotation_quotient_below_lipschitz_bound() {
        let sys = BaseSystem::cat([[2, 1], [1, 1]]).unwrap();
        let eps = 0.05;
        let skew = SkewSystem::new(
            sys,
            CocycleSpec::circle(CircleFamily::Rotation {
                angle: BaseFunction::cos_mode([1, 0], eps),
            }),
        );
        let h1 = holder_estimate(&skew, 200, 7).value;
        let h2 = holder_estimate(&skew, 400, 7).value;
        assert!(h1 > 0.0 && h1 <= h2);
        assert!(h2 <= std::f64::consts::TAU * eps * (1.0 + 1e-9));
    }

    #[test]
    fn locally_constant_shift_cocycle() {
        let sys = BaseSystem::full_shift(2, 0.5).unwrap();
        let maps = vec![FiberMap::Rotation(0.0), FiberMap::Rotation(0.2)];
        let skew = SkewSystem::new(
            sys.clone(),
            CocycleSpec::circle(CircleFamily::LocallyConstant {
                lo: 0,
                hi: 0,
                alphabet: 2,
                maps,
            }),
        );
        // pairs with different x₀ are at distance 1
        let h = holder_estimate(&skew, 400, 3).value;
        assert!((h - 0.2).abs() < 1e-12);
    }
}
