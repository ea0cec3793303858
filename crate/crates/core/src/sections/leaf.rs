//! Lifted local stable and unstable sets by graph transform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::base::{BasePoint, LeafPair, Side};
use crate::cocycle::{holder_estimate, FiberState, SkewSystem, State};
use crate::error::{LabError, Result};
use crate::fiber::{circ_dist, CircleMap, FiberMap};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LeafOptions {
    pub max_depth: usize,
    /// Successive-depth disagreement accepted as converged.
    pub tol: f64,
}

impl Default for LeafOptions {
    fn default() -> Self {
        Self {
            max_depth: 200,
            tol: 1e-8,
        }
    }
}

/// Circle values slid along a local leaf.
#[derive(Clone, Debug, Serialize)]
pub struct LeafTransport {
    /// Lifts, on the branch continuing the input lifts.
    pub values: Vec<f64>,
    pub depth: usize,
    /// Disagreement between the last two depths.
    pub increment: f64,
    pub converged: bool,
}

/// Slides the circle values `ys` over `x` to the fiber over `z`, with `z`
/// in the local `side` set of `x`:
/// `(Φ⁽ᵈ⁾(z))⁻¹ ∘ Φ⁽ᵈ⁾(x)` on the stable side and
/// `Φ⁽ᵈ⁾(f⁻ᵈz) ∘ (Φ⁽ᵈ⁾(f⁻ᵈx))⁻¹` on the unstable side, with `d` increased
/// until two successive depths agree to `opts.tol`.
pub fn leaf_transport(
    skew: &SkewSystem,
    x: &BasePoint,
    z: &BasePoint,
    side: Side,
    ys: &[f64],
    opts: &LeafOptions,
) -> Result<LeafTransport> {
    let mut pair = LeafPair::new(&skew.base, x, z, side)?;
    if skew.base.distance(x, z) == 0.0 {
        return Ok(LeafTransport {
            values: ys.to_vec(),
            depth: 0,
            increment: 0.0,
            converged: true,
        });
    }
    let mut cur = ys.to_vec();
    let mut prev = ys.to_vec();
    let mut zmaps: Vec<FiberMap> = Vec::new();
    let mut increment = f64::INFINITY;
    let mut quiet = 0;
    for d in 1..=opts.max_depth {
        match side {
            Side::Stable => {
                let gx = skew.circle_map(pair.x());
                cur.iter_mut().for_each(|v| *v = gx.lift(*v));
                zmaps.push(skew.circle_map(pair.z()));
                pair.advance()?;
            }
            Side::Unstable => {
                pair.advance()?;
                let gx = skew.circle_map(pair.x());
                cur.iter_mut().for_each(|v| *v = gx.inv_lift(*v));
                zmaps.push(skew.circle_map(pair.z()));
            }
        }
        let eta: Vec<f64> = cur
            .iter()
            .map(|&v| match side {
                Side::Stable => zmaps.iter().rev().fold(v, |acc, g| g.inv_lift(acc)),
                Side::Unstable => zmaps.iter().rev().fold(v, |acc, g| g.lift(acc)),
            })
            .collect();
        increment = eta
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prev = eta;
        if increment < opts.tol {
            quiet += 1;
            if quiet == 2 {
                return Ok(LeafTransport {
                    values: prev,
                    depth: d,
                    increment,
                    converged: true,
                });
            }
        } else {
            quiet = 0;
        }
    }
    Ok(LeafTransport {
        values: prev,
        depth: opts.max_depth,
        increment,
        converged: false,
    })
}

fn vector_transport(
    skew: &SkewSystem,
    x: &BasePoint,
    z: &BasePoint,
    side: Side,
    y: &DVector<f64>,
    opts: &LeafOptions,
) -> Result<(DVector<f64>, usize, f64, bool)> {
    let mut pair = LeafPair::new(&skew.base, x, z, side)?;
    let dim = y.len();
    // stable: η = Pz⁻¹·Px·y; unstable: η = Qz·Qx·y
    let mut px = DMatrix::<f64>::identity(dim, dim);
    let mut pz = DMatrix::<f64>::identity(dim, dim);
    let mut prev = y.clone();
    let mut increment = f64::INFINITY;
    let mut quiet = 0;
    for d in 1..=opts.max_depth {
        match side {
            Side::Stable => {
                px = &skew.matrix(pair.x()).entries * &px;
                pz = &skew.matrix(pair.z()).entries * &pz;
                pair.advance()?;
            }
            Side::Unstable => {
                pair.advance()?;
                px = &skew.matrix(pair.x()).inverse().entries * &px;
                pz = &pz * &skew.matrix(pair.z()).entries;
            }
        }
        let eta = match side {
            Side::Stable => pz
                .clone()
                .lu()
                .solve(&(&px * y))
                .ok_or_else(|| LabError::Lift("singular cocycle product".into()))?,
            Side::Unstable => &pz * (&px * y),
        };
        increment = (&eta - &prev).amax();
        prev = eta;
        if increment < opts.tol {
            quiet += 1;
            if quiet == 2 {
                return Ok((prev, d, increment, true));
            }
        } else {
            quiet = 0;
        }
    }
    Ok((prev, opts.max_depth, increment, false))
}

#[derive(Clone, Debug)]
pub struct LeafValue {
    pub value: FiberState,
    pub depth: usize,
    pub increment: f64,
    /// `false` when the depth cap was reached first, the signature of a
    /// missing domination.
    pub converged: bool,
}

/// The fiber point over `z` on the lifted `side` leaf through `zeta`.
pub fn leaf_lift(
    skew: &SkewSystem,
    zeta: &State,
    z: &BasePoint,
    side: Side,
    opts: &LeafOptions,
) -> Result<LeafValue> {
    match &zeta.1 {
        FiberState::Circle(y) => {
            let t = leaf_transport(skew, &zeta.0, z, side, &[*y], opts)?;
            Ok(LeafValue {
                value: FiberState::Circle(t.values[0]),
                depth: t.depth,
                increment: t.increment,
                converged: t.converged,
            })
        }
        FiberState::Vector(v) => {
            let (eta, depth, increment, converged) =
                vector_transport(skew, &zeta.0, z, side, v, opts)?;
            Ok(LeafValue {
                value: FiberState::Vector(eta),
                depth,
                increment,
                converged,
            })
        }
    }
}

pub fn stable_lift(
    skew: &SkewSystem,
    zeta: &State,
    z: &BasePoint,
    opts: &LeafOptions,
) -> Result<LeafValue> {
    leaf_lift(skew, zeta, z, Side::Stable, opts)
}

pub fn unstable_lift(
    skew: &SkewSystem,
    zeta: &State,
    z: &BasePoint,
    opts: &LeafOptions,
) -> Result<LeafValue> {
    leaf_lift(skew, zeta, z, Side::Unstable, opts)
}

/// The graph transform truncated at exactly `depth` iterates.
pub fn lift_at_depth(
    skew: &SkewSystem,
    zeta: &State,
    z: &BasePoint,
    side: Side,
    depth: usize,
) -> Result<FiberState> {
    let opts = LeafOptions {
        max_depth: depth,
        tol: -1.0,
    };
    if depth == 0 {
        LeafPair::new(&skew.base, &zeta.0, z, side)?;
        return Ok(zeta.1.clone());
    }
    leaf_lift(skew, zeta, z, side, &opts).map(|v| v.value)
}

/// A priori Lipschitz constants of lifted leaves from the contraction
/// argument of the graph transform, in the metric `d^α`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LeafBound {
    /// Empirical `|Φ|_α`.
    pub phi_holder: f64,
    /// `sup 1/Φ′`.
    pub rho: f64,
    /// `sup Φ′`.
    pub rho_max: f64,
    /// `ρ²|Φ|_α / (1 − ρν_s^α)`.
    pub k_s: f64,
    /// `(|Φ|_α/ν_u^α) / (1 − sup Φ′/ν_u^α)`.
    pub k_u: f64,
    /// `2 / sin^α φ`.
    pub product_constant: f64,
}

impl LeafBound {
    pub fn side(&self, side: Side) -> f64 {
        match side {
            Side::Stable => self.k_s,
            Side::Unstable => self.k_u,
        }
    }

    /// Bound for a section saturated by both laminations.
    pub fn section_bound(&self) -> f64 {
        self.k_s.max(self.k_u) * self.product_constant
    }
}

pub fn leaf_bound(skew: &SkewSystem, samples: usize, seed: u64) -> LeafBound {
    let alpha = skew.cocycle.alpha;
    let hyp = skew.base.hyp().with_alpha(alpha);
    let phi_holder = holder_estimate(skew, samples, seed).value;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (mut rho, mut rho_max) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let g = skew.circle_map(&skew.base.random_point(&mut rng));
        rho = rho.max(1.0 / g.min_derivative());
        rho_max = rho_max.max(g.max_derivative());
    }
    let k_s = if rho * hyp.nu_s < 1.0 {
        rho * rho * phi_holder / (1.0 - rho * hyp.nu_s)
    } else {
        f64::INFINITY
    };
    let k_u = if rho_max < hyp.nu_u {
        (phi_holder / hyp.nu_u) / (1.0 - rho_max / hyp.nu_u)
    } else {
        f64::INFINITY
    };
    LeafBound {
        phi_holder,
        rho,
        rho_max,
        k_s,
        k_u,
        product_constant: 2.0 / skew.base.product_sine().powf(alpha),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LiftedLeaf {
    pub anchor: (BasePoint, f64),
    pub side: Side,
    /// `(z, η(z))`; the first sample is the anchor itself.
    pub samples: Vec<(BasePoint, f64)>,
    pub depths: Vec<usize>,
    pub converged: bool,
    /// A priori bound from [`LeafBound`].
    pub lipschitz_estimate: f64,
    /// Largest sampled quotient `|η(z) − η(z′)| / d(z, z′)^α`.
    pub empirical_lipschitz: f64,
}

pub fn lifted_leaf<R: Rng + ?Sized>(
    skew: &SkewSystem,
    zeta: (&BasePoint, f64),
    side: Side,
    n: usize,
    bound: &LeafBound,
    rng: &mut R,
    opts: &LeafOptions,
) -> Result<LiftedLeaf> {
    let (x, y) = zeta;
    let mut points = vec![x.clone()];
    points.extend((1..n).map(|_| skew.base.leaf_point(x, side, 1.0, rng)));
    let mut samples = Vec::with_capacity(n);
    let mut depths = Vec::with_capacity(n);
    let mut converged = true;
    for z in points {
        let t = leaf_transport(skew, x, &z, side, &[y], opts)?;
        converged &= t.converged;
        depths.push(t.depth);
        samples.push((z, t.values[0]));
    }
    let alpha = skew.cocycle.alpha;
    let mut empirical = 0.0f64;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = skew.base.distance(&samples[i].0, &samples[j].0);
            if d > 0.0 {
                empirical = empirical.max((samples[i].1 - samples[j].1).abs() / d.powf(alpha));
            }
        }
    }
    Ok(LiftedLeaf {
        anchor: (x.clone(), y),
        side,
        samples,
        depths,
        converged,
        lipschitz_estimate: bound.side(side),
        empirical_lipschitz: empirical,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafInvarianceReport {
    pub leaves: usize,
    pub samples_per_leaf: usize,
    /// Sup over sampled leaf points of the distance between the image of
    /// the leaf and the leaf through the image.
    pub max_deviation: f64,
    pub max_empirical_lipschitz: f64,
    pub bound: LeafBound,
    /// Every empirical constant lies below its side's a priori bound.
    pub uniform: bool,
    pub all_converged: bool,
    pub max_depth: usize,
}

/// Builds `leaves` lifted leaves through random states, stable and
/// unstable alternately, and compares `F(W^s(ζ))` with `W^s(Fζ)` (and
/// `F⁻¹(W^u(ζ))` with `W^u(F⁻¹ζ)`) on the image points.
pub fn leaf_invariance(
    skew: &SkewSystem,
    leaves: usize,
    samples: usize,
    seed: u64,
    opts: &LeafOptions,
) -> Result<LeafInvarianceReport> {
    if !skew.is_circle() {
        return Err(LabError::Invalid(
            "leaf invariance requires a circle cocycle".into(),
        ));
    }
    let bound = leaf_bound(skew, 2000, seed);
    let rows = (0..leaves)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let side = if i % 2 == 0 {
                Side::Stable
            } else {
                Side::Unstable
            };
            let x = skew.base.random_point(&mut rng);
            let y: f64 = rng.gen();
            let leaf = lifted_leaf(skew, (&x, y), side, samples, &bound, &mut rng, opts)?;
            let k = side.direction();
            let (fx, fy) = skew.skew_step(&(x, FiberState::Circle(y)), k);
            let fy = fy.circle();
            let mut worst = 0.0f64;
            let mut converged = leaf.converged;
            let mut depth = leaf.depths.iter().cloned().max().unwrap_or(0);
            for (z, eta) in &leaf.samples {
                let (fz, image) = skew.skew_step(&(z.clone(), FiberState::Circle(*eta)), k);
                let t = leaf_transport(skew, &fx, &fz, side, &[fy], opts)?;
                converged &= t.converged;
                depth = depth.max(t.depth);
                worst = worst.max(circ_dist(t.values[0], image.circle()));
            }
            Ok((
                worst,
                leaf.empirical_lipschitz,
                leaf.lipschitz_estimate,
                converged,
                depth,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LeafInvarianceReport {
        leaves,
        samples_per_leaf: samples,
        max_deviation: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        max_empirical_lipschitz: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        bound,
        uniform: rows.iter().all(|r| r.1 <= r.2),
        all_converged: rows.iter().all(|r| r.3),
        max_depth: rows.iter().map(|r| r.4).max().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{BaseSystem, TorusPoint};
    use crate::cocycle::{BaseFunction, CircleFamily, CocycleSpec, Generator, LinearFamily};
    use crate::fiber::MatrixElement;

    fn cat() -> BaseSystem {
        BaseSystem::cat([[2, 1], [1, 1]]).unwrap()
    }

    fn generator() -> Generator {
        Generator {
            shift: BaseFunction::cos_mode([1, 0], 0.02),
            amp: BaseFunction::Sum(vec![
                BaseFunction::Const(0.1),
                BaseFunction::cos_mode([1, 1], 0.05),
            ]),
            phase: BaseFunction::sin_mode([0, 1], 0.1),
        }
    }

    #[test]
    fn lift_at_anchor_is_anchor_value() {
        let skew = SkewSystem::new(
            cat(),
            CocycleSpec::circle(CircleFamily::CoboundaryGenerated {
                generator: generator(),
            }),
        );
        let x = BasePoint::Torus(TorusPoint::new(0.2, 0.6));
        let v = stable_lift(
            &skew,
            &(x.clone(), FiberState::Circle(0.37)),
            &x,
            &LeafOptions::default(),
        )
        .unwrap();
        assert_eq!(v.value, FiberState::Circle(0.37));
    }

    #[test]
    fn identity_leaves_are_horizontal() {
        let skew = SkewSystem::new(cat(), CocycleSpec::circle(CircleFamily::Identity));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = BasePoint::Torus(TorusPoint::new(0.2, 0.6));
        for side in [Side::Stable, Side::Unstable] {
            let z = skew.base.leaf_point(&x, side, 1.0, &mut rng);
            let v = leaf_lift(
                &skew,
                &(x.clone(), FiberState::Circle(0.37)),
                &z,
                side,
                &LeafOptions::default(),
            )
            .unwrap();
            assert_eq!(v.value, FiberState::Circle(0.37));
            assert!(v.converged);
        }
    }

    #[test]
    fn coboundary_leaf_is_conjugated_horizontal() {
        let g = generator();
        let skew = SkewSystem::new(
            cat(),
            CocycleSpec::circle(CircleFamily::CoboundaryGenerated {
                generator: g.clone(),
            }),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = BasePoint::Torus(TorusPoint::new(0.2, 0.6));
        let y = 0.3;
        for side in [Side::Stable, Side::Unstable] {
            for _ in 0..5 {
                let z = skew.base.leaf_point(&x, side, 1.0, &mut rng);
                let v = leaf_lift(
                    &skew,
                    &(x.clone(), FiberState::Circle(y)),
                    &z,
                    side,
                    &LeafOptions::default(),
                )
                .unwrap();
                let want = g.at(&skew.base, &z).lift(g.at(&skew.base, &x).inv_lift(y));
                assert!(circ_dist(v.value.circle(), want) < 5e-3);
                assert!(v.converged);
            }
        }
    }

    #[test]
    fn matrix_leaves_converge() {
        let skew = SkewSystem::new(
            cat(),
            CocycleSpec::linear(LinearFamily::Coboundary {
                t: 0.1,
                generator: vec![
                    vec![
                        BaseFunction::cos_mode([1, 0], 1.0),
                        BaseFunction::Const(0.0),
                    ],
                    vec![
                        BaseFunction::Const(0.0),
                        BaseFunction::sin_mode([0, 1], 1.0),
                    ],
                ],
            }),
        );
        let x = BasePoint::Torus(TorusPoint::new(0.2, 0.6));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = skew.base.leaf_point(&x, Side::Stable, 1.0, &mut rng);
        let y = DVector::from_vec(vec![1.0, -0.5]);
        let v = stable_lift(
            &skew,
            &(x.clone(), FiberState::Vector(y.clone())),
            &z,
            &LeafOptions::default(),
        )
        .unwrap();
        assert!(v.converged);
        let vz = MatrixElement::exp(&DMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => 0.1 * (std::f64::consts::TAU * z.torus().coords[0]).cos(),
            (1, 1) => 0.1 * (std::f64::consts::TAU * z.torus().coords[1]).sin(),
            _ => 0.0,
        }));
        let vx = MatrixElement::exp(&DMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => 0.1 * (std::f64::consts::TAU * x.torus().coords[0]).cos(),
            (1, 1) => 0.1 * (std::f64::consts::TAU * x.torus().coords[1]).sin(),
            _ => 0.0,
        }));
        let want = &vz.mul(&vx.inverse()).entries * &y;
        match v.value {
            FiberState::Vector(eta) => assert!((eta - want).amax() < 1e-6),
            _ => unreachable!(),
        }
    }

    #[test]
    fn depth_zero_returns_input() {
        let skew = SkewSystem::new(
            cat(),
            CocycleSpec::circle(CircleFamily::CoboundaryGenerated {
                generator: generator(),
            }),
        );
        let x = BasePoint::Torus(TorusPoint::new(0.2, 0.6));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = skew.base.leaf_point(&x, Side::Stable, 0.5, &mut rng);
        let zeta = (x, FiberState::Circle(0.1));
        assert_eq!(
            lift_at_depth(&skew, &zeta, &z, Side::Stable, 0).unwrap(),
            FiberState::Circle(0.1)
        );
        let a = lift_at_depth(&skew, &zeta, &z, Side::Stable, 30)
            .unwrap()
            .circle();
        let b = lift_at_depth(&skew, &zeta, &z, Side::Stable, 31)
            .unwrap()
            .circle();
        assert!((a - b).abs() < 1e-9);
    }
}
