//! Holonomy maps between fibers along the orbit-closure lamination.

use rayon::prelude::*;
use serde::Serialize;

use super::section::Atlas;
use crate::base::{BaseGrid, BasePoint};
use crate::cocycle::SkewSystem;
use crate::error::{LabError, Result};
use crate::fiber::{circ_dist, CircleDiffeo, CircleMap};

/// Samples of the sampled holonomy maps.
pub const HOLONOMY_GRID: usize = 256;

/// The atlas over one base point: anchor parameter `θ ↦` lift of the value
/// of the section through `(x₀, θ)`, known at `θ = j/m` and interpolated by
/// cubic Lagrange polynomials through the four nearest knots.
#[derive(Clone, Debug)]
pub struct Knots {
    values: Vec<f64>,
}

impl Knots {
    /// Fails when the section values are not strictly increasing around the
    /// circle or when two neighbouring sections are more than two anchor
    /// spacings apart.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m < 4 {
            return Err(LabError::SparseAtlas(format!("{m} knots")));
        }
        let limit = 2.0 / m as f64;
        for j in 0..m {
            let gap = if j + 1 < m {
                values[j + 1] - values[j]
            } else {
                values[0] + 1.0 - values[m - 1]
            };
            if !(gap > 0.0 && gap <= limit) {
                return Err(LabError::SparseAtlas(format!(
                    "sections {j} and {} are {gap:.3e} apart, more than 2/m = {limit:.3e}",
                    (j + 1) % m
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    fn at(&self, j: i64) -> f64 {
        let m = self.values.len() as i64;
        self.values[j.rem_euclid(m) as usize] + j.div_euclid(m) as f64
    }

    /// Value and derivative at the anchor parameter `theta`.
    pub fn eval(&self, theta: f64) -> (f64, f64) {
        let m = self.values.len() as f64;
        let s = theta * m;
        let j = s.floor();
        let u = s - j;
        let j = j as i64;
        let p = [self.at(j - 1), self.at(j), self.at(j + 1), self.at(j + 2)];
        let w = [
            -u * (u - 1.0) * (u - 2.0) / 6.0,
            (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
            -(u + 1.0) * u * (u - 2.0) / 2.0,
            (u + 1.0) * u * (u - 1.0) / 6.0,
        ];
        let dw = [
            -(3.0 * u * u - 6.0 * u + 2.0) / 6.0,
            (3.0 * u * u - 4.0 * u - 1.0) / 2.0,
            -(3.0 * u * u - 2.0 * u - 2.0) / 2.0,
            (3.0 * u * u - 1.0) / 6.0,
        ];
        let v = (0..4).map(|i| w[i] * p[i]).sum();
        let d = (0..4).map(|i| dw[i] * p[i]).sum::<f64>() * m;
        (v, d)
    }

    /// Anchor parameter whose section passes through the lift `t`.
    pub fn invert(&self, t: f64) -> f64 {
        let m = self.values.len() as i64;
        let n = (t - self.values[0]).floor();
        let s = t - n;
        let (mut lo, mut hi) = (0i64, m);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.at(mid) <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (mut a, mut b) = (lo as f64 / m as f64, (lo + 1) as f64 / m as f64);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if self.eval(mid).0 <= s {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-16 {
                break;
            }
        }
        0.5 * (a + b) + n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Slides fiber points over `from_x` along the section through them to the
/// fiber over `to_y`.
#[derive(Clone, Debug, Serialize)]
pub struct HolonomyMap {
    pub from_x: BasePoint,
    pub to_y: BasePoint,
    /// Samples of the map on `HOLONOMY_GRID` nodes.
    pub map: CircleDiffeo,
    /// `sup |H′|` over the samples.
    pub derivative_bound: f64,
    #[serde(skip)]
    from: Knots,
    #[serde(skip)]
    to: Knots,
}

impl HolonomyMap {
    pub fn between(from_x: BasePoint, to_y: BasePoint, from: Knots, to: Knots) -> Result<Self> {
        let g = HOLONOMY_GRID;
        let (lift, deriv): (Vec<f64>, Vec<f64>) = (0..g)
            .into_par_iter()
            .map(|i| {
                let theta = from.invert(i as f64 / g as f64);
                let (a, da) = from.eval(theta);
                let (b, db) = to.eval(theta);
                debug_assert!((a - i as f64 / g as f64).abs() < 1e-9);
                (b, db / da)
            })
            .unzip();
        let derivative_bound = deriv.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            from_x,
            to_y,
            map: CircleDiffeo::from_samples(lift, deriv)?,
            derivative_bound,
            from,
            to,
        })
    }

    /// Exact evaluation through the knots.
    pub fn apply(&self, t: f64) -> f64 {
        self.to.eval(self.from.invert(t)).0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let theta = self.from.invert(t);
        self.to.eval(theta).1 / self.from.eval(theta).1
    }

    pub fn inverse_apply(&self, t: f64) -> f64 {
        self.from.eval(self.to.invert(t)).0
    }

    /// `H_{y,z} ∘ H_{x,y}` evaluated exactly.
    pub fn then_apply(&self, next: &HolonomyMap, t: f64) -> f64 {
        next.apply(self.apply(t))
    }

    /// `sup` over `grid` points of `d(self(t), other(t))`.
    pub fn c0_distance(&self, other: &HolonomyMap, grid: usize) -> f64 {
        (0..grid)
            .map(|i| {
                let t = (i as f64 + 0.5) / grid as f64;
                circ_dist(self.apply(t), other.apply(t))
            })
            .fold(0.0, f64::max)
    }
}

/// Holonomy from `x` to `y` through the atlas; both fibers are reached by
/// saturation from their cell representatives.
pub fn holonomy(
    skew: &SkewSystem,
    atlas: &Atlas,
    x: &BasePoint,
    y: &BasePoint,
) -> Result<HolonomyMap> {
    let from = Knots::new(atlas.values_at(skew, x)?)?;
    let to = Knots::new(atlas.values_at(skew, y)?)?;
    HolonomyMap::between(x.clone(), y.clone(), from, to)
}

/// Holonomy between the representatives of two populated cells, without
/// saturation.
pub fn cell_holonomy(atlas: &Atlas, a: usize, b: usize) -> Result<HolonomyMap> {
    let missing = |c: usize| LabError::SparseAtlas(format!("cell {c} is not populated"));
    let from = Knots::new(atlas.cell_values(a).ok_or_else(|| missing(a))?)?;
    let to = Knots::new(atlas.cell_values(b).ok_or_else(|| missing(b))?)?;
    let rep = |c: usize| atlas.plan.reps[c].clone().ok_or_else(|| missing(c));
    HolonomyMap::between(rep(a)?, rep(b)?, from, to)
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupoidReport {
    pub triples: usize,
    /// Sup of `d(H_{y,z}∘H_{x,y}, H_{x,z})`.
    pub composition: f64,
    /// Sup of `d(H_{x,x}, id)`.
    pub identity: f64,
}

/// Groupoid laws on the given triples.
pub fn groupoid_check(
    skew: &SkewSystem,
    atlas: &Atlas,
    triples: &[(BasePoint, BasePoint, BasePoint)],
    fiber_points: usize,
) -> Result<GroupoidReport> {
    let rows = triples
        .par_iter()
        .map(|(x, y, z)| {
            let kx = Knots::new(atlas.values_at(skew, x)?)?;
            let ky = Knots::new(atlas.values_at(skew, y)?)?;
            let kz = Knots::new(atlas.values_at(skew, z)?)?;
            let hxy = HolonomyMap::between(x.clone(), y.clone(), kx.clone(), ky.clone())?;
            let hyz = HolonomyMap::between(y.clone(), z.clone(), ky, kz.clone())?;
            let hxz = HolonomyMap::between(x.clone(), z.clone(), kx.clone(), kz)?;
            let hxx = HolonomyMap::between(x.clone(), x.clone(), kx.clone(), kx)?;
            let mut comp = 0.0f64;
            let mut ident = 0.0f64;
            for i in 0..fiber_points {
                let t = (i as f64 + 0.5) / fiber_points as f64;
                comp = comp.max(circ_dist(hxy.then_apply(&hyz, t), hxz.apply(t)));
                ident = ident.max(circ_dist(hxx.apply(t), t));
            }
            Ok((comp, ident))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupoidReport {
        triples: triples.len(),
        composition: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        identity: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

const NEAREST_VISITS: usize = 256;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SmoothnessOptions {
    /// Ball radius around `x` and `y` for approximating orbit segments;
    /// defaults to twice the cell diameter.
    pub radius: Option<f64>,
    pub approximants: usize,
    /// Torus orbit length searched for approximants; shift bases use the
    /// plan orbit.
    pub scan: usize,
    pub fiber_points: usize,
    pub fd_step: f64,
}

impl Default for SmoothnessOptions {
    fn default() -> Self {
        Self {
            radius: None,
            approximants: 8,
            scan: 1_000_000,
            fiber_points: 16,
            fd_step: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Approximant {
    /// Orbit index near `x` and the segment length to the visit near `y`.
    pub k: usize,
    pub n: usize,
    /// `max(d(x_k, x), d(x_{k+n}, y))`.
    pub approach: f64,
    /// `sup_t d(Φ⁽ⁿ⁾(x_k)(t), H(t))`.
    pub c0: f64,
    /// `sup_t |(Φ⁽ⁿ⁾(x_k))′(t) − H′_fd(t)|`.
    pub c1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessReport {
    /// `(t, H′_fd(t))` by central differences of the exact holonomy.
    pub fd_derivative: Vec<(f64, f64)>,
    /// Same-orbit holonomies `Φ⁽ⁿ⁾(x_k)`, closest approach first.
    pub approximants: Vec<Approximant>,
    /// `C¹` deviation of the closest approximant.
    pub deviation: f64,
}

/// Compares the finite-difference derivative of `H_{x,y}` with the
/// derivatives of same-orbit holonomies `Φ⁽ⁿ⁾(x_k)` along the plan orbit,
/// for visits `x_k → x`, `x_{k+n} → y`.
pub fn holonomy_smoothness_check(
    skew: &SkewSystem,
    atlas: &Atlas,
    x: &BasePoint,
    y: &BasePoint,
    opts: &SmoothnessOptions,
) -> Result<SmoothnessReport> {
    let sys = &skew.base;
    let h = holonomy(skew, atlas, x, y)?;
    let ts: Vec<f64> = (0..opts.fiber_points)
        .map(|i| (i as f64 + 0.5) / opts.fiber_points as f64)
        .collect();
    let fd: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| {
            (
                t,
                (h.apply(t + opts.fd_step) - h.apply(t - opts.fd_step)) / (2.0 * opts.fd_step),
            )
        })
        .collect();
    let plan = &atlas.plan;
    let radius = opts.radius.unwrap_or(2.0 * plan.grid.cell_diameter(sys));
    let scan = match plan.grid {
        BaseGrid::Torus { .. } => opts.scan.max(plan.n_forward),
        _ => plan.n_forward,
    };
    let mut near_x: Vec<(usize, f64, BasePoint)> = Vec::new();
    let mut near_y: Vec<(usize, f64)> = Vec::new();
    let mut p = plan.start.clone();
    for k in 0..scan {
        if k > 0 {
            p = sys.step(&p, 1);
        }
        let dx = sys.distance(&p, x);
        if dx < radius {
            near_x.push((k, dx, p.clone()));
        }
        let dy = sys.distance(&p, y);
        if dy < radius {
            near_y.push((k, dy));
        }
    }
    near_x.sort_by(|a, b| a.1.total_cmp(&b.1));
    near_y.sort_by(|a, b| a.1.total_cmp(&b.1));
    near_x.truncate(NEAREST_VISITS);
    near_y.truncate(NEAREST_VISITS);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ix, (k, dx, _)) in near_x.iter().enumerate() {
        for (l, dy) in &near_y {
            if l > k {
                pairs.push((dx.max(*dy), ix, l - k));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.2.cmp(&b.2)));
    pairs.truncate(opts.approximants);
    let approximants: Vec<Approximant> = pairs
        .par_iter()
        .map(|&(approach, ix, n)| {
            let (k, _, start) = &near_x[ix];
            let mut cur = start.clone();
            let mut vals: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 1.0)).collect();
            for _ in 0..n {
                let g = skew.circle_map(&cur);
                for v in vals.iter_mut() {
                    let (a, d) = g.lift_with_deriv(v.0);
                    *v = (a, v.1 * d);
                }
                cur = sys.step(&cur, 1);
            }
            let mut c0 = 0.0f64;
            let mut c1 = 0.0f64;
            for (i, &t) in ts.iter().enumerate() {
                c0 = c0.max(circ_dist(vals[i].0, h.apply(t)));
                c1 = c1.max((vals[i].1 - fd[i].1).abs());
            }
            Approximant {
                k: *k,
                n,
                approach,
                c0,
                c1,
            }
        })
        .collect();
    let deviation = approximants.first().map_or(f64::NAN, |a| a.c1);
    Ok(SmoothnessReport {
        fd_derivative: fd,
        approximants,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_knots_are_reproduced() {
        let k = Knots::new((0..32).map(|j| j as f64 / 32.0 + 0.25).collect()).unwrap();
        for i in 0..100 {
            let theta = i as f64 / 100.0 - 0.3;
            let (v, d) = k.eval(theta);
            assert!((v - theta - 0.25).abs() < 1e-14);
            assert!((d - 1.0).abs() < 1e-12);
            assert!((k.invert(v) - theta).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_interpolation_of_a_smooth_map() {
        let f = |t: f64| t + 0.05 * (std::f64::consts::TAU * t).sin();
        let k = Knots::new((0..32).map(|j| f(j as f64 / 32.0)).collect()).unwrap();
        for i in 0..200 {
            let t = i as f64 / 200.0;
            assert!((k.eval(t).0 - f(t)).abs() < 1e-5);
        }
    }

    #[test]
    fn collapsed_sections_are_sparse() {
        let mut v: Vec<f64> = (0..32).map(|j| 0.5 + j as f64 * 1e-3).collect();
        v[0] = 0.0;
        assert!(matches!(Knots::new(v), Err(LabError::SparseAtlas(_))));
    }

    use super::super::fixtures::{coboundary_atlas, generator, identity_atlas};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn conjugation(skew: &SkewSystem, x: &BasePoint, y: &BasePoint, t: f64) -> (f64, f64) {
        let g = generator();
        let (vx, vy) = (g.at(&skew.base, x), g.at(&skew.base, y));
        let s = vx.inv_lift(t);
        let (v, d) = vy.lift_with_deriv(s);
        (v, d / vx.deriv(s))
    }

    #[test]
    fn identity_holonomy_is_the_identity() {
        let (skew, atlas) = identity_atlas();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = skew.base.random_point(&mut rng);
        let y = skew.base.random_point(&mut rng);
        let h = holonomy(skew, atlas, &x, &y).unwrap();
        for i in 0..50 {
            let t = i as f64 / 50.0;
            assert!(circ_dist(h.apply(t), t) < 1e-12);
            assert!((h.deriv(t) - 1.0).abs() < 1e-12);
        }
        let same = holonomy(skew, atlas, &x, &x).unwrap();
        assert!(same.c0_distance(&h, 64) < 1e-12);
    }

    #[test]
    fn coboundary_holonomy_is_the_conjugation() {
        let (skew, atlas) = coboundary_atlas();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..8 {
            let x = skew.base.random_point(&mut rng);
            let y = skew.base.random_point(&mut rng);
            let h = holonomy(skew, atlas, &x, &y).unwrap();
            for i in 0..32 {
                let t = (i as f64 + 0.5) / 32.0;
                let (v, d) = conjugation(skew, &x, &y, t);
                assert!(circ_dist(h.apply(t), v) < 1e-2);
                assert!((h.deriv(t) - d).abs() < 2e-2);
            }
        }
    }

    #[test]
    fn forward_step_holonomy_is_the_cocycle() {
        let (skew, atlas) = coboundary_atlas();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..8 {
            let x = skew.base.random_point(&mut rng);
            let fx = skew.base.step(&x, 1);
            let h = holonomy(skew, atlas, &x, &fx).unwrap();
            let phi = skew.circle_map(&x);
            for i in 0..32 {
                let t = (i as f64 + 0.5) / 32.0;
                assert!(circ_dist(h.apply(t), phi.lift(t)) < 5e-3);
            }
        }
    }

    #[test]
    fn holonomies_form_a_groupoid() {
        let (skew, atlas) = coboundary_atlas();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let triples: Vec<_> = (0..6)
            .map(|_| {
                (
                    skew.base.random_point(&mut rng),
                    skew.base.random_point(&mut rng),
                    skew.base.random_point(&mut rng),
                )
            })
            .collect();
        let r = groupoid_check(skew, atlas, &triples, 32).unwrap();
        assert!(r.identity < 1e-12);
        assert!(r.composition < 1e-9);
    }

    #[test]
    fn smoothness_matches_the_conjugation_derivative() {
        let (skew, atlas) = coboundary_atlas();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = skew.base.random_point(&mut rng);
        let y = skew.base.random_point(&mut rng);
        let r =
            holonomy_smoothness_check(skew, atlas, &x, &y, &SmoothnessOptions::default()).unwrap();
        for &(t, d) in &r.fd_derivative {
            assert!((d - conjugation(skew, &x, &y, t).1).abs() < 2e-2);
        }
        assert!(!r.approximants.is_empty());
        assert!(r.deviation.is_finite());
    }
}
